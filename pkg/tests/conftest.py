import sys
from pathlib import Path

import numpy as np
import pytest
from hypothesis import settings

sys.path.insert(0, str(Path(__file__).parent))

from shoalmap import synthetic as syn  # noqa: E402
from shoalmap.scene import SceneMetadata  # noqa: E402

# first calls pay for numba compilation, so wall-clock deadlines are meaningless
settings.register_profile("shoalmap", deadline=None)
settings.load_profile("shoalmap")

# eight bands keep the single-scene problem identifiable
WIDE_BANDS = (412.0, 443.0, 490.0, 510.0, 560.0, 620.0, 665.0, 709.0)


def make_scene(H, bands=WIDE_BANDS, noise=0.0, seed=0, sun=55.22, tide=0.0, scene_id="s0",
               P=0.05, G=0.06, X=0.014, delta=0.0008, B=(0.4,), q=(1.0,)):
    truth = syn.SyntheticTruth.uniform(np.asarray(H, dtype=float), P, G, X, delta,
                                       B=list(B), q=list(q), Y=1.2)
    meta = SceneMetadata(scene_id=scene_id, sun_elevation=sun, tide_offset=tide)
    return syn.generate_synthetic_scene(truth, bands=bands, noise=noise, seed=seed,
                                        metadata=meta), truth


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
