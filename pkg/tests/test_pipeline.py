import math
import warnings

import numpy as np
import pytest

from conftest import WIDE_BANDS, make_scene
from shoalmap import engine, pipeline, spectral
from shoalmap.config import RunConfig
from shoalmap.errors import UsageError
from shoalmap.forward import band_optics
from shoalmap.pipeline import AlignmentCoefficients
from shoalmap.scene import SceneMetadata
from shoalmap.soundings import SoundingSet
from shoalmap.spectral import BandSet

LIB3 = spectral.library_matrix(spectral.select_library(n=3), BandSet(WIDE_BANDS))


def test_scene_combinations():
    assert len(pipeline.scene_combinations(4, 4)) == 15
    assert pipeline.scene_combinations(1) == [(0,)]
    assert len(pipeline.scene_combinations(5, 4)) == 5 + 10 + 10 + 5
    assert pipeline.scene_combinations(3, 2)[:4] == [(0,), (1,), (2,), (0, 1)]
    with pytest.raises(UsageError):
        pipeline.scene_combinations(0)


def test_weighted_median_examples():
    assert pipeline.weighted_median([4.2], [3.0]) == 4.2
    assert pipeline.weighted_median([10, 11, 30], [1, 2, 1]) == 11
    assert pipeline.weighted_median([10, 20], [1, 1]) == 10
    assert math.isnan(pipeline.weighted_median([np.nan], [1.0]))
    stack = np.array([[[10.0, 1.0]], [[11.0, np.nan]], [[30.0, 3.0]]])
    got = pipeline.weighted_median_depth(stack, [1, 2, 1])
    np.testing.assert_array_equal(got, [[11.0, 1.0]])


def test_median_filter():
    a = np.zeros((5, 5))
    a[2, 2] = 100.0
    np.testing.assert_array_equal(pipeline.median_filter(a, 3), 0.0)
    b = np.arange(9.0).reshape(3, 3)
    np.testing.assert_array_equal(pipeline.median_filter(b, 1), b)
    with pytest.raises(UsageError):
        pipeline.median_filter(b, 2)


def test_tide_correct():
    H = np.array([3.0, 17.22])
    np.testing.assert_array_equal(pipeline.tide_correct(H), H)
    assert pipeline.tide_correct(17.22, -0.75) == pytest.approx(16.47)
    np.testing.assert_allclose(pipeline.tide_correct(pipeline.tide_correct(H, 0.4, 0.1), -0.4, -0.1), H)


def test_alignment_identity():
    H = np.random.default_rng(0).uniform(1, 20, (1, 4, 4))
    np.testing.assert_allclose(pipeline.apply_alignment(AlignmentCoefficients.identity(1), H), H[0])


def test_alignment_scale_bias():
    rng = np.random.default_rng(2)
    truth = rng.uniform(2, 20, (10, 10))
    rows, cols = np.divmod(rng.choice(100, 30, replace=False), 10)
    snd = SoundingSet.from_pixels(rows, cols, truth[rows, cols])
    coef, aligned = pipeline.align_depths([2.0 * truth], snd)
    assert coef.a[0] * 2.0 ** coef.b[0] == pytest.approx(1.0, abs=0.05)
    assert coef.fit_error < 1e-4
    np.testing.assert_allclose(aligned, truth, rtol=1e-3)


def test_alignment_skipped_without_overlap():
    snd = SoundingSet(np.array([[500.0, 500.0, 5.0], [600.0, 600.0, 6.0]]))
    with pytest.warns(RuntimeWarning, match="alignment skipped"):
        assert pipeline.align_depths([np.ones((4, 4))], snd) == (None, None)


def _result(P, G, X, ids=("a",)):
    ns = len(ids)
    full = lambda v: np.full((ns, 1, 1), v)
    return engine.StackResult(np.ones((1, 1)), full(P), full(G), full(X), full(0.0),
                              np.ones((1, 1, 1)), np.ones((1, 1, 1)), np.zeros((1, 1)),
                              np.zeros((1, 1), int), np.zeros((1, 1), np.uint8),
                              np.ones(ns), np.full(ns, 0.015), list(ids))


def test_average_k():
    optics = band_optics(BandSet((443.0, 561.0)))
    r = _result(0.05, 0.06, 0.01)
    mean, kmin, per = pipeline.average_k([r, r], optics)
    np.testing.assert_allclose(mean, r.k(optics)[0])
    np.testing.assert_allclose(kmin, r.k(optics)[0].min(axis=0))
    # two results whose k differs by a constant: the mean sits halfway
    k1 = r.k(optics)[0]
    r2 = _result(0.05, 0.06, 0.01 + 0.2 / (440.0 / 443.0))
    k2 = r2.k(optics)[0]
    mean2, _, per2 = pipeline.average_k([r, r2], optics)
    np.testing.assert_allclose(mean2, 0.5 * (k1 + k2))
    assert set(per2) == {"a"}


def test_unmix_single_type():
    for i in range(3):
        rho = np.tile(0.35 * LIB3[i], (2, 1))
        B, q, e = pipeline.unmix_spectrum(rho, LIB3)
        assert q[i] > 0.95
        assert B[i] == pytest.approx(0.35, rel=0.02)
        assert e < 1e-8


def test_unmix_fifty_fifty():
    rho = np.tile(0.3 * (0.5 * LIB3[0] + 0.5 * LIB3[1]), (2, 1))
    B, q, e = pipeline.unmix_spectrum(rho, LIB3[:2])
    np.testing.assert_allclose(q, [0.5, 0.5], atol=0.1)
    np.testing.assert_allclose((B * q).sum(), 0.3, rtol=0.02)


def test_unmix_single_type_closed_form(rng):
    rho = rng.uniform(0.1, 0.4, (2, len(WIDE_BANDS)))
    B, q, _ = pipeline.unmix_spectrum(rho, LIB3[:1])
    proj = float(np.sum(rho * LIB3[0]) / (2 * np.sum(LIB3[0] ** 2)))
    assert B[0] == pytest.approx(proj, abs=1e-6)
    assert q[0] == 1.0


def test_unmix_rejects_nonfinite():
    from shoalmap.errors import NumericalError
    with pytest.raises(NumericalError):
        pipeline.unmix_spectrum(np.array([[np.inf] * len(WIDE_BANDS)]), LIB3)


def test_exhaustive_search():
    rho = np.tile(0.4 * LIB3[1], (2, 1))
    res = pipeline.exhaustive_bottom_search(rho, LIB3)
    assert len(res.evaluated) == 6
    assert res.indices == (1,)
    one = pipeline.exhaustive_bottom_search(rho, LIB3[:1])
    assert len(one.evaluated) == 1
    lib5 = np.vstack([LIB3, LIB3[:2] * 0.9 + 0.05])
    assert len(pipeline.exhaustive_bottom_search(rho, lib5).evaluated) == 5 + 10


def test_unmix_bottom_recovers_albedo():
    H = np.full((3, 3), 4.0)
    scene, truth = make_scene(H, B=(0.3,))
    ns = 1
    full = lambda v: np.full((ns, 3, 3), v)
    B, q, e = pipeline.unmix_bottom(full(0.05), full(0.06), full(0.014), full(0.0008), H, [scene],
                                    LIB3[:1], RunConfig(n_types=1), Y=np.array([1.2]))
    np.testing.assert_allclose(B[0], 0.3, rtol=1e-4)
    assert np.all(e < 1e-8)


def test_depth_error_zero_noise_and_determinism():
    scene, _ = make_scene(np.full((2, 3), 5.0), noise=0.0)
    cfg = RunConfig(radius=0, n_types=1, Y=1.2, use_lut=False)
    sigma, base = pipeline.depth_error_estimate([scene], 0.0, cfg, n_trials=3, seed=1)
    np.testing.assert_array_equal(sigma, 0.0)
    a, _ = pipeline.depth_error_estimate([scene], 2e-5, cfg, n_trials=3, seed=4, baseline=base)
    b, _ = pipeline.depth_error_estimate([scene], 2e-5, cfg, n_trials=3, seed=4, baseline=base)
    assert a.tobytes() == b.tobytes()
    assert np.all(a > 0)
    with pytest.raises(UsageError):
        pipeline.depth_error_estimate([scene], 0.0, cfg, n_trials=1)


def test_to_json_safe():
    out = pipeline.to_json_safe({"a": np.float64(np.nan), "b": np.arange(2), 3: (np.int64(4),)})
    assert out == {"a": None, "b": [0, 1], "3": [4]}
