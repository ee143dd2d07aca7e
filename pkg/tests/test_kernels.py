"""The compiled and numpy kernels must agree to rounding."""

import numpy as np
import pytest

from shoalmap import _accel, kernels
from shoalmap.forward import BandOptics, band_optics
from shoalmap.spectral import BandSet

BANDS = BandSet((443, 483, 561, 655))


def _args(rng, ns=2, nr=9, nt=2):
    measured = rng.uniform(0.002, 0.02, (ns, nr, 4))
    lib = rng.uniform(0.3, 1.2, (nt, 4))
    return kernels.objective_args(measured, band_optics(BANDS), lib, np.full(ns, 0.015),
                                  rng.uniform(0.5, 2.0, ns), np.full(ns, 1.1), np.ones(ns),
                                  rng.uniform(-0.5, 0.5, ns))


def _x(rng, ns=2, nr=9, nt=2):
    wc = np.column_stack([rng.uniform(0.01, 0.2, ns), rng.uniform(0.01, 0.2, ns),
                          rng.uniform(0.001, 0.05, ns), rng.uniform(-0.001, 0.002, ns)]).ravel()
    return np.concatenate([wc, rng.uniform(1.0, 20.0, nr), rng.uniform(0.05, 0.6, nt * nr),
                           rng.uniform(0.01, 1.0, nt * nr)])


@pytest.mark.parametrize("ns,nr,nt", [(1, 1, 1), (2, 9, 2), (3, 25, 3)])
def test_region_and_objective_agree(rng, ns, nr, nt):
    args = _args(rng, ns, nr, nt)
    for _ in range(5):
        x = _x(rng, ns, nr, nt)
        assert x.size == kernels.n_params(ns, nr, nt)
        np.testing.assert_allclose(kernels.region_rrs_numba(x, args),
                                   kernels.region_rrs_numpy(x, args), rtol=1e-12, atol=1e-16)
        assert kernels.objective_numba(x, args) == pytest.approx(kernels.objective_numpy(x, args),
                                                                 rel=1e-10, abs=1e-18)


def test_unmix_objective_agree(rng):
    for nt in (1, 2, 3):
        target = rng.uniform(0.1, 0.5, (2, 4))
        lib = rng.uniform(0.3, 1.2, (nt, 4))
        x = np.concatenate([rng.uniform(0.1, 0.6, nt), rng.uniform(0.05, 1.0, nt)])
        assert kernels.unmix_objective_numba(x, (target, lib)) == pytest.approx(
            kernels.unmix_objective_numpy(x, (target, lib)), rel=1e-10, abs=1e-18)


def test_lut_search_agree(rng):
    keys = rng.uniform(0.1, 1.0, (32, 2, 4))
    keys /= np.linalg.norm(keys, axis=-1, keepdims=True)
    q = keys[17] * (1 + 1e-6 * rng.normal(size=(2, 4)))
    q /= np.linalg.norm(q, axis=-1, keepdims=True)
    i1, a1 = kernels.lut_search_numba(keys, 20, q)
    i2, a2 = kernels.lut_search_numpy(keys, 20, q)
    assert i1 == i2 == 17
    assert a1 == pytest.approx(a2, rel=1e-9, abs=1e-15)
    assert kernels.lut_search_numpy(keys, 0, q) == (-1, np.inf)
    assert kernels.lut_search_numba(keys, 0, q)[0] == -1


def test_dispatch_matches_flag():
    if _accel.USE_NUMBA:
        assert kernels.objective is kernels.objective_numba
    else:
        assert kernels.objective is kernels.objective_numpy


def test_objective_zero_at_exact_model(rng):
    args = list(_args(rng, 2, 9, 2))
    x = _x(rng)
    x[8:17] = 10.0  # uniform depth, no continuity penalty
    args[0] = kernels.region_rrs_numpy(x, tuple(args))
    assert kernels.objective_numpy(x, tuple(args)) == 0.0
    # the compiled model rounds differently from the one that made the data
    assert kernels.objective_numba(x, tuple(args)) < 1e-25
