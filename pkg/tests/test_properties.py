import math
from itertools import combinations

import numpy as np
from hypothesis import assume, given, settings
from hypothesis import strategies as st

from shoalmap import engine, forward, kernels, metrics, pipeline
from shoalmap.empirical import sounding_weights
from shoalmap.engine import DynamicLut, ModelFit, Region

finite = st.floats(0.1, 50.0, allow_nan=False)
small = st.integers(1, 10)


def brute_weighted_median(v, w):
    # smallest value whose cumulative weight reaches half the total
    pairs = sorted(zip(v, w), key=lambda t: t[0])
    half = 0.5 * sum(w)
    acc = 0.0
    for x, wi in pairs:
        acc += wi
        if acc >= half:
            return x
    return pairs[-1][0]


@given(st.lists(st.tuples(finite, st.floats(0.01, 10.0)), min_size=1, max_size=10))
def test_weighted_median_matches_brute_force(items):
    v, w = zip(*items)
    assert pipeline.weighted_median(v, w) == brute_weighted_median(v, w)


@given(st.lists(finite, min_size=2, max_size=10))
def test_sounding_weights_match_brute_force(s):
    n = len(s)
    W = [sum(math.exp(-(s[i] - s[j]) ** 2) for j in range(n)) for i in range(n)]
    M = max(W)
    expect = [max(1.0 - Wi / M, 1e-3) for Wi in W]
    np.testing.assert_allclose(sounding_weights(s), expect, rtol=1e-12, atol=1e-15)


@given(st.lists(st.floats(1e-4, 1.0), min_size=2, max_size=8), st.floats(1e-3, 1e3))
def test_sam_scale_invariant(x, c):
    x = np.array(x)
    assert metrics.spectral_angle(x, c * x) <= 1e-12


@given(st.lists(st.floats(1e-4, 1.0), min_size=3, max_size=3),
       st.lists(st.floats(1e-4, 1.0), min_size=3, max_size=3))
def test_sam_symmetric_and_bounded(x, y):
    a = metrics.spectral_angle(np.array(x), np.array(y))
    assert a == metrics.spectral_angle(np.array(y), np.array(x))
    assert 0.0 <= a <= math.pi / 2 + 1e-12


@given(st.lists(st.floats(0.5, 40.0), min_size=1, max_size=25), st.floats(0.1, 10.0))
def test_depth_continuity_scale_free(H, c):
    e = metrics.e_depth_continuity(H)
    assert e >= 0.0
    assert math.isclose(metrics.e_depth_continuity(np.array(H) * c), e, rel_tol=1e-9, abs_tol=1e-12)


@given(st.floats(-0.02, 0.3), st.floats(-0.005, 0.01))
def test_surface_round_trip(r, d):
    R = forward.subsurface_to_surface(r, d)
    assert math.isclose(forward.surface_to_subsurface(R, d), r, rel_tol=1e-9, abs_tol=1e-15)


@given(st.integers(1, 4), st.sampled_from([1, 9, 25]), st.integers(1, 3), st.integers(0, 2 ** 32 - 1))
@settings(max_examples=30)
def test_pack_unpack_round_trip(ns, nr, nt, seed):
    rng = np.random.default_rng(seed)
    f = ModelFit(*(rng.random(ns) for _ in range(4)), rng.random(nr), rng.random((nt, nr)),
                 rng.random((nt, nr)))
    v = engine.pack(f)
    assert v.size == nr + 2 * nt * nr + 4 * ns
    g = engine.unpack(v, ns, nr, nt)
    np.testing.assert_array_equal(engine.pack(g), v)


@given(st.integers(1, 7), st.integers(1, 4))
def test_combination_count(n, m):
    expect = sum(math.comb(n, k) for k in range(1, min(n, m) + 1))
    combos = pipeline.scene_combinations(n, m)
    assert len(combos) == expect == len(set(combos))


@given(st.lists(st.floats(0.0, 0.6), min_size=2, max_size=3), st.integers(0, 2 ** 32 - 1))
def test_canonical_form_keeps_mixture(B, seed):
    B = np.array(B)
    q = np.random.default_rng(seed).uniform(0.01, 2.0, B.size)
    lib = np.random.default_rng(seed + 1).uniform(0.2, 1.5, (B.size, 5))
    Bc, qc = pipeline._canonical(B, q)
    assert math.isclose(qc.sum(), 1.0, rel_tol=1e-12)
    np.testing.assert_allclose((Bc * qc) @ lib / qc.sum(), (B * q) @ lib / q.sum(), atol=1e-14)


@given(st.integers(0, 2 ** 32 - 1))
@settings(max_examples=25)
def test_rescale_never_worse(seed):
    rng = np.random.default_rng(seed)
    lib = rng.uniform(0.2, 1.5, (2, 5))
    target = rng.uniform(0.05, 0.6, (2, 5))
    B, q = rng.uniform(0.05, 0.6, 2), rng.uniform(0.01, 1.0, 2)
    before = kernels.unmix_objective_numpy(np.concatenate([B, q]), (target, lib))
    after = kernels.unmix_objective_numpy(
        np.concatenate([pipeline._rescale(B, q, lib, target), q]), (target, lib))
    assert after <= before * (1 + 1e-12) + 1e-18


@given(st.integers(1, 300), st.integers(0, 2 ** 32 - 1))
@settings(max_examples=20)
def test_lut_capacity_and_exact_hit(n, seed):
    rng = np.random.default_rng(seed)
    lut = DynamicLut(2, 4, capacity=64)
    fit = ModelFit(*(np.full(2, 0.05) for _ in range(4)), np.ones(1), np.ones((1, 1)), np.ones((1, 1)),
                   e_photic=0.1)
    last = None
    for _ in range(n):
        last = Region(0, np.array([0]), rng.uniform(0.001, 0.02, (2, 1, 4)), np.zeros(2))
        lut.insert(last, fit)
    assert len(lut) == min(n, 64)
    got, ang = lut.query(last)
    assert got is not None and ang < 1e-12


@given(st.floats(0.1, 60.0), st.integers(1, 6), st.integers(1, 6))
def test_median_filter_constant(c, h, w):
    np.testing.assert_array_equal(pipeline.median_filter(np.full((h, w), c), 3), c)


@given(st.floats(0.001, 0.5), st.floats(0.001, 1.0), st.floats(1e-4, 0.2), st.floats(0.0, 40.0),
       st.floats(0.0, 0.6))
@settings(max_examples=50)
def test_forward_between_limits(P, G, X, H, B):
    # r is a convex combination of r_inf and rho/pi weighted by the attenuations,
    # so it stays within [0, max(r_inf, rho/pi)]
    lam = np.array([443.0, 561.0, 655.0])
    w = forward.WaterColumn(P, G, X, Y=1.0)
    lib = np.ones((1, 3))
    r = forward.subsurface_rrs(w, forward.BottomState((B,), (1.0,)), H, forward.Geometry(), lib, lam)
    _, _, _, u = forward.total_iops(w, lam)
    top = np.maximum(forward.deep_water_rrs(u), B / np.pi)
    assert np.all(r >= 0) and np.all(r <= top + 1e-15)


@given(st.floats(0.5, 40.0), st.lists(st.floats(-0.0999, 0.0999), min_size=1, max_size=20))
def test_depth_gate_ignores_small_spread(m, rel):
    # every depth within kappa of the mean contributes nothing
    rel = np.array(rel)
    H = m * (1 + rel - rel.mean())
    assume(np.all(np.abs(H - H.mean()) <= 0.1 * H.mean() * (1 - 1e-9)))
    assert metrics.e_depth_continuity(H) == 0.0


@given(st.integers(0, 2 ** 32 - 1), st.floats(0.05, 1.0))
def test_hot_start_refused_for_distant_spectra(seed, ang):
    # build a second spectrum rotated by `ang` rad away from the first
    rng = np.random.default_rng(seed)
    a = rng.uniform(0.1, 1.0, 4)
    a /= np.linalg.norm(a)
    o = rng.normal(size=4)
    o -= (o @ a) * a
    assume(np.linalg.norm(o) > 1e-6)
    o /= np.linalg.norm(o)
    b = math.cos(ang) * a + math.sin(ang) * o
    ra = Region(0, np.array([0]), a.reshape(1, 1, 4), np.zeros(1))
    rb = Region(1, np.array([1]), b.reshape(1, 1, 4), np.zeros(1))
    assert not engine.should_hot_start(ra, rb, 2e-3)
    assert engine.should_hot_start(ra, ra, 2e-3)


@given(st.permutations(range(3)), st.integers(0, 2 ** 32 - 1))
def test_bottom_mix_order_free(perm, seed):
    rng = np.random.default_rng(seed)
    B, q, lib = rng.uniform(0, 0.6, 3), rng.uniform(0.01, 5, 3), rng.uniform(0.1, 1.5, (3, 4))
    p = list(perm)
    a = forward.bottom_albedo_mix(forward.BottomState(tuple(B), tuple(q)), lib, None)
    b = forward.bottom_albedo_mix(forward.BottomState(tuple(B[p]), tuple(q[p])), lib[p], None)
    np.testing.assert_allclose(a, b, rtol=1e-13)


@given(st.integers(2, 5), st.integers(0, 2 ** 32 - 1))
@settings(max_examples=25)
def test_minimizer_stays_in_box(n, seed):
    from shoalmap.optimizer import Bounds, SimplexConfig, minimize
    rng = np.random.default_rng(seed)
    lo = rng.uniform(-2, 0, n)
    hi = lo + rng.uniform(0.5, 3, n)
    target = rng.uniform(-5, 5, n)  # often outside the box
    b = Bounds(lo, hi)
    r = minimize(lambda x: float(((x - target) ** 2).sum()), b.clip(np.zeros(n)), b,
                 SimplexConfig(max_iterations=2000, restarts=3))
    assert b.contains(r.x)
    np.testing.assert_allclose(r.x, np.clip(target, lo, hi), atol=1e-3)
