import math

import numpy as np
import pytest

from empirical_oracle import BANDS, R_INF, oracle_scene
from shoalmap import empirical as emp
from shoalmap.empirical import DeepWaterStats, EmpiricalCoefficients
from shoalmap.errors import DomainError, FitError, UsageError
from shoalmap.scene import Scene
from shoalmap.soundings import SoundingSet
from shoalmap.spectral import BandSet, Spectrum


def _r(values):
    return Spectrum(BandSet((490.0, 550.0)), np.asarray(values, dtype=float))


def test_deep_stats_constant():
    sc = Scene(np.full((2, 3, 3), 0.004), BandSet((443, 561)))
    st = emp.deep_water_stats(sc, np.ones((3, 3), bool))
    r = 2 * 0.004 / (1 + 3 * 0.004)
    np.testing.assert_allclose(st.mean.values, r, rtol=1e-6)
    np.testing.assert_allclose(st.stddev.values, 0.0, atol=1e-12)


def test_deep_stats_population_std():
    from shoalmap.forward import subsurface_to_surface
    data = subsurface_to_surface(np.array([[[1e-3, 3e-3]]]), 0.0)
    sc = Scene(data, BandSet((443,)))
    st = emp.deep_water_stats(sc, np.ones((1, 2), bool))
    assert st.mean.values[0] == pytest.approx(2e-3, rel=1e-6)
    assert st.stddev.values[0] == pytest.approx(1e-3, rel=1e-5)


def test_deep_stats_single_and_empty(caplog):
    sc = Scene(np.arange(4, dtype=float).reshape(1, 2, 2) * 1e-3 + 1e-3, BandSet((443,)))
    m = np.zeros((2, 2), bool)
    m[1, 0] = True
    st = emp.deep_water_stats(sc, m)
    assert st.stddev.values[0] == 0.0 and st.n_pixels == 1
    assert "only 1 pixels" in caplog.text
    with pytest.raises(UsageError):
        emp.deep_water_stats(sc, np.zeros((2, 2), bool))


def test_attenuation_ratio():
    e = math.e
    assert emp.attenuation_ratio(_r([1 / e, 1 / e]), _r([0, 0])) == pytest.approx(1.0)
    assert emp.attenuation_ratio(_r([e ** -2, 1 / e]), _r([0, 0])) == pytest.approx(2.0)
    with pytest.raises(DomainError):
        emp.attenuation_ratio(_r([0.01, 0.02]), _r([0.02, 0.01]))


def test_sounding_weights_examples():
    w = emp.sounding_weights([5.0, 5.0, 20.0])
    np.testing.assert_allclose(w, [1e-3, 1e-3, 0.5], atol=1e-12)
    np.testing.assert_array_equal(emp.sounding_weights([7.0] * 4), 1e-3)
    far = emp.sounding_weights([1.0, 11.0, 21.0, 31.0])
    np.testing.assert_array_equal(far, 1e-3)
    np.testing.assert_array_equal(emp.fit_weights([1.0, 11.0, 21.0, 31.0]), 1.0)
    with pytest.raises(UsageError):
        emp.sounding_weights([3.0])


def test_fit_recovers_oracle_depths():
    sc, stats, snd, H = oracle_scene()
    c = emp.fit_empirical(sc, stats, snd)
    Hp = emp.empirical_depth_raster(c, sc, stats)
    assert np.sqrt(np.mean(((Hp - H) / H) ** 2)) < 1e-3
    assert c.fit_error < 1e-3
    assert c.n_soundings == 40


def test_fit_with_tide():
    sc, stats, snd, H = oracle_scene(seed=4, tide=0.7)
    c = emp.fit_empirical(sc, stats, snd)
    Hp = emp.empirical_depth_raster(c, sc, stats)
    # acquisition-time depth; the datum depth is recovered after subtracting the tide
    datum = emp.synthesize_depths([Hp], tides=[0.7])
    assert np.sqrt(np.mean(((datum - H) / H) ** 2)) < 1e-3


def test_fit_degenerate_constant_depth():
    from shoalmap.forward import subsurface_to_surface
    r = R_INF[:, None, None] + np.array([0.05, 0.06, 0.04])[:, None, None] * np.ones((3, 5, 5))
    sc = Scene(subsurface_to_surface(r, 0.0), BANDS)
    stats = DeepWaterStats(Spectrum(BANDS, R_INF), Spectrum(BANDS, np.zeros(3)))
    snd = SoundingSet.from_pixels(np.arange(5), np.arange(5), np.full(5, 8.0))
    c = emp.fit_empirical(sc, stats, snd)
    assert c.fit_error < 1e-6


def test_fit_too_few_soundings():
    sc, stats, _, H = oracle_scene()
    snd = SoundingSet.from_pixels([0, 1], [0, 1], H[[0, 1], [0, 1]])
    with pytest.raises(FitError):
        emp.fit_empirical(sc, stats, snd)


def test_empirical_depth_examples():
    bands = BandSet((443.0, 561.0))
    stats = DeepWaterStats(Spectrum(bands, [0.0, 0.0]), Spectrum(bands, [0.0, 0.0]))
    c = EmpiricalCoefficients(np.array([0.0, 1.0, 0.0]), 0.0, (0, 1))
    from shoalmap.forward import subsurface_to_surface
    R = subsurface_to_surface(np.array([math.exp(-5.0), 0.3]), 0.0)
    assert emp.empirical_depth(c, R, stats) == pytest.approx(5.0, abs=1e-12)
    c0 = EmpiricalCoefficients(np.array([4.2, 0.0, 0.0]), 0.0, (0, 1))
    assert emp.empirical_depth(c0, R, stats) == pytest.approx(4.2)
    assert math.isnan(emp.empirical_depth(c, np.array([0.0, 0.3]), stats))


def test_synthesize_depths():
    a = np.array([[10.0, 4.0]])
    np.testing.assert_array_equal(emp.synthesize_depths([a], tides=[0.5]), a - 0.5)
    stack = [np.array([10.0]), np.array([11.0]), np.array([30.0])]
    assert emp.synthesize_depths(stack)[0] == 11.0
    got = emp.synthesize_depths([np.array([10.0]), np.array([12.0])], [0.1, 0.1], mode="weighted")
    assert got[0] == pytest.approx(11.0)
    with pytest.raises(UsageError):
        emp.synthesize_depths([np.zeros(2), np.zeros(3)])
    with pytest.raises(UsageError):
        emp.synthesize_depths([np.zeros(2)], tides=[0.0, 1.0])
