"""Log-linear empirical depth from soundings.

Depth is modelled as ``h0 - sum_i h_i * log(r(l_i) - r_inf(l_i))`` in
subsurface reflectance, fitted against soundings with a weighted relative
RMS error that down-weights frequently occurring depths.
"""

from __future__ import annotations

import logging
import math
import warnings
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from shoalmap.errors import DomainError, FitError, UsageError
from shoalmap.forward import surface_to_subsurface
from shoalmap.optimizer import Bounds, SimplexConfig, multi_start_minimize
from shoalmap.scene import Scene
from shoalmap.soundings import SoundingSet
from shoalmap.spectral import BandSet, Spectrum

log = logging.getLogger(__name__)

WEIGHT_FLOOR = 1e-3
MIN_DEEP_PIXELS = 30
# bands at or below this wavelength feed the fit unless chosen explicitly
DEFAULT_MAX_WAVELENGTH = 620.0

# Two-water-type diffuse attenuation stub (1/m), clear oceanic and turbid
# coastal.  Only used to seed starting points for the fit.
_JERLOV_NM = np.array([400.0, 450.0, 500.0, 550.0, 600.0, 650.0, 700.0, 750.0])
_JERLOV_K = {
    "oceanic_I": np.array([0.028, 0.019, 0.027, 0.063, 0.235, 0.36, 0.56, 2.5]),
    "coastal_1": np.array([0.20, 0.112, 0.088, 0.081, 0.255, 0.39, 0.59, 2.6]),
}


@dataclass(frozen=True)
class DeepWaterStats:
    """Subsurface reflectance of optically deep water: per-band mean and spread."""

    mean: Spectrum
    stddev: Spectrum
    n_pixels: int = 0


@dataclass(frozen=True)
class EmpiricalCoefficients:
    h: np.ndarray  # [h0, h_1 .. h_n]
    fit_error: float
    band_indices: tuple
    n_soundings: int = 0

    def __post_init__(self):
        if not np.all(np.isfinite(self.h)):
            raise FitError("empirical coefficients are not finite")
        if len(self.h) != len(self.band_indices) + 1:
            raise UsageError("need one coefficient per band plus an intercept")


def _subsurface(pixels):
    return surface_to_subsurface(np.asarray(pixels, dtype=float), 0.0)


def deep_water_stats(scene: Scene, deep_mask) -> DeepWaterStats:
    mask = np.asarray(deep_mask, dtype=bool).reshape(-1) & scene.valid_mask().reshape(-1)
    n = int(mask.sum())
    if n == 0:
        raise UsageError("deep-water mask selects no valid pixels")
    if n < MIN_DEEP_PIXELS:
        log.warning("deep-water statistics from only %d pixels", n)
    r = _subsurface(scene.pixels()[mask])
    return DeepWaterStats(Spectrum(scene.bands, r.mean(axis=0)),
                          Spectrum(scene.bands, r.std(axis=0)), n)


def attenuation_ratio(r: Spectrum, r_inf: Spectrum, blue=490.0, green=550.0) -> float:
    """k(blue)/k(green) estimated from log reflectance above deep water."""
    db = r.at(blue) - r_inf.at(blue)
    dg = r.at(green) - r_inf.at(green)
    if db <= 0 or dg <= 0:
        raise DomainError("no shallow-water signal above deep water in blue or green")
    den = math.log(dg)
    if den == 0.0:
        raise DomainError("green log signal is zero")
    return math.log(db) / den


def jerlov_attenuation(ratio, wavelengths):
    """Attenuation at ``wavelengths`` interpolated between the two stub water
    types by their blue/green ratio (clamped to the table)."""
    lam = np.asarray(wavelengths, dtype=float)
    k_o, k_c = _JERLOV_K["oceanic_I"], _JERLOV_K["coastal_1"]
    ro = np.interp(490.0, _JERLOV_NM, k_o) / np.interp(550.0, _JERLOV_NM, k_o)
    rc = np.interp(490.0, _JERLOV_NM, k_c) / np.interp(550.0, _JERLOV_NM, k_c)
    t = float(np.clip((ratio - ro) / (rc - ro), 0.0, 1.0))
    return np.interp(lam, _JERLOV_NM, (1.0 - t) * k_o + t * k_c)


def sounding_weights(depths, floor=WEIGHT_FLOOR) -> np.ndarray:
    """Anti-clustering weights ``1 - W_i / max(W)`` with
    ``W_i = sum_j exp(-(s_i - s_j)^2)``, floored at ``floor``.

    Identical or mutually distant soundings leave every weight at the floor;
    ``fit_empirical`` then falls back to uniform weights.
    """
    s = np.asarray(depths, dtype=float).ravel()
    if s.size < 2:
        raise UsageError("sounding weights need at least two soundings")
    W = np.exp(-(s[:, None] - s[None, :]) ** 2).sum(axis=1)
    return np.maximum(1.0 - W / W.max(), floor)


def fit_weights(depths):
    """Sounding weights for a fit: uniform when every weight sits at the floor,
    since the weighted error would otherwise rest on the floor value alone."""
    w = sounding_weights(depths)
    return np.ones_like(w) if np.all(w <= WEIGHT_FLOOR) else w


def weighted_relative_rms(predicted, truth, weights):
    p, s, w = (np.asarray(v, dtype=float) for v in (predicted, truth, weights))
    return math.sqrt(float(np.sum(w * ((p - s) / s) ** 2) / np.sum(w)))


def default_band_indices(bands: BandSet):
    idx = tuple(i for i, c in enumerate(bands.centers) if c <= DEFAULT_MAX_WAVELENGTH)
    return idx if len(idx) >= 2 else tuple(range(len(bands)))


def log_signal(pixels, r_inf, band_indices):
    """log(r - r_inf) over the chosen bands; NaN where the argument is <= 0.

    ``pixels`` are surface reflectances (..., n_bands); ``r_inf`` is subsurface.
    """
    r = _subsurface(pixels)[..., list(band_indices)]
    d = r - np.asarray(r_inf, dtype=float)[list(band_indices)]
    with np.errstate(divide="ignore", invalid="ignore"):
        return np.where(d > 0, np.log(np.where(d > 0, d, 1.0)), np.nan)


def _predict(h, L):
    return h[0] - L @ h[1:]


def fit_empirical(scene: Scene, stats: DeepWaterStats, soundings: SoundingSet,
                  cfg: SimplexConfig = SimplexConfig(), band_indices: Sequence[int] | None = None,
                  n_random_starts: int = 4) -> EmpiricalCoefficients:
    """Fit the log-linear depth model against soundings on one scene.

    Soundings are datum depths; the scene's tide offset is added before the
    fit so the coefficients predict depth at acquisition time.
    """
    if band_indices is None:
        band_indices = default_band_indices(scene.bands)
    band_indices = tuple(int(i) for i in band_indices)
    n = len(band_indices)
    r, c, inside = soundings.pixel_indices(scene.metadata, scene.height, scene.width)
    valid = scene.valid_mask()
    ok = inside.copy()
    ok[inside] &= valid[r[inside], c[inside]]
    px = np.full((len(soundings), len(scene.bands)), np.nan)
    px[ok] = scene.data[:, r[ok], c[ok]].T
    L = log_signal(px, stats.mean.values, band_indices)
    ok &= np.all(np.isfinite(L), axis=1)
    s = soundings.depths + scene.metadata.tide_offset
    ok &= s > 0
    if ok.sum() < n + 2:
        raise FitError(f"only {int(ok.sum())} usable soundings for {n} bands (need {n + 2})")
    L, s = L[ok], s[ok]
    w = fit_weights(s)

    def err(h):
        return weighted_relative_rms(_predict(h, L), s, w)

    # weighted least squares is exact for this linear model; it seeds the simplex
    A = np.column_stack([np.ones(len(s)), -L])
    sw = np.sqrt(w) / s
    h_lsq = np.linalg.lstsq(A * sw[:, None], s * sw, rcond=None)[0]
    starts = [h_lsq]
    try:
        mid = np.median(np.exp(L), axis=0)
        lam = np.asarray(scene.bands.centers)[list(band_indices)]
        blue, green = int(np.argmin(np.abs(lam - 490.0))), int(np.argmin(np.abs(lam - 550.0)))
        if blue != green and mid[green] < 1.0 and mid[green] != 1.0:
            k = jerlov_attenuation(math.log(mid[blue]) / math.log(mid[green]), lam)
            hk = 1.0 / (n * k)
            starts.append(np.concatenate([[np.average(s + L @ hk, weights=w)], hk]))
    except (FloatingPointError, ValueError, ZeroDivisionError):
        pass
    scale = max(10.0 * float(np.max(np.abs(np.vstack(starts)))), 1.0)
    bounds = Bounds(np.full(n + 1, -scale), np.full(n + 1, scale))
    rng = np.random.default_rng(cfg.rng_seed)
    for _ in range(n_random_starts):
        starts.append(bounds.clip(h_lsq + rng.normal(0.0, 0.1, n + 1) * (np.abs(h_lsq) + 1e-3)))
    res = multi_start_minimize(err, starts, bounds, cfg, randomize=True)
    h = res.x if res.fun <= err(h_lsq) else h_lsq
    return EmpiricalCoefficients(np.asarray(h, dtype=float), float(err(h)), band_indices, int(ok.sum()))


def empirical_depth(c: EmpiricalCoefficients, r, stats: DeepWaterStats):
    """Depth for a surface spectrum (``Spectrum`` or array (..., n_bands)); NaN
    where any log argument is not positive."""
    values = r.values if isinstance(r, Spectrum) else np.asarray(r, dtype=float)
    L = log_signal(values, stats.mean.values, c.band_indices)
    out = _predict(np.asarray(c.h), L)
    return float(out) if np.ndim(out) == 0 else out


def empirical_depth_raster(c: EmpiricalCoefficients, scene: Scene, stats: DeepWaterStats):
    """(h, w) acquisition-time depth; NaN on invalid or deep pixels."""
    H = empirical_depth(c, scene.pixels(), stats).reshape(scene.shape)
    H[~scene.valid_mask()] = np.nan
    return H


def synthesize_depths(per_scene, fit_errors=None, tides=None, mode="median"):
    """Combine acquisition-time depth rasters into one datum depth raster.

    ``mode`` is "median" (temporal median) or "weighted" (mean weighted by
    1/fit_error).
    """
    if len(per_scene) == 0 or len({np.shape(d) for d in per_scene}) != 1:
        raise UsageError("depth rasters must share one shape")
    stack = np.asarray([np.asarray(d, dtype=float) for d in per_scene])
    if stack.ndim < 2:
        raise UsageError("depth rasters must be at least 1-D")
    ns = stack.shape[0]
    tides = np.zeros(ns) if tides is None else np.asarray(tides, dtype=float)
    if tides.shape != (ns,):
        raise UsageError(f"need {ns} tide offsets, got {tides.size}")
    datum = stack - tides.reshape((ns,) + (1,) * (stack.ndim - 1))
    if mode == "median":
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", RuntimeWarning)
            return np.nanmedian(datum, axis=0)
    if mode != "weighted":
        raise UsageError(f"unknown synthesis mode {mode!r}")
    if fit_errors is None or len(fit_errors) != ns:
        raise UsageError("weighted synthesis needs one fit error per scene")
    e = np.asarray(fit_errors, dtype=float)
    w = np.where(e > 0, 1.0 / np.where(e > 0, e, 1.0), 0.0)
    if np.any(e <= 0):
        w = (e <= 0).astype(float)
    w = w.reshape(datum.shape[:1] + (1,) * (datum.ndim - 1))
    good = np.isfinite(datum)
    num = np.where(good, datum * w, 0.0).sum(axis=0)
    den = np.where(good, w, 0.0).sum(axis=0)
    with np.errstate(invalid="ignore", divide="ignore"):
        return np.where(den > 0, num / den, np.nan)
