"""Spectral-match and depth-continuity error metrics.

Spectra are stacked as (N_s, N_r, n_bands) arrays: scene, region pixel, band.
The combined metric is dimensionless internally; multiply by 100 for the
percent figure used by the lookup-table gates.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from shoalmap.errors import DegenerateSpectrumError, DomainError, UsageError


@dataclass(frozen=True)
class MetricWeights:
    w_spectral: float = 0.85
    w_depth: float = 0.15
    kappa: float = 0.1

    def __post_init__(self):
        if abs(self.w_spectral + self.w_depth - 1.0) > 1e-12:
            raise UsageError("metric weights must sum to 1")
        if self.w_spectral < 0.5 or self.w_depth < 0:
            raise UsageError("spectral weight must dominate (>= 0.5) and depth weight be >= 0")
        if self.kappa <= 0:
            raise UsageError("kappa must be positive")


def _stack(a):
    a = np.asarray(a, dtype=float)
    if a.ndim == 1:
        a = a[None, None, :]
    elif a.ndim == 2:
        a = a[None, :, :]
    return a


def _check(measured, modelled):
    if measured.shape != modelled.shape:
        raise UsageError(f"stack shapes differ: {measured.shape} vs {modelled.shape}")
    if not (np.all(np.isfinite(measured)) and np.all(np.isfinite(modelled))):
        raise DegenerateSpectrumError("non-finite spectra in stack")


def spectral_angle(x, y):
    """Angle between spectra along the last axis (radians).

    Evaluated as 2*atan2(|x^ - y^|, |x^ + y^|) on unit vectors, which equals
    arccos of the normalised dot product but keeps full precision near 0.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    nx = np.linalg.norm(x, axis=-1, keepdims=True)
    ny = np.linalg.norm(y, axis=-1, keepdims=True)
    if np.any(nx == 0) or np.any(ny == 0):
        raise DegenerateSpectrumError("zero-norm spectrum in spectral angle")
    ux, uy = x / nx, y / ny
    return 2.0 * np.arctan2(np.linalg.norm(ux - uy, axis=-1), np.linalg.norm(ux + uy, axis=-1))


def e_rms(measured, modelled):
    m, o = _stack(measured), _stack(modelled)
    _check(m, o)
    den = m.sum()
    if den <= 0:
        raise DegenerateSpectrumError("measured reflectance sums to zero")
    return float(np.sqrt(np.sum((o - m) ** 2)) / den)


def e_sam(measured, modelled):
    m, o = _stack(measured), _stack(modelled)
    _check(m, o)
    return float(np.mean(spectral_angle(o, m)))


def e_depth_continuity(H, kappa=0.1):
    H = np.asarray(H, dtype=float).ravel()
    if H.size < 1:
        raise UsageError("need at least one depth")
    mean = H.mean()
    if not mean > 0:
        raise DomainError(f"mean depth {mean} must be positive")
    dev = H - mean
    rel2 = np.where(np.abs(dev) > kappa * mean, (dev / mean) ** 2, 0.0)
    return float(np.sqrt(rel2.sum() / H.size))


def e_photic(measured, modelled, H, weights: MetricWeights = MetricWeights()):
    return (weights.w_spectral * e_rms(measured, modelled) * e_sam(measured, modelled)
            + weights.w_depth * e_depth_continuity(H, weights.kappa))


def e_unmixed(rho_unmixed, rho_modelled):
    """RMS-relative error times mean spectral angle over scenes.

    The angle factor is scale-blind, so ``rho_unmixed = c * rho_modelled``
    scores zero for any c > 0.
    """
    u = np.atleast_2d(np.asarray(rho_unmixed, dtype=float))
    m = np.atleast_2d(np.asarray(rho_modelled, dtype=float))
    if u.shape != m.shape:
        raise UsageError(f"shapes differ: {u.shape} vs {m.shape}")
    den = m.sum()
    if den <= 0:
        raise DegenerateSpectrumError("modelled albedo sums to zero")
    rms = np.sqrt(np.sum((u - m) ** 2)) / den
    return float(rms * np.mean(spectral_angle(u, m)))
