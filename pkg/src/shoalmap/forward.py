"""Semi-analytical shallow-water reflectance model.

All functions broadcast over numpy arrays of wavelength (nm).  Depth-resolved
reflectance combines a water-column term and an attenuated bottom term; the
surface value adds a spectrally flat offset.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Mapping, NamedTuple

import numpy as np

from shoalmap import spectral
from shoalmap.errors import DegenerateSpectrumError, DomainError
from shoalmap.spectral import BandSet, LookupCurve, Spectrum

WATER_REFRACTIVE_INDEX = 1.34
DEFAULT_S = 0.015
S_RANGE = (0.011, 0.021)


@dataclass(frozen=True)
class WaterColumn:
    P: float
    G: float
    X: float
    delta: float = 0.0
    S: float = DEFAULT_S
    Y: float = 1.0

    def __post_init__(self):
        if not (self.P > 0 and self.G > 0 and self.X > 0):
            raise DomainError(f"P, G, X must be positive, got {self.P}, {self.G}, {self.X}")
        if not (S_RANGE[0] <= self.S <= S_RANGE[1]):
            raise DomainError(f"S={self.S} outside {S_RANGE}")
        if not math.isfinite(self.Y):
            raise DomainError("Y must be finite")


@dataclass(frozen=True)
class BottomState:
    B: tuple
    q: tuple

    def __post_init__(self):
        B = tuple(float(v) for v in np.atleast_1d(self.B))
        q = tuple(float(v) for v in np.atleast_1d(self.q))
        if len(B) != len(q):
            raise DomainError("B and q need one entry per bottom type")
        if any(v < 0 for v in B) or any(v < 0 for v in q):
            raise DomainError("B and q must be non-negative")
        if sum(q) <= 0:
            raise DomainError("bottom mixing fractions sum to zero")
        object.__setattr__(self, "B", B)
        object.__setattr__(self, "q", q)


@dataclass(frozen=True)
class Geometry:
    """Subsurface sun zenith and view angles (radians)."""

    theta_sun: float = 0.0
    theta_view: float = 0.0

    def __post_init__(self):
        for v in (self.theta_sun, self.theta_view):
            if not (0.0 <= v < math.pi / 2):
                raise DomainError(f"subsurface angle {v} outside [0, pi/2)")

    @classmethod
    def from_sun_elevation(cls, elevation_deg, view_zenith_deg=0.0, n=WATER_REFRACTIVE_INDEX):
        """Refract above-surface angles into the water (Snell)."""
        if not (0.0 < elevation_deg <= 90.0):
            raise DomainError(f"sun elevation {elevation_deg} outside (0, 90]")
        zen = math.radians(90.0 - elevation_deg)
        view = math.radians(view_zenith_deg)
        return cls(math.asin(math.sin(zen) / n), math.asin(math.sin(view) / n))

    @property
    def inv_cos_sun(self):
        return 1.0 / math.cos(self.theta_sun)

    @property
    def inv_cos_view(self):
        return 1.0 / math.cos(self.theta_view)


class BandOptics(NamedTuple):
    """Tabulated optical constants sampled at each band center."""

    wavelengths: np.ndarray
    a_w: np.ndarray
    b_bw: np.ndarray
    a0: np.ndarray
    a1: np.ndarray


def band_optics(bands) -> BandOptics:
    lam = bands.array if isinstance(bands, BandSet) else np.asarray(bands, dtype=float)
    return BandOptics(
        lam,
        spectral.value_at(spectral.pure_water_absorption(), lam),
        spectral.value_at(spectral.pure_water_backscatter(), lam),
        spectral.value_at(spectral.phyto_a0(), lam),
        spectral.value_at(spectral.phyto_a1(), lam),
    )


def absorption_phi(P, wavelength):
    if np.any(np.asarray(P) <= 0):
        raise DomainError(f"phytoplankton absorption needs P > 0, got {P}")
    a0 = spectral.value_at(spectral.phyto_a0(), wavelength)
    a1 = spectral.value_at(spectral.phyto_a1(), wavelength)
    return (a0 + a1 * np.log(P)) * P


def absorption_gelbstoff(G, wavelength, S=DEFAULT_S):
    return G * np.exp(-S * (np.asarray(wavelength, dtype=float) - 440.0))


def Y_from_chi(chi):
    return 3.44 * (1.0 - 3.17 * np.exp(-2.01 * chi))


def estimate_Y(R: Spectrum, eps=1e-12):
    """Particle backscatter exponent from a surface reflectance spectrum."""
    r440, r490, r750 = R.at(440.0), R.at(490.0), R.at(750.0)
    den = r490 - r750
    if abs(den) < eps:
        raise DegenerateSpectrumError("R(490) - R(750) vanishes; cannot estimate Y")
    return float(Y_from_chi((r440 - r750) / den))


def backscatter_particles(X, wavelength, Y):
    return X * (440.0 / np.asarray(wavelength, dtype=float)) ** Y


def total_iops(w: WaterColumn, wavelength):
    """Return (a, b_b, k, u) at ``wavelength``."""
    lam = np.asarray(wavelength, dtype=float)
    a = (spectral.value_at(spectral.pure_water_absorption(), lam)
         + absorption_phi(w.P, lam) + absorption_gelbstoff(w.G, lam, w.S))
    bb = spectral.value_at(spectral.pure_water_backscatter(), lam) + backscatter_particles(w.X, lam, w.Y)
    k = a + bb
    return a, bb, k, bb / k


def deep_water_rrs(u):
    return 0.084 * u + 0.170 * u * u


def path_elongation(u):
    return 1.03 * np.sqrt(1.0 + 2.4 * u), 1.04 * np.sqrt(1.0 + 5.4 * u)


def _library_values(library, wavelength):
    if isinstance(library, Mapping):
        return np.array([spectral.value_at(c, wavelength) for c in library.values()])
    if isinstance(library, LookupCurve):
        return np.array([spectral.value_at(library, wavelength)])
    return np.asarray(library, dtype=float)


def bottom_albedo_mix(b: BottomState, library, wavelength):
    """Mix library albedos: sum(B_i q_i rho_i) / sum(q_i).

    ``library`` is a mapping of normalised curves (evaluated at
    ``wavelength``) or a pre-sampled (N_b, ...) array.
    """
    rho = _library_values(library, wavelength)
    B = np.asarray(b.B)
    q = np.asarray(b.q)
    if rho.shape[0] != B.size:
        raise DomainError(f"{B.size} bottom parameters for {rho.shape[0]} library spectra")
    qs = q.sum()
    if qs <= 0:
        raise DomainError("bottom mixing fractions sum to zero")
    w = (B * q / qs).reshape((-1,) + (1,) * (rho.ndim - 1))
    return (w * rho).sum(axis=0)


def _attenuation_terms(w, H, g, wavelength):
    _, _, k, u = total_iops(w, wavelength)
    dc, db = path_elongation(u)
    kc = (g.inv_cos_sun + dc * g.inv_cos_view) * k
    kb = (g.inv_cos_sun + db * g.inv_cos_view) * k
    return deep_water_rrs(u), np.exp(-kc * H), np.exp(-kb * H)


def subsurface_rrs(w: WaterColumn, b: BottomState, H, g: Geometry, library, wavelength):
    if np.any(np.asarray(H) < 0):
        raise DomainError(f"depth must be non-negative, got {H}")
    rinf, ec, eb = _attenuation_terms(w, H, g, wavelength)
    rho = bottom_albedo_mix(b, library, wavelength)
    return rinf * (1.0 - ec) + rho / np.pi * eb


def subsurface_to_surface(r, delta=0.0):
    r = np.asarray(r, dtype=float)
    den = 1.0 - 1.5 * r
    if np.any(np.abs(den) < 1e-15):
        raise DomainError("subsurface reflectance at the 2/3 singularity")
    out = 0.5 * r / den + delta
    return float(out) if out.ndim == 0 else out


def surface_to_subsurface(R, delta=0.0):
    x = np.asarray(R, dtype=float) - delta
    den = 1.0 + 3.0 * x
    if np.any(np.abs(den) < 1e-15):
        raise DomainError("surface reflectance at the -1/3 singularity")
    out = 2.0 * x / den
    return float(out) if out.ndim == 0 else out


def rho_modelled(w: WaterColumn, H, g: Geometry, R, wavelength):
    """Bottom albedo implied by surface reflectance ``R`` for a fixed water
    column and depth.  Amplifies noise by exp(k H) in deep water."""
    if isinstance(R, Spectrum):
        R = R.values
    r = surface_to_subsurface(R, w.delta)
    rinf, ec, eb = _attenuation_terms(w, H, g, wavelength)
    return np.pi * (r - rinf * (1.0 - ec)) / eb
