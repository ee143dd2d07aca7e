"""Shallow-water bathymetry, turbidity and bottom-type retrieval from
multispectral reflectance."""

from shoalmap._accel import USE_NUMBA
from shoalmap.spectral import BandSet, LookupCurve, Spectrum

__version__ = "0.1.0"

__all__ = ["BandSet", "LookupCurve", "Spectrum", "USE_NUMBA", "__version__"]
