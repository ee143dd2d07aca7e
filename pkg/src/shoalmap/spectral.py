"""Wavelength grids, tabulated optical curves and band resampling."""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache
from importlib import resources
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from shoalmap.errors import CurveRangeError, DataError, NormalizationError, UsageError

# Phytoplankton absorption shape, 440 nm normalised: (wavelength, a0, a1).
_A0_A1_TABLE = (
    (400, 0.69322, 0.01035), (405, 0.80506, 0.01868), (410, 0.89891, 0.02278),
    (415, 0.96392, 0.02497), (420, 0.99268, 0.02371), (425, 1.00392, 0.01841),
    (430, 1.02963, 0.01381), (435, 1.03967, 0.00750), (440, 1.0, 0.0),
    (445, 0.90067, -0.01143), (450, 0.79228, -0.02292), (455, 0.74203, -0.02655),
    (460, 0.74870, -0.02273), (465, 0.76773, -0.01590), (470, 0.77611, -0.00746),
    (475, 0.76177, -0.00132), (480, 0.72663, -0.00007), (485, 0.68161, -0.00094),
    (490, 0.63211, -0.00109), (495, 0.57497, -0.00056), (500, 0.51537, 0.00073),
    (505, 0.45850, 0.00244), (510, 0.40764, 0.00391), (515, 0.36526, 0.00529),
    (520, 0.32875, 0.00617), (525, 0.30033, 0.00753), (530, 0.27633, 0.00874),
    (535, 0.25874, 0.01065), (540, 0.23621, 0.01005), (545, 0.21342, 0.00897),
    (550, 0.19724, 0.00975), (555, 0.18247, 0.01048), (560, 0.16819, 0.01044),
    (565, 0.15781, 0.01023), (570, 0.15495, 0.01076), (575, 0.15478, 0.01080),
    (580, 0.15795, 0.01102), (585, 0.16251, 0.01104), (590, 0.16427, 0.01054),
    (595, 0.16247, 0.01027), (600, 0.16094, 0.01062), (605, 0.16188, 0.01104),
    (610, 0.16489, 0.01075), (615, 0.17238, 0.01088), (620, 0.17878, 0.01073),
    (625, 0.18479, 0.01090), (630, 0.19970, 0.01329), (635, 0.21805, 0.01636),
    (640, 0.24139, 0.02122), (645, 0.25922, 0.02508), (650, 0.26483, 0.02589),
    (655, 0.27135, 0.02374), (660, 0.31442, 0.02326), (665, 0.40322, 0.02714),
    (670, 0.49153, 0.03177), (675, 0.52301, 0.03344), (680, 0.46490, 0.02943),
    (685, 0.33078, 0.01968), (690, 0.19484, 0.01007), (695, 0.11332, 0.00577),
    (700, 0.07804, 0.00588), (705, 0.05617, 0.00477), (710, 0.04426, 0.00401),
    (715, 0.03844, 0.00414), (720, 0.03209, 0.00361), (725, 0.02705, 0.00333),
    (730, 0.02090, 0.00253), (735, 0.02198, 0.00528), (740, 0.01671, 0.00383),
    (745, 0.00866, 0.00191), (750, 0.01262, 0.00288),
)

# Formula wavelengths farther than this from every band fall back to the
# longest-wavelength band.
BAND_MATCH_NM = 60.0


@dataclass(frozen=True)
class LookupCurve:
    """Tabulated curve, linearly interpolated between knots."""

    wavelengths: np.ndarray
    values: np.ndarray
    name: str = "curve"

    def __post_init__(self):
        wl = np.asarray(self.wavelengths, dtype=float)
        v = np.asarray(self.values, dtype=float)
        if wl.ndim != 1 or wl.shape != v.shape:
            raise DataError(f"{self.name}: wavelengths and values must be 1-D of equal length")
        if wl.size < 1:
            raise DataError(f"{self.name}: empty curve")
        if np.any(np.diff(wl) <= 0):
            raise DataError(f"{self.name}: wavelengths must be strictly increasing")
        if not np.all(np.isfinite(v)):
            raise DataError(f"{self.name}: non-finite values")
        wl.setflags(write=False)
        v.setflags(write=False)
        object.__setattr__(self, "wavelengths", wl)
        object.__setattr__(self, "values", v)

    def __call__(self, wavelength):
        return value_at(self, wavelength)

    def scaled(self, factor, name=None):
        return LookupCurve(self.wavelengths, self.values * factor, name or self.name)


@dataclass(frozen=True)
class BandSet:
    centers: tuple
    names: tuple | None = None

    def __post_init__(self):
        c = tuple(float(x) for x in self.centers)
        if len(c) == 0 or any(b <= a for a, b in zip(c, c[1:])):
            raise DataError("band centers must be non-empty and strictly increasing")
        object.__setattr__(self, "centers", c)
        if self.names is not None:
            names = tuple(str(n) for n in self.names)
            if len(names) != len(c):
                raise DataError("band names must match band centers")
            object.__setattr__(self, "names", names)

    def __len__(self):
        return len(self.centers)

    @property
    def array(self):
        return np.asarray(self.centers)

    def index_for(self, wavelength):
        """Band index standing in for a formula wavelength (nearest center,
        or the longest band when nothing lies within ``BAND_MATCH_NM``)."""
        c = self.array
        i = int(np.argmin(np.abs(c - wavelength)))
        if abs(c[i] - wavelength) > BAND_MATCH_NM:
            return len(c) - 1
        return i


@dataclass(frozen=True)
class Spectrum:
    bands: BandSet
    values: np.ndarray = field(repr=False)

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.shape != (len(self.bands),):
            raise DataError(f"spectrum needs {len(self.bands)} values, got shape {v.shape}")
        if not np.all(np.isfinite(v)):
            raise DataError("spectrum values must be finite")
        object.__setattr__(self, "values", v)

    def at(self, wavelength):
        """Value at the band mapped to ``wavelength``."""
        return float(self.values[self.bands.index_for(wavelength)])


def value_at(curve: LookupCurve, wavelength):
    """Piecewise-linear interpolation; exact at the knots."""
    lam = np.asarray(wavelength, dtype=float)
    lo, hi = curve.wavelengths[0], curve.wavelengths[-1]
    if np.any(lam < lo) or np.any(lam > hi) or np.any(np.isnan(lam)):
        raise CurveRangeError(
            f"{curve.name}: wavelength {wavelength} outside [{lo:g}, {hi:g}] nm")
    out = np.interp(lam, curve.wavelengths, curve.values)
    return float(out) if out.ndim == 0 else out


def resample_curve(curve: LookupCurve, bands: BandSet) -> Spectrum:
    return Spectrum(bands, value_at(curve, bands.array))


def read_curve(path, name=None) -> LookupCurve:
    """Two-column ``wavelength_nm value`` text file, ``#`` comments."""
    path = Path(path)
    wl, val = [], []
    with open(path) as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            parts = line.split()
            if len(parts) != 2:
                raise DataError(f"{path}:{lineno}: expected 2 columns, got {len(parts)}")
            try:
                wl.append(float(parts[0]))
                val.append(float(parts[1]))
            except ValueError:
                raise DataError(f"{path}:{lineno}: unparsable number") from None
    return LookupCurve(np.array(wl), np.array(val), name or path.stem)


def write_curve(path, curve: LookupCurve, comment=None):
    with open(path, "w") as fh:
        if comment:
            for line in comment.splitlines():
                fh.write(f"# {line}\n")
        for w, v in zip(curve.wavelengths, curve.values):
            fh.write(f"{w:g} {v:.10g}\n")


def load_bottom_spectra(source) -> dict[str, LookupCurve]:
    """Normalise bottom albedo curves to exactly 1 at 550 nm.

    ``source`` is a mapping name -> LookupCurve, or a directory of curve
    files (file stem = bottom type).  Insertion/filename order is kept.
    """
    if isinstance(source, (str, Path)):
        d = Path(source)
        if not d.is_dir():
            raise DataError(f"bottom library {d} is not a directory")
        files = sorted(p for p in d.iterdir() if p.suffix in (".txt", ".dat", ".csv"))
        if not files:
            raise DataError(f"bottom library {d} has no curve files")
        source = {p.stem: read_curve(p) for p in files}
    library = {}
    for name, curve in source.items():
        try:
            at550 = value_at(curve, 550.0)
        except CurveRangeError:
            raise NormalizationError(f"bottom spectrum {name!r} does not cover 550 nm") from None
        if not at550 > 0:
            raise NormalizationError(f"bottom spectrum {name!r} is {at550:g} at 550 nm")
        vals = curve.values / at550
        # Pin the 550 nm value exactly; division can leave 1 ulp of error at a knot.
        vals[np.asarray(curve.wavelengths) == 550.0] = 1.0
        scaled = LookupCurve(curve.wavelengths, vals, name)
        if value_at(scaled, 550.0) != 1.0:
            # 550 falls between knots: insert an exact knot.
            wl = np.insert(curve.wavelengths, np.searchsorted(curve.wavelengths, 550.0), 550.0)
            vals = np.interp(wl, scaled.wavelengths, scaled.values)
            vals[wl == 550.0] = 1.0
            scaled = LookupCurve(wl, vals, name)
        library[name] = scaled
    return library


def _data_path(*parts):
    return resources.files("shoalmap").joinpath("data", *parts)


@lru_cache(maxsize=None)
def pure_water_absorption() -> LookupCurve:
    with resources.as_file(_data_path("pure_water_absorption.txt")) as p:
        return read_curve(p, "a_w")


@lru_cache(maxsize=None)
def pure_water_backscatter() -> LookupCurve:
    with resources.as_file(_data_path("pure_water_backscatter.txt")) as p:
        return read_curve(p, "b_bw")


@lru_cache(maxsize=None)
def phyto_a0() -> LookupCurve:
    t = np.array(_A0_A1_TABLE)
    return LookupCurve(t[:, 0], t[:, 1], "a0")


@lru_cache(maxsize=None)
def phyto_a1() -> LookupCurve:
    t = np.array(_A0_A1_TABLE)
    return LookupCurve(t[:, 0], t[:, 2], "a1")


def default_bottom_library() -> dict[str, LookupCurve]:
    with resources.as_file(_data_path("bottom")) as p:
        lib = load_bottom_spectra(p)
    order = ["sand", "seagrass", "coral"]
    return {k: lib[k] for k in order if k in lib} | {k: v for k, v in lib.items() if k not in order}


def select_library(names: Sequence[str] | None = None, n: int | None = None,
                   source=None) -> dict[str, LookupCurve]:
    """Pick bottom types by name (or the first ``n``) from a library."""
    lib = default_bottom_library() if source is None else (
        source if isinstance(source, Mapping) else load_bottom_spectra(source))
    if names:
        missing = [k for k in names if k not in lib]
        if missing:
            raise UsageError(f"unknown bottom types {missing}; available: {list(lib)}")
        lib = {k: lib[k] for k in names}
    if n is not None:
        if n < 1 or n > len(lib):
            raise UsageError(f"need 1..{len(lib)} bottom types, asked for {n}")
        lib = dict(list(lib.items())[:n])
    return lib


def library_matrix(library: Mapping[str, LookupCurve], bands: BandSet) -> np.ndarray:
    """(N_b, n_bands) albedo matrix at the band centers."""
    return np.array([resample_curve(c, bands).values for c in library.values()])
