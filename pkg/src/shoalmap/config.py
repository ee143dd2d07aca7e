"""Run configuration: a flat ``key = value`` text file.

Blank lines and ``#`` comments are ignored; unknown keys are errors.  Every
key has a default, listed in ``RunConfig``.
"""

from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass, field, fields
from pathlib import Path

from shoalmap.errors import UsageError
from shoalmap.metrics import MetricWeights
from shoalmap.optimizer import SimplexConfig


@dataclass
class RunConfig:
    # region radius r: N_r = (2r + 1)^2
    radius: int = 1
    n_types: int = 2
    # comma-separated bottom type names; empty -> first n_types of the library
    bottom_types: str = ""
    # directory of bottom albedo curves; empty -> bundled library
    bottom_library: str = ""
    S: float = 0.015
    # particle backscatter exponent; nan -> estimated per scene from deep water
    Y: float = math.nan
    view_zenith: float = 0.0
    w_spectral: float = 0.85
    w_depth: float = 0.15
    kappa: float = 0.1
    use_lut: bool = True
    lut_capacity: int = 256
    lut_match_mrad: float = 0.5
    hot_start_mrad: float = 2.0
    # failed LUT gates in a row before the insertion threshold is raised 10%
    lut_adapt_after: int = 100
    # per simplex run; the region objective is ~1e-16 at an exact fit, so
    # the spread tolerance has to sit far below the generic optimiser default
    max_iterations: int = 20000
    f_tolerance: float = 1e-14
    x_tolerance: float = 1e-12
    f_rtol: float = 1e-6
    restarts: int = 30
    # short runs from each ladder depth before the best one is polished
    ladder_iterations: int = 3000
    ladder_restarts: int = 2
    # how many of the best ladder runs get the full polish
    ladder_polish: int = 3
    initial_step: float = 0.05
    seed: int = 0
    # fraction of darkest pixels used as optically deep water without a mask
    deep_fraction: float = 0.02
    P_min: float = 1e-3
    P_max: float = 0.5
    G_min: float = 1e-3
    G_max: float = 1.0
    X_min: float = 1e-4
    X_max: float = 0.25
    D_min: float = -0.005
    D_max: float = 0.01
    H_min: float = 0.01
    H_max: float = 35.0
    B_min: float = 0.0
    B_max: float = 0.6
    q_min: float = 1e-3
    q_max: float = 100.0
    # pipeline
    max_combination: int = 4
    median_mode: str = "weighted"
    median_filter: int = 3
    datum_offset: float = 0.0
    depth_error_trials: int = 20
    depth_error_scale: float = 1.0
    jobs: int = 1

    def __post_init__(self):
        if self.radius < 0:
            raise UsageError("radius must be >= 0")
        if self.n_types < 1:
            raise UsageError("n_types must be >= 1")
        if self.median_mode not in ("weighted", "plain"):
            raise UsageError("median_mode must be 'weighted' or 'plain'")
        if self.lut_capacity < 1:
            raise UsageError("lut_capacity must be positive")
        self.weights  # validates

    @property
    def n_pixels(self):
        return (2 * self.radius + 1) ** 2

    @property
    def weights(self):
        return MetricWeights(self.w_spectral, self.w_depth, self.kappa)

    @property
    def simplex(self):
        return SimplexConfig(self.max_iterations, self.f_tolerance, self.x_tolerance,
                             self.restarts, self.seed, self.initial_step, self.f_rtol)

    @property
    def ladder_simplex(self):
        return SimplexConfig(self.ladder_iterations, self.f_tolerance, self.x_tolerance,
                             self.ladder_restarts, self.seed, self.initial_step, self.f_rtol)

    @property
    def type_names(self):
        return [s.strip() for s in self.bottom_types.split(",") if s.strip()]

    def replace(self, **changes):
        return dataclasses.replace(self, **changes)


def _coerce(name, typ, raw):
    raw = raw.strip()
    try:
        if typ in (bool, "bool"):
            low = raw.lower()
            if low in ("1", "true", "yes", "on"):
                return True
            if low in ("0", "false", "no", "off"):
                return False
            raise ValueError(raw)
        if typ in (int, "int"):
            return int(raw)
        if typ in (float, "float"):
            return float(raw)
        return raw
    except ValueError:
        raise UsageError(f"config key {name!r}: cannot parse {raw!r} as {typ}") from None


def parse_config(text: str, base: RunConfig | None = None) -> RunConfig:
    types = {f.name: f.type for f in fields(RunConfig)}
    values = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise UsageError(f"config line {lineno}: expected key = value")
        key, raw = (s.strip() for s in line.split("=", 1))
        if key not in types:
            raise UsageError(f"config line {lineno}: unknown key {key!r}")
        values[key] = _coerce(key, types[key], raw)
    return dataclasses.replace(base or RunConfig(), **values)


def load_config(path, base: RunConfig | None = None) -> RunConfig:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise UsageError(f"cannot read config {path}: {exc}") from None
    return parse_config(text, base)


def dump_config(cfg: RunConfig) -> str:
    return "".join(f"{f.name} = {getattr(cfg, f.name)}\n" for f in fields(cfg))
