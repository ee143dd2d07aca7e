"""Comparison of model depths against soundings."""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field

import numpy as np

from shoalmap.errors import UsageError
from shoalmap.scene import SceneMetadata
from shoalmap.soundings import SoundingSet

ABS_THRESHOLDS_M = (0.25, 0.5, 0.75, 1.0, 1.5, 2.0)
REL_THRESHOLDS_PCT = (2.0, 5.0, 10.0, 15.0, 20.0, 25.0)


@dataclass
class RegressionReport:
    n: int
    r_squared: float
    slope: float
    intercept: float
    mae_m: float
    mean_relative_pct: float
    within_abs: dict = field(default_factory=dict)  # threshold m -> % of points
    within_rel: dict = field(default_factory=dict)  # threshold % -> % of points

    def as_dict(self):
        d = asdict(self)
        d["within_abs"] = {f"{k:g}": v for k, v in self.within_abs.items()}
        d["within_rel"] = {f"{k:g}": v for k, v in self.within_rel.items()}
        return d

    def table(self):
        """Aligned text: absolute and relative agreement side by side."""
        lines = [f"points: {self.n}   R^2: {self.r_squared:.4f}   "
                 f"fit: model = {self.slope:.3f} * sounding + {self.intercept:.3f}",
                 f"MAE: {self.mae_m:.3f} m   mean relative error: {self.mean_relative_pct:.2f} %",
                 "",
                 f"{'within (m)':>12} {'% points':>9}   {'within (%)':>12} {'% points':>9}"]
        for (ta, pa), (tr, pr) in zip(self.within_abs.items(), self.within_rel.items()):
            lines.append(f"{ta:>12.2f} {pa:>9.2f}   {tr:>12.0f} {pr:>9.2f}")
        return "\n".join(lines)


def compare_depths(model, truth) -> RegressionReport:
    """Statistics over paired depths (NaNs in either are dropped)."""
    m = np.asarray(model, dtype=float).ravel()
    s = np.asarray(truth, dtype=float).ravel()
    ok = np.isfinite(m) & np.isfinite(s) & (s > 0)
    m, s = m[ok], s[ok]
    if m.size == 0:
        raise UsageError("no overlap between model depths and soundings")
    err = np.abs(m - s)
    rel = 100.0 * err / s
    if m.size >= 2 and np.ptp(s) > 0:
        slope, intercept = np.polyfit(s, m, 1)
        ss_res = float(np.sum((m - (slope * s + intercept)) ** 2))
        ss_tot = float(np.sum((m - m.mean()) ** 2))
        r2 = 1.0 - ss_res / ss_tot if ss_tot > 0 else 1.0
    else:
        slope = intercept = r2 = math.nan
    # a small slack keeps "within 1 m" true for errors of exactly 1 m
    tol = 1e-9
    return RegressionReport(
        int(m.size), float(r2), float(slope), float(intercept), float(err.mean()), float(rel.mean()),
        {t: 100.0 * float(np.mean(err <= t + tol)) for t in ABS_THRESHOLDS_M},
        {t: 100.0 * float(np.mean(rel <= t + tol)) for t in REL_THRESHOLDS_PCT},
    )


def regression_report(H_model, soundings: SoundingSet,
                      metadata: SceneMetadata = SceneMetadata()) -> RegressionReport:
    return compare_depths(soundings.sample(H_model, metadata), soundings.depths)
