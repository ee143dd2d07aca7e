"""Depth soundings: CSV with header ``x,y,depth_m`` in scene world coordinates."""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from shoalmap.errors import DataError, UsageError
from shoalmap.scene import SceneMetadata

HEADER = ("x", "y", "depth_m")


@dataclass
class SoundingSet:
    points: np.ndarray  # (N, 3): x, y, depth

    def __post_init__(self):
        p = np.asarray(self.points, dtype=float).reshape(-1, 3)
        if np.any(~np.isfinite(p)):
            raise DataError("soundings contain non-finite values")
        if np.any(p[:, 2] <= 0):
            raise DataError("sounding depths must be positive")
        self.points = p

    def __len__(self):
        return self.points.shape[0]

    @property
    def x(self):
        return self.points[:, 0]

    @property
    def y(self):
        return self.points[:, 1]

    @property
    def depths(self):
        return self.points[:, 2]

    def pixel_indices(self, meta: SceneMetadata, height, width):
        """(row, col, inside) integer pixel positions of every sounding."""
        col, row = meta.world_to_pixel(self.x, self.y)
        r = np.floor(row).astype(np.int64)
        c = np.floor(col).astype(np.int64)
        inside = (r >= 0) & (r < height) & (c >= 0) & (c < width)
        return r, c, inside

    def sample(self, raster, meta: SceneMetadata):
        """Values of a 2-D raster at each sounding; NaN outside the raster."""
        raster = np.asarray(raster)
        r, c, inside = self.pixel_indices(meta, *raster.shape[-2:])
        out = np.full(len(self), np.nan)
        out[inside] = raster[..., r[inside], c[inside]]
        return out

    @classmethod
    def from_pixels(cls, rows, cols, depths, meta: SceneMetadata = SceneMetadata()):
        """Soundings at pixel centres, converted to world coordinates."""
        g = meta.geotransform
        c = np.asarray(cols, dtype=float) + 0.5
        r = np.asarray(rows, dtype=float) + 0.5
        x = g[0] + c * g[1] + r * g[2]
        y = g[3] + c * g[4] + r * g[5]
        return cls(np.column_stack([x, y, np.asarray(depths, dtype=float)]))


def read_soundings(path) -> SoundingSet:
    path = Path(path)
    try:
        fh = path.open(newline="")
    except OSError as exc:
        raise DataError(f"cannot read soundings {path}: {exc}") from exc
    rows = []
    with fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or tuple(h.strip().lower() for h in header) != HEADER:
            raise DataError(f"{path}: expected header {','.join(HEADER)}, got {header}")
        for lineno, rec in enumerate(reader, start=2):
            if not rec or all(not f.strip() for f in rec):
                continue
            if len(rec) != 3:
                raise DataError(f"{path}:{lineno}: expected 3 fields, got {len(rec)}")
            try:
                x, y, d = (float(f) for f in rec)
            except ValueError:
                raise DataError(f"{path}:{lineno}: unparsable row {rec}") from None
            if not (np.isfinite(x) and np.isfinite(y) and np.isfinite(d)):
                raise DataError(f"{path}:{lineno}: non-finite value")
            if d <= 0:
                raise DataError(f"{path}:{lineno}: depth must be positive, got {d}")
            rows.append((x, y, d))
    if not rows:
        raise UsageError(f"{path}: no soundings")
    return SoundingSet(np.array(rows))


def write_soundings(path, soundings: SoundingSet):
    with Path(path).open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(HEADER)
        for x, y, d in soundings.points:
            w.writerow([repr(float(x)), repr(float(y)), repr(float(d))])
