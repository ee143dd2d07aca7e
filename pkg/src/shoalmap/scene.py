"""Scene rasters: band-sequential float32 with a JSON sidecar.

``name.bin`` holds little-endian float32 values band by band; ``name.json``
carries dimensions, band centers and metadata.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from shoalmap.errors import DataError
from shoalmap.forward import Geometry
from shoalmap.spectral import BandSet

FORMAT = "shoalmap-raster/1"
DEFAULT_NODATA = -9999.0
IDENTITY_GEOTRANSFORM = (0.0, 1.0, 0.0, 0.0, 0.0, 1.0)


@dataclass
class SceneMetadata:
    scene_id: str = "scene"
    date: str = ""
    sun_elevation: float = 90.0
    tide_offset: float = 0.0
    # x = gt[0] + col*gt[1] + row*gt[2]; y = gt[3] + col*gt[4] + row*gt[5]
    geotransform: tuple = IDENTITY_GEOTRANSFORM
    nodata: float = DEFAULT_NODATA
    view_zenith: float = 0.0
    extra: dict = field(default_factory=dict)

    def __post_init__(self):
        if not (0.0 < float(self.sun_elevation) <= 90.0):
            raise DataError(f"sun elevation {self.sun_elevation} outside (0, 90]")
        gt = tuple(float(v) for v in self.geotransform)
        if len(gt) != 6 or abs(gt[1] * gt[5] - gt[2] * gt[4]) < 1e-300:
            raise DataError("geotransform must be 6 numbers with an invertible linear part")
        self.geotransform = gt

    def world_to_pixel(self, x, y):
        """Fractional (col, row) for world coordinates."""
        g = self.geotransform
        det = g[1] * g[5] - g[2] * g[4]
        dx = np.asarray(x, dtype=float) - g[0]
        dy = np.asarray(y, dtype=float) - g[3]
        col = (g[5] * dx - g[2] * dy) / det
        row = (-g[4] * dx + g[1] * dy) / det
        return col, row


@dataclass
class Scene:
    """Multiband raster; ``data`` has shape (n_bands, height, width)."""

    data: np.ndarray
    bands: BandSet
    metadata: SceneMetadata = field(default_factory=SceneMetadata)

    def __post_init__(self):
        self.data = np.asarray(self.data, dtype=np.float32)
        if self.data.ndim == 2:
            self.data = self.data[None]
        if self.data.ndim != 3 or self.data.shape[0] != len(self.bands):
            raise DataError(f"data shape {self.data.shape} does not match {len(self.bands)} bands")

    @property
    def height(self):
        return self.data.shape[1]

    @property
    def width(self):
        return self.data.shape[2]

    @property
    def shape(self):
        return self.data.shape[1:]

    @property
    def geometry(self) -> Geometry:
        return Geometry.from_sun_elevation(self.metadata.sun_elevation, self.metadata.view_zenith)

    def valid_mask(self):
        nd = self.metadata.nodata
        d = self.data
        return np.all(np.isfinite(d) & (d != nd), axis=0)

    def pixels(self):
        """(height*width, n_bands) float64 view of the spectra."""
        return self.data.reshape(len(self.bands), -1).T.astype(np.float64)


def _sidecar(path):
    p = Path(path)
    return (p.with_suffix(".bin"), p.with_suffix(".json"))


def write_raster(path, data, bands=None, metadata: SceneMetadata | None = None, names=None):
    """Write a (n_bands, h, w) or (h, w) array; returns the .bin path."""
    arr = np.asarray(data, dtype=np.float32)
    if arr.ndim == 2:
        arr = arr[None]
    if arr.ndim != 3:
        raise DataError(f"raster must be 2-D or 3-D, got shape {arr.shape}")
    if bands is None:
        centers = list(range(1, arr.shape[0] + 1))
        names = names or [f"band{i}" for i in centers]
    else:
        centers = list(bands.centers)
        names = names or (list(bands.names) if bands.names else None)
    meta = metadata or SceneMetadata()
    binp, jsonp = _sidecar(path)
    binp.parent.mkdir(parents=True, exist_ok=True)
    arr.astype("<f4").tofile(binp)
    side = {
        "format": FORMAT,
        "width": arr.shape[2],
        "height": arr.shape[1],
        "bands": centers,
        "band_names": names,
        "metadata": asdict(meta),
    }
    jsonp.write_text(json.dumps(side, indent=2))
    return binp


def read_raster(path):
    """Return (data (n_bands, h, w) float32, BandSet, SceneMetadata)."""
    binp, jsonp = _sidecar(path)
    try:
        side = json.loads(jsonp.read_text())
    except FileNotFoundError:
        raise DataError(f"missing sidecar {jsonp}") from None
    except json.JSONDecodeError as exc:
        raise DataError(f"malformed sidecar {jsonp}: {exc}") from None
    try:
        w, h, centers = int(side["width"]), int(side["height"]), side["bands"]
        meta_d = dict(side.get("metadata", {}))
    except (KeyError, TypeError, ValueError) as exc:
        raise DataError(f"malformed sidecar {jsonp}: missing or bad field {exc}") from None
    if side.get("format", FORMAT) != FORMAT:
        raise DataError(f"{jsonp}: unsupported format {side.get('format')!r}")
    nb = len(centers)
    expected = 4 * w * h * nb
    try:
        actual = binp.stat().st_size
    except FileNotFoundError:
        raise DataError(f"missing data file {binp}") from None
    if actual != expected:
        raise DataError(f"{binp}: size mismatch, expected {expected} bytes, found {actual}")
    data = np.fromfile(binp, dtype="<f4").reshape(nb, h, w).astype(np.float32)
    meta_d["geotransform"] = tuple(meta_d.get("geotransform", IDENTITY_GEOTRANSFORM))
    known = set(SceneMetadata.__dataclass_fields__)
    extra = {k: v for k, v in meta_d.items() if k not in known}
    meta = SceneMetadata(**{k: v for k, v in meta_d.items() if k in known})
    meta.extra.update(extra)
    bands = BandSet(tuple(centers), tuple(side["band_names"]) if side.get("band_names") else None)
    return data, bands, meta


def read_scene(path) -> Scene:
    data, bands, meta = read_raster(path)
    return Scene(data, bands, meta)


def write_scene(path, scene: Scene):
    return write_raster(path, scene.data, scene.bands, scene.metadata)
