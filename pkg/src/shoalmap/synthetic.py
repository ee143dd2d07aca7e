"""Forward-model oracle scenes with known truth."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from shoalmap import spectral
from shoalmap.errors import DataError, DomainError, UsageError
from shoalmap.forward import (BottomState, Geometry, WaterColumn, subsurface_rrs,
                              subsurface_to_surface)
from shoalmap.scene import Scene, SceneMetadata, read_raster, write_raster
from shoalmap.spectral import BandSet

DEFAULT_BANDS = (443.0, 483.0, 561.0, 655.0)
TRUTH_SUFFIX = "_truth"


@dataclass
class SyntheticTruth:
    """Per-pixel truth rasters.  ``B`` and ``q`` are (N_b, h, w); the water
    column rasters are (h, w).  ``H`` is the depth at acquisition time."""

    H: np.ndarray
    P: np.ndarray
    G: np.ndarray
    X: np.ndarray
    delta: np.ndarray
    B: np.ndarray
    q: np.ndarray
    S: float = 0.015
    Y: float = 1.0
    type_names: list = field(default_factory=list)

    def __post_init__(self):
        self.H = np.asarray(self.H, dtype=float)
        shape = self.H.shape
        if len(shape) != 2:
            raise UsageError("truth rasters must be 2-D")
        for name in ("P", "G", "X", "delta"):
            v = np.broadcast_to(np.asarray(getattr(self, name), dtype=float), shape).copy()
            setattr(self, name, v)
        self.B = np.asarray(self.B, dtype=float)
        self.q = np.asarray(self.q, dtype=float)
        if self.B.ndim == 2:
            self.B = self.B[None]
        if self.q.ndim == 2:
            self.q = self.q[None]
        if self.B.shape[1:] != shape or self.q.shape != self.B.shape:
            raise UsageError("B and q must be (N_b, h, w) matching H")

    @property
    def shape(self):
        return self.H.shape

    @property
    def n_types(self):
        return self.B.shape[0]

    @classmethod
    def uniform(cls, H, P, G, X, delta=0.0, B=(0.4,), q=(1.0,), **kw):
        H = np.asarray(H, dtype=float)
        B = np.asarray(B, dtype=float).reshape(-1, 1, 1) * np.ones(H.shape)
        q = np.asarray(q, dtype=float).reshape(-1, 1, 1) * np.ones(H.shape)
        return cls(H, P, G, X, delta, B, q, **kw)


def depth_ramp(height, width, shallow=1.0, deep=25.0):
    """Depth increasing linearly along columns."""
    return np.tile(np.linspace(shallow, deep, width), (height, 1))


def generate_synthetic_scene(truth: SyntheticTruth, geometry: Geometry | None = None,
                             bands=DEFAULT_BANDS, library=None, noise=0.0, seed=0,
                             metadata: SceneMetadata | None = None) -> Scene:
    """Surface reflectance from the forward model plus uniform noise in
    [-noise, noise] per band and pixel.  ``noise`` may be a scalar or one
    amplitude per band.

    ``metadata`` wins over ``geometry`` for the sun elevation; without either
    the sun is overhead.
    """
    bands = bands if isinstance(bands, BandSet) else BandSet(bands)
    if library is None:
        library = spectral.select_library(None, truth.n_types)
    lib = spectral.library_matrix(library, bands) if isinstance(library, dict) else np.atleast_2d(library)
    if lib.shape[0] != truth.n_types:
        raise UsageError(f"library has {lib.shape[0]} types, truth has {truth.n_types}")
    if metadata is None:
        metadata = SceneMetadata()
        if geometry is not None:
            metadata.sun_elevation = 90.0 - float(np.degrees(np.arcsin(np.sin(geometry.theta_sun) * 1.34)))
    geom = geometry if geometry is not None else Geometry.from_sun_elevation(
        metadata.sun_elevation, metadata.view_zenith)
    lam = bands.array
    h, w = truth.shape
    out = np.empty((len(bands), h, w))
    for i in range(h):
        for j in range(w):
            try:
                wc = WaterColumn(truth.P[i, j], truth.G[i, j], truth.X[i, j],
                                 truth.delta[i, j], truth.S, truth.Y)
                bs = BottomState(truth.B[:, i, j], truth.q[:, i, j])
                r = subsurface_rrs(wc, bs, truth.H[i, j] + metadata.tide_offset, geom, lib, lam)
            except DomainError as exc:
                raise DomainError(f"pixel ({i}, {j}): {exc}") from None
            out[:, i, j] = subsurface_to_surface(r, truth.delta[i, j])
    amp = np.broadcast_to(np.asarray(noise, dtype=float), (len(bands),))
    if np.any(amp < 0):
        raise UsageError("noise amplitude must be non-negative")
    if np.any(amp > 0):
        rng = np.random.default_rng(seed)
        out += rng.uniform(-1.0, 1.0, out.shape) * amp[:, None, None]
    return Scene(out.astype(np.float32), bands, metadata)


def truth_layers(truth: SyntheticTruth):
    names = ["H", "P", "G", "X", "delta"]
    layers = [truth.H, truth.P, truth.G, truth.X, truth.delta]
    for t in range(truth.n_types):
        names.append(f"B{t}")
        layers.append(truth.B[t])
    for t in range(truth.n_types):
        names.append(f"q{t}")
        layers.append(truth.q[t])
    return names, np.stack(layers)


def write_truth(path, truth: SyntheticTruth, metadata: SceneMetadata | None = None):
    """Store truth as a raster beside ``path`` (``<stem>_truth.bin/.json``)."""
    p = Path(path)
    names, data = truth_layers(truth)
    meta = SceneMetadata() if metadata is None else metadata
    tp = p.with_name(p.stem + TRUTH_SUFFIX)
    tp = write_raster(tp, data, names=names, metadata=meta)
    side = tp.with_suffix(".json")
    doc = json.loads(side.read_text())
    doc["truth"] = {"S": truth.S, "Y": truth.Y, "type_names": list(truth.type_names)}
    side.write_text(json.dumps(doc, indent=2))
    return tp


def read_truth(path) -> SyntheticTruth:
    p = Path(path)
    tp = p if p.stem.endswith(TRUTH_SUFFIX) else p.with_name(p.stem + TRUTH_SUFFIX)
    data, bands, _ = read_raster(tp)
    names = list(bands.names or ())
    doc = json.loads(tp.with_suffix(".json").read_text())
    extra = doc.get("truth", {})
    layers = dict(zip(names, data.astype(float)))
    try:
        nt = sum(1 for n in names if n.startswith("B"))
        B = np.stack([layers[f"B{t}"] for t in range(nt)])
        q = np.stack([layers[f"q{t}"] for t in range(nt)])
        return SyntheticTruth(layers["H"], layers["P"], layers["G"], layers["X"], layers["delta"],
                              B, q, extra.get("S", 0.015), extra.get("Y", 1.0),
                              extra.get("type_names", []))
    except KeyError as exc:
        raise DataError(f"{tp}: truth layer {exc} missing") from None
