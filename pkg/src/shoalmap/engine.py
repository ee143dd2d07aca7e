"""Per-region inversion over a co-registered scene stack.

Pixels are visited in order of spectral angle from the deep-water mean.  Each
visit first consults a small FIFO lookup table of recent good fits; on a miss
the region around the pixel is inverted with the simplex optimiser, hot
started from the previous fit when the spectra are close, otherwise cold
started (with the depth ladder when no depth prior exists).  Only the centre
pixel of each region is written back.
"""

from __future__ import annotations

import logging
import time
from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np

from shoalmap import kernels, spectral
from shoalmap.config import RunConfig
from shoalmap.errors import DataError, FitError, NumericalError, UsageError
from shoalmap.forward import BandOptics, Geometry, Y_from_chi, band_optics
from shoalmap.metrics import spectral_angle
from shoalmap.optimizer import DEPTH_LADDER, Bounds, SimplexConfig, minimize
from shoalmap.scene import Scene
from shoalmap.spectral import BandSet

log = logging.getLogger(__name__)

# hot-start fits worse than factor * previous + floor (percent) are redone cold
HOT_RETRY_FACTOR = 2.0
HOT_RETRY_FLOOR_PCT = 1e-3

SOURCE_NONE, SOURCE_OPTIMIZER, SOURCE_LUT, SOURCE_FAILED = 0, 1, 2, 3
SOURCE_NAMES = {SOURCE_NONE: "none", SOURCE_OPTIMIZER: "optimizer",
                SOURCE_LUT: "lut", SOURCE_FAILED: "failed"}


@dataclass
class ModelFit:
    """Parameters of one region inversion.

    P, G, X, delta: (N_s,); H: (N_r,); B, q: (N_b, N_r).  ``e_photic`` is in
    percent.  An H of all-NaN marks "no depth prior" in an initial guess.
    """

    P: np.ndarray
    G: np.ndarray
    X: np.ndarray
    delta: np.ndarray
    H: np.ndarray
    B: np.ndarray
    q: np.ndarray
    e_photic: float = np.nan
    iterations: int = 0
    source: str = "optimizer"

    @property
    def dims(self):
        return self.P.size, self.H.size, self.B.shape[0]

    @property
    def center(self):
        return self.H.size // 2

    def copy(self, **changes):
        base = {k: (np.array(v, copy=True) if isinstance(v, np.ndarray) else v)
                for k, v in self.__dict__.items()}
        base.update(changes)
        return ModelFit(**base)


def pack(fit: ModelFit) -> np.ndarray:
    ns, nr, nt = fit.dims
    if fit.G.size != ns or fit.X.size != ns or fit.delta.size != ns:
        raise UsageError("per-scene parameter lengths differ")
    if fit.B.shape != (nt, nr) or fit.q.shape != (nt, nr):
        raise UsageError("B and q must be (N_b, N_r)")
    wc = np.column_stack([fit.P, fit.G, fit.X, fit.delta]).ravel()
    return np.concatenate([wc, fit.H, fit.B.ravel(), fit.q.ravel()]).astype(float)


def unpack(v, n_scenes, n_pixels, n_types, **extra) -> ModelFit:
    v = np.asarray(v, dtype=float)
    if v.size != kernels.n_params(n_scenes, n_pixels, n_types):
        raise UsageError(f"vector has {v.size} entries, expected "
                         f"{kernels.n_params(n_scenes, n_pixels, n_types)}")
    wc = v[:4 * n_scenes].reshape(n_scenes, 4)
    o = 4 * n_scenes
    H = v[o:o + n_pixels]
    o += n_pixels
    B = v[o:o + n_types * n_pixels].reshape(n_types, n_pixels)
    o += n_types * n_pixels
    q = v[o:].reshape(n_types, n_pixels)
    return ModelFit(wc[:, 0].copy(), wc[:, 1].copy(), wc[:, 2].copy(), wc[:, 3].copy(),
                    H.copy(), B.copy(), q.copy(), **extra)


def default_bounds(n_scenes, n_pixels, n_types, cfg: RunConfig = RunConfig()) -> Bounds:
    lo = np.concatenate([np.tile([cfg.P_min, cfg.G_min, cfg.X_min, cfg.D_min], n_scenes),
                         np.full(n_pixels, cfg.H_min),
                         np.full(n_types * n_pixels, cfg.B_min),
                         np.full(n_types * n_pixels, cfg.q_min)])
    hi = np.concatenate([np.tile([cfg.P_max, cfg.G_max, cfg.X_max, cfg.D_max], n_scenes),
                         np.full(n_pixels, cfg.H_max),
                         np.full(n_types * n_pixels, cfg.B_max),
                         np.full(n_types * n_pixels, cfg.q_max)])
    return Bounds(lo, hi)


@dataclass
class Region:
    """Measured surface reflectance around one centre pixel.

    ``spectra`` is (N_s, N_r, n_bands); ``indices`` are flat raster indices
    of the N_r pixels (row-major neighbourhood, centre in the middle).
    """

    center: int
    indices: np.ndarray
    spectra: np.ndarray
    tides: np.ndarray

    def __post_init__(self):
        nr = self.spectra.shape[1]
        side = int(round(np.sqrt(nr)))
        if side * side != nr or side % 2 == 0:
            raise UsageError(f"region size {nr} is not an odd square")

    @property
    def center_spectra(self):
        return self.spectra[:, self.spectra.shape[1] // 2, :]


def neighbourhood(row, col, radius, height, width):
    """Flat indices of the (2r+1)^2 window, edge-replicated at borders."""
    off = np.arange(-radius, radius + 1)
    rr = np.clip(row + off, 0, height - 1)
    cc = np.clip(col + off, 0, width - 1)
    return (rr[:, None] * width + cc[None, :]).ravel()


class SceneStack:
    """Co-registered scenes flattened to (n_pixels, N_s, n_bands)."""

    def __init__(self, scenes: Sequence[Scene]):
        if not scenes:
            raise UsageError("need at least one scene")
        bands = scenes[0].bands
        shape = scenes[0].shape
        for s in scenes[1:]:
            if s.bands != bands:
                raise DataError("scenes use different band sets")
            if s.shape != shape:
                raise DataError(f"scene shapes differ: {s.shape} vs {shape}")
        self.scenes = list(scenes)
        self.bands: BandSet = bands
        self.height, self.width = shape
        self.pixels = np.stack([s.pixels() for s in scenes], axis=1)
        self.valid = np.all([s.valid_mask().ravel() for s in scenes], axis=0)
        self.tides = np.array([s.metadata.tide_offset for s in scenes], dtype=float)
        self.geometry = [s.geometry for s in scenes]

    @property
    def n_scenes(self):
        return len(self.scenes)

    def region(self, flat, radius, spectra=None) -> Region:
        px = self.pixels if spectra is None else spectra
        row, col = divmod(int(flat), self.width)
        idx = neighbourhood(row, col, radius, self.height, self.width)
        good = self.valid[idx]
        idx_eff = np.where(good, idx, flat)
        sp = px[idx_eff].transpose(1, 0, 2).astype(np.float64)
        return Region(int(flat), idx, np.ascontiguousarray(sp), self.tides)


def auto_deep_mask(stack: SceneStack, fraction=0.02, min_pixels=30):
    """Darkest pixels of the first scene (sum over bands) as a deep-water proxy."""
    bright = stack.pixels[:, 0, :].sum(axis=1)
    bright = np.where(stack.valid, bright, np.inf)
    n_valid = int(stack.valid.sum())
    n = min(n_valid, max(min_pixels, int(round(fraction * n_valid))))
    if n == 0:
        raise DataError("no valid pixels")
    mask = np.zeros(stack.pixels.shape[0], dtype=bool)
    mask[np.argsort(bright, kind="mergesort")[:n]] = True
    return mask


def deep_mean_spectra(stack: SceneStack, deep_mask=None, fraction=0.02):
    """(N_s, n_bands) mean surface reflectance over deep water."""
    if deep_mask is None:
        mask = auto_deep_mask(stack, fraction)
    else:
        mask = np.asarray(deep_mask, dtype=bool).ravel() & stack.valid
        if not mask.any():
            raise DataError("deep-water mask selects no valid pixels")
    return stack.pixels[mask].mean(axis=0)


def order_pixels(spectra, deep_mean, valid=None):
    """Flat pixel indices sorted by spectral angle from ``deep_mean``.

    ``spectra`` is (n_pixels, n_bands) from the reference scene.  The sort is
    stable so equal angles keep raster order; invalid pixels are dropped.
    """
    spectra = np.asarray(spectra, dtype=float)
    idx = np.arange(spectra.shape[0])
    if valid is not None:
        idx = idx[np.asarray(valid, dtype=bool)]
    ang = spectral_angle(spectra[idx], np.broadcast_to(deep_mean, spectra[idx].shape))
    return idx[np.argsort(ang, kind="mergesort")]


class StackModel:
    """Per-stack constants shared by every region inversion."""

    def __init__(self, bands: BandSet, geometry: Sequence[Geometry], tides, library_matrix,
                 cfg: RunConfig, Y=None):
        self.bands = bands
        self.cfg = cfg
        self.optics: BandOptics = band_optics(bands)
        self.library = np.atleast_2d(np.asarray(library_matrix, dtype=float))
        ns = len(geometry)
        self.n_scenes = ns
        self.n_types = self.library.shape[0]
        self.n_pixels = cfg.n_pixels
        self.S = np.full(ns, cfg.S)
        self.Y = np.ones(ns) if Y is None else np.broadcast_to(np.asarray(Y, dtype=float), (ns,)).copy()
        self.isun = np.array([g.inv_cos_sun for g in geometry])
        self.iview = np.array([g.inv_cos_view for g in geometry])
        self.tides = np.asarray(tides, dtype=float)
        self.bounds = default_bounds(ns, self.n_pixels, self.n_types, cfg)
        self.simplex: SimplexConfig = cfg.simplex
        self.ladder_simplex: SimplexConfig = cfg.ladder_simplex
        self.aw640 = spectral.value_at(spectral.pure_water_absorption(), 640.0)
        self.i440 = bands.index_for(440.0)
        self.i490 = bands.index_for(490.0)
        self.i550 = bands.index_for(550.0)
        self.i640 = bands.index_for(640.0)
        self.i750 = bands.index_for(750.0)

    def args(self, region: Region):
        w = self.cfg.weights
        return kernels.objective_args(region.spectra, self.optics, self.library, self.S, self.Y,
                                      self.isun, self.iview, region.tides,
                                      w.w_spectral, w.w_depth, w.kappa)

    def objective(self, fit: ModelFit, region: Region):
        return float(kernels.objective(pack(fit), self.args(region)))

    def modelled(self, fit: ModelFit, region: Region):
        return kernels.region_rrs(pack(fit), self.args(region))


def estimate_Y_from_mean(mean, bands: BandSet, eps=1e-12):
    """Backscatter exponent from an (n_bands,) mean surface spectrum; 1.0 if degenerate."""
    r440 = mean[bands.index_for(440.0)]
    r490 = mean[bands.index_for(490.0)]
    r750 = mean[bands.index_for(750.0)]
    den = r490 - r750
    if abs(den) < eps:
        log.warning("degenerate spectrum for Y estimate; using Y = 1")
        return 1.0
    return float(Y_from_chi((r440 - r750) / den))


def cold_start(region: Region, model: StackModel, depth_prior=None) -> ModelFit:
    """Band-ratio initial guess for every parameter of the region."""
    ns, nr, _ = region.spectra.shape
    nt = model.n_types
    mean = region.spectra.mean(axis=1)
    ratio = mean[:, model.i440] / mean[:, model.i550]
    P = np.where(ratio > 0, 0.072 * np.abs(ratio) ** -1.7, 0.05)
    if np.any(ratio <= 0):
        log.warning("non-positive 440/550 ratio in cold start; P = 0.05")
    G = 1.5 * P
    X = 30.0 * model.aw640 * mean[:, model.i640]
    D = mean[:, model.i750].copy()
    B = np.tile(0.4 * region.spectra[0, :, model.i490], (nt, 1))
    q = np.ones((nt, nr))
    H = np.full(nr, np.nan) if depth_prior is None else np.asarray(depth_prior, dtype=float).copy()
    return ModelFit(P, G, X, D, H, B, q, source="cold")


def hot_start(region: Region, model: StackModel, previous: ModelFit, depth_prior=None) -> ModelFit:
    """Water column from ``previous``; bottom cold; depth from the prior,
    else the previous centre depth."""
    fit = cold_start(region, model, depth_prior)
    fit.P, fit.G, fit.X, fit.delta = (previous.P.copy(), previous.G.copy(),
                                      previous.X.copy(), previous.delta.copy())
    if depth_prior is None:
        fit.H = np.full(fit.H.size, previous.H[previous.center])
    fit.source = "hot"
    return fit


def hot_start_failed(fit: ModelFit, previous: ModelFit) -> bool:
    """A hot start that lands far above the fit it was seeded from has
    fallen into a different basin; the caller retries cold."""
    return fit.e_photic > HOT_RETRY_FACTOR * previous.e_photic + HOT_RETRY_FLOOR_PCT


def should_hot_start(current: Region, previous: Region | None, threshold) -> bool:
    if previous is None:
        return False
    ang = spectral_angle(current.center_spectra, previous.center_spectra).mean()
    return bool(ang < threshold or ang == 0.0)


def _pin_depth(bounds: Bounds, offset, nr, depth, rel=1e-3):
    lo, hi = bounds.lower.copy(), bounds.upper.copy()
    d = min(max(depth, lo[offset]), hi[offset])
    lo[offset:offset + nr] = max(d * (1.0 - rel), bounds.lower[offset])
    hi[offset:offset + nr] = min(d * (1.0 + rel), bounds.upper[offset])
    return Bounds(lo, hi)


def invert_region(region: Region, init: ModelFit, model: StackModel) -> ModelFit:
    """Minimise the combined error over all region parameters."""
    ns, nr, nt = model.n_scenes, region.spectra.shape[1], model.n_types
    if nr != model.n_pixels:
        raise UsageError(f"region has {nr} pixels, model expects {model.n_pixels}")
    args = model.args(region)
    b = model.bounds
    if np.all(np.isnan(init.H)):
        # each ladder depth: settle the other parameters with H pinned, then
        # release H; polish the best few.  Without the pinned stage every
        # start slides into the same deep-water basin.
        ladder = []
        iterations = 0
        for d in DEPTH_LADDER:
            pinned = _pin_depth(b, 4 * ns, nr, d)
            r = minimize(kernels.objective, pinned.clip(pack(init.copy(H=np.full(nr, d)))),
                         pinned, model.ladder_simplex, args=args)
            r2 = minimize(kernels.objective, r.x, b, model.ladder_simplex, args=args)
            iterations += r.iterations + r2.iterations
            ladder.append(r2)
        ladder.sort(key=lambda r: r.fun)
        res = None
        for cand in ladder[:model.cfg.ladder_polish]:
            r = minimize(kernels.objective, cand.x, b, model.simplex, args=args)
            iterations += r.iterations
            if res is None or r.fun < res.fun:
                res = r
    else:
        res = minimize(kernels.objective, b.clip(pack(init)), b, model.simplex, args=args)
        iterations = res.iterations
    return unpack(res.x, ns, nr, nt, e_photic=100.0 * res.fun,
                  iterations=iterations, source="optimizer")


class DynamicLut:
    """Fixed-capacity FIFO store of good fits keyed by centre spectra."""

    def __init__(self, n_scenes, n_bands, capacity=256, match_threshold=5e-4,
                 adapt_after=100):
        self.capacity = capacity
        self.match_threshold = match_threshold
        self.n_scenes = n_scenes
        self.initial_threshold = max(1.5, 1.125 * n_scenes)
        self.threshold_cap = 2.5 + 2.5 * n_scenes
        self.insertion_threshold = self.initial_threshold
        self.adapt_after = adapt_after
        self.keys = np.zeros((capacity, n_scenes, n_bands))
        self.tides = np.zeros((capacity, n_scenes))
        self.fits: list[ModelFit | None] = [None] * capacity
        self.timestamps = np.full(capacity, -1, dtype=np.int64)
        self.count = 0
        self.clock = 0
        self._next = 0
        self._misses = 0

    def __len__(self):
        return self.count

    @staticmethod
    def _unit(spectra):
        s = np.asarray(spectra, dtype=float)
        return s / np.linalg.norm(s, axis=-1, keepdims=True)

    def query(self, region: Region):
        """(fit, angle) of the best entry within the match threshold, else (None, angle)."""
        if self.count == 0:
            return None, np.inf
        q = np.ascontiguousarray(self._unit(region.center_spectra))
        i, ang = kernels.lut_search(self.keys, self.count, q)
        if i < 0 or not ang < self.match_threshold:
            return None, ang
        e = self.fits[i]
        shift = float(np.mean(self.tides[i] - region.tides))
        return e.copy(H=e.H + shift, source="lut"), ang

    def insert(self, region: Region, fit: ModelFit) -> bool:
        if not np.isfinite(fit.e_photic):
            return False
        if fit.e_photic >= self.insertion_threshold:
            self._misses += 1
            if self._misses >= self.adapt_after:
                self.insertion_threshold = min(self.insertion_threshold * 1.1, self.threshold_cap)
                self._misses = 0
            return False
        self._misses = 0
        slot = self._next
        self.keys[slot] = self._unit(region.center_spectra)
        self.tides[slot] = region.tides
        self.fits[slot] = fit.copy()
        self.timestamps[slot] = self.clock
        self.clock += 1
        self._next = (slot + 1) % self.capacity
        self.count = min(self.count + 1, self.capacity)
        return True

    def oldest(self):
        if self.count == 0:
            return None
        return int(np.argmin(np.where(self.timestamps >= 0, self.timestamps, np.iinfo(np.int64).max)))


@dataclass
class StackResult:
    """Centre-pixel outputs written back to raster positions."""

    H: np.ndarray
    P: np.ndarray
    G: np.ndarray
    X: np.ndarray
    delta: np.ndarray
    B: np.ndarray
    q: np.ndarray
    e_photic: np.ndarray
    iterations: np.ndarray
    source: np.ndarray
    Y: np.ndarray
    S: np.ndarray
    scene_ids: list
    diagnostics: dict = field(default_factory=dict)

    @property
    def shape(self):
        return self.H.shape

    def k(self, optics: BandOptics):
        """Attenuation a + b_b, shape (N_s, n_bands, h, w)."""
        lam = optics.wavelengths[None, :, None, None]
        P, G, X = (v[:, None] for v in (self.P, self.G, self.X))
        with np.errstate(invalid="ignore", divide="ignore"):
            a = (optics.a_w[None, :, None, None]
                 + (optics.a0[None, :, None, None] + optics.a1[None, :, None, None] * np.log(P)) * P
                 + G * np.exp(-self.S[:, None, None, None] * (lam - 440.0)))
            bb = optics.b_bw[None, :, None, None] + X * (440.0 / lam) ** self.Y[:, None, None, None]
        return a + bb


def _empty_result(ns, nt, h, w, Y, S, ids):
    nan = lambda *s: np.full(s, np.nan)
    return StackResult(nan(h, w), nan(ns, h, w), nan(ns, h, w), nan(ns, h, w), nan(ns, h, w),
                       nan(nt, h, w), nan(nt, h, w), nan(h, w), np.zeros((h, w), np.int64),
                       np.zeros((h, w), np.uint8), np.asarray(Y, float), np.asarray(S, float), ids)


def build_model(stack: SceneStack, cfg: RunConfig, library=None, deep_mean=None) -> StackModel:
    if library is None:
        lib = spectral.select_library(cfg.type_names or None,
                                      None if cfg.type_names else cfg.n_types,
                                      cfg.bottom_library or None)
        library = spectral.library_matrix(lib, stack.bands)
    if np.isfinite(cfg.Y):
        Y = np.full(stack.n_scenes, cfg.Y)
    else:
        Y = np.array([estimate_Y_from_mean(deep_mean[j], stack.bands) for j in range(stack.n_scenes)])
    return StackModel(stack.bands, stack.geometry, stack.tides, library, cfg, Y)


def run_scene_stack(scenes: Sequence[Scene], cfg: RunConfig = RunConfig(), depth_prior=None,
                    deep_mask=None, library=None, init: StackResult | None = None,
                    pixels=None) -> StackResult:
    """Invert every valid pixel of a co-registered stack.

    ``depth_prior`` is an (h, w) datum-depth raster used as the initial H.
    ``init`` supplies per-pixel starting fits (water column and depth) from a
    previous run, bypassing hot/cold starts and the lookup table.  ``pixels``
    overrides the per-pixel spectra, shape (h*w, N_s, n_bands).
    """
    t_start = time.perf_counter()
    stack = SceneStack(scenes)
    if pixels is not None:
        stack.pixels = np.asarray(pixels, dtype=float)
    deep_mean = deep_mean_spectra(stack, deep_mask, cfg.deep_fraction)
    model = build_model(stack, cfg, library, deep_mean)
    ns, nt, nr = model.n_scenes, model.n_types, model.n_pixels
    h, w = stack.height, stack.width
    out = _empty_result(ns, nt, h, w, model.Y, model.S,
                        [s.metadata.scene_id for s in scenes])
    prior = None if depth_prior is None else np.asarray(depth_prior, dtype=float).ravel()

    order = order_pixels(stack.pixels[:, 0, :], deep_mean[0], stack.valid)
    use_lut = cfg.use_lut and init is None
    lut = DynamicLut(ns, len(stack.bands), cfg.lut_capacity, cfg.lut_match_mrad * 1e-3,
                     cfg.lut_adapt_after) if use_lut else None
    hot_thr = cfg.hot_start_mrad * 1e-3
    prev_region, prev_fit = None, None
    counts = dict(optimizer=0, lut=0, hot=0, cold=0, ladder=0, hot_retries=0, failed=0, lut_inserted=0)
    t_lut = t_opt = 0.0

    for flat in order:
        t0 = time.perf_counter()
        region = stack.region(flat, cfg.radius)
        fit = None
        if lut is not None:
            fit, _ = lut.query(region)
            if fit is not None:
                counts["lut"] += 1
        if fit is None:
            dp = None
            if prior is not None:
                dp = prior[region.indices]
                if not np.all(np.isfinite(dp)):
                    dp = None
            if init is not None:
                start = _init_from_result(init, region, model, flat)
            elif prev_fit is not None and should_hot_start(region, prev_region, hot_thr):
                start = hot_start(region, model, prev_fit, dp)
                counts["hot"] += 1
            else:
                start = cold_start(region, model, dp)
                counts["cold"] += 1
                if dp is None:
                    counts["ladder"] += 1
            try:
                fit = invert_region(region, start, model)
                if start.source == "hot" and hot_start_failed(fit, prev_fit):
                    counts["hot_retries"] += 1
                    retry = invert_region(region, cold_start(region, model, dp), model)
                    retry.iterations += fit.iterations
                    fit = retry if retry.e_photic < fit.e_photic else fit.copy(
                        iterations=retry.iterations)
            except (NumericalError, FloatingPointError, ValueError) as exc:
                log.warning("pixel %d failed: %s", flat, exc)
                counts["failed"] += 1
                out.source.flat[flat] = SOURCE_FAILED
                t_opt += time.perf_counter() - t0
                continue
            counts["optimizer"] += 1
            if lut is not None and lut.insert(region, fit):
                counts["lut_inserted"] += 1
            prev_region, prev_fit = region, fit
            _write(out, flat, fit, SOURCE_OPTIMIZER)
            t_opt += time.perf_counter() - t0
        else:
            _write(out, flat, fit, SOURCE_LUT)
            t_lut += time.perf_counter() - t0

    n_done = counts["optimizer"] + counts["lut"]
    out.diagnostics = {
        "pixels": int(stack.valid.sum()),
        "optimizer_pixels": counts["optimizer"],
        "lut_pixels": counts["lut"],
        "failed_pixels": counts["failed"],
        "hot_starts": counts["hot"],
        "cold_starts": counts["cold"],
        "hot_retries": counts["hot_retries"],
        "depth_ladder_runs": counts["ladder"],
        "lut_entries_inserted": counts["lut_inserted"],
        "lut_hit_rate": counts["lut"] / n_done if n_done else 0.0,
        "lut_insertion_threshold_pct": lut.insertion_threshold if lut else None,
        "time_optimizer_s": t_opt,
        "time_lut_s": t_lut,
        "optimizer_px_per_s": counts["optimizer"] / t_opt if t_opt > 0 else None,
        "lut_px_per_s": counts["lut"] / t_lut if t_lut > 0 else None,
        "time_total_s": time.perf_counter() - t_start,
        "Y": model.Y.tolist(),
        "n_scenes": ns,
        "n_pixels_region": nr,
        "n_types": nt,
    }
    return out


def _init_from_result(init: StackResult, region: Region, model: StackModel, flat) -> ModelFit:
    fit = cold_start(region, model)
    for name in ("P", "G", "X", "delta"):
        v = getattr(init, name).reshape(model.n_scenes, -1)[:, flat]
        if np.all(np.isfinite(v)):
            setattr(fit, name, v.copy())
    for name in ("B", "q"):
        v = getattr(init, name).reshape(model.n_types, -1)[:, region.indices]
        if np.all(np.isfinite(v)):
            setattr(fit, name, v.copy())
    H = init.H.ravel()[region.indices]
    if np.all(np.isfinite(H)):
        fit.H = H.copy()
    return fit


def _write(out: StackResult, flat, fit: ModelFit, source):
    c = fit.center
    r, col = divmod(int(flat), out.H.shape[1])
    out.H[r, col] = fit.H[c]
    out.P[:, r, col] = fit.P
    out.G[:, r, col] = fit.G
    out.X[:, r, col] = fit.X
    out.delta[:, r, col] = fit.delta
    out.B[:, r, col] = fit.B[:, c]
    out.q[:, r, col] = fit.q[:, c]
    out.e_photic[r, col] = fit.e_photic
    out.iterations[r, col] = fit.iterations if source == SOURCE_OPTIMIZER else 0
    out.source[r, col] = source
