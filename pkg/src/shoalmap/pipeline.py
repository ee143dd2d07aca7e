"""Multi-scene estimation: inversion over scene combinations, depth
averaging and alignment, attenuation averaging, a second bottom-unmixing
pass and Monte-Carlo depth error."""

from __future__ import annotations

import itertools
import json
import logging
import math
import os
import time
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import Sequence

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from shoalmap import engine, kernels, spectral
from shoalmap.config import RunConfig, load_config, parse_config
from shoalmap.empirical import (deep_water_stats, empirical_depth_raster, fit_empirical,
                                fit_weights, synthesize_depths, weighted_relative_rms)
from shoalmap.errors import DataError, FitError, NumericalError, UsageError
from shoalmap.forward import band_optics
from shoalmap.optimizer import Bounds, SimplexConfig, minimize, multi_start_minimize
from shoalmap.scene import Scene, SceneMetadata, read_raster, read_scene, write_raster
from shoalmap.soundings import SoundingSet, read_soundings

log = logging.getLogger(__name__)

ALIGN_B_RANGE = (0.5, 2.0)
ALIGN_CA_RANGE = (1e-3, 10.0)


def scene_combinations(n_scenes, max_size=4):
    """All non-empty index subsets up to ``max_size``, by size then lexicographically."""
    if n_scenes < 1:
        raise UsageError("need at least one scene")
    top = min(max_size, n_scenes)
    return [c for k in range(1, top + 1) for c in itertools.combinations(range(n_scenes), k)]


def weighted_median(values, weights):
    """Smallest value whose cumulative weight reaches half the total.

    On an exact half split this is the lower of the two middle values.
    NaN values are ignored; returns NaN when nothing is left.
    """
    v = np.asarray(values, dtype=float).ravel()
    w = np.asarray(weights, dtype=float).ravel()
    keep = np.isfinite(v) & (w > 0)
    v, w = v[keep], w[keep]
    if v.size == 0:
        return math.nan
    o = np.argsort(v, kind="mergesort")
    cum = np.cumsum(w[o])
    return float(v[o][np.searchsorted(cum, 0.5 * cum[-1], side="left")])


def weighted_median_depth(depths, weights=None):
    """Per-pixel weighted median over a (n, h, w) stack of datum depths.

    ``weights`` (one per layer) default to 1, i.e. a plain lower median.
    """
    stack = np.asarray(depths, dtype=float)
    if stack.ndim == 2:
        stack = stack[None]
    n = stack.shape[0]
    w = np.ones(n) if weights is None else np.asarray(weights, dtype=float)
    if w.shape != (n,):
        raise UsageError(f"need {n} weights, got {w.size}")
    flat = stack.reshape(n, -1)
    out = np.array([weighted_median(flat[:, i], w) for i in range(flat.shape[1])])
    return out.reshape(stack.shape[1:])


def median_filter(raster, size=3):
    """Edge-replicated NaN-aware median filter over the last two axes."""
    a = np.asarray(raster, dtype=float)
    if size <= 1:
        return a.copy()
    if size % 2 == 0:
        raise UsageError("median filter size must be odd")
    r = size // 2
    pad = [(0, 0)] * (a.ndim - 2) + [(r, r), (r, r)]
    win = sliding_window_view(np.pad(a, pad, mode="edge"), (size, size), axis=(-2, -1))
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        return np.nanmedian(win.reshape(win.shape[:-2] + (-1,)), axis=-1)


def tide_correct(H, tide=0.0, datum_offset=0.0):
    return np.asarray(H, dtype=float) + (float(tide) + float(datum_offset))


@dataclass(frozen=True)
class AlignmentCoefficients:
    c: np.ndarray
    a: np.ndarray
    b: np.ndarray
    fit_error: float = math.nan

    @classmethod
    def identity(cls, n):
        return cls(np.ones(n), np.ones(n), np.ones(n), math.nan)


def apply_alignment(coef: AlignmentCoefficients, depths):
    """``sum c_i a_i H_i^b_i / sum c_i`` over a (n, ...) depth stack."""
    H = np.asarray(depths, dtype=float)
    if H.ndim == 0 or H.shape[0] != len(coef.c):
        raise UsageError("one depth raster per coefficient set is required")
    shape = (-1,) + (1,) * (H.ndim - 1)
    c, a, b = (np.asarray(v, dtype=float).reshape(shape) for v in (coef.c, coef.a, coef.b))
    with np.errstate(invalid="ignore"):
        return (c * a * np.power(H, b)).sum(axis=0) / c.sum()


def align_depths(depths, soundings: SoundingSet, metadata: SceneMetadata = SceneMetadata(),
                 cfg: SimplexConfig = SimplexConfig(), depth_floor=1e-6):
    """Fit alignment coefficients of n depth rasters against soundings.

    Returns ``(coefficients, aligned raster)``, or ``(None, None)`` with a
    warning when fewer than 3n soundings fall on pixels where every raster
    has a positive depth.
    """
    H = np.asarray(depths, dtype=float)
    if H.ndim == 2:
        H = H[None]
    n = H.shape[0]
    samples = np.array([soundings.sample(h, metadata) for h in H])  # (n, N)
    ok = np.all(np.isfinite(samples) & (samples > depth_floor), axis=0)
    if ok.sum() < 3 * n:
        warnings.warn(f"alignment skipped: {int(ok.sum())} usable soundings for {n} rasters "
                      f"(need {3 * n})", RuntimeWarning, stacklevel=2)
        return None, None
    Hs, s = samples[:, ok], soundings.depths[ok]
    w = fit_weights(s)
    lo = np.concatenate([np.full(2 * n, ALIGN_CA_RANGE[0]), np.full(n, ALIGN_B_RANGE[0])])
    hi = np.concatenate([np.full(2 * n, ALIGN_CA_RANGE[1]), np.full(n, ALIGN_B_RANGE[1])])
    bounds = Bounds(lo, hi)

    def coef(x):
        return AlignmentCoefficients(x[:n], x[n:2 * n], x[2 * n:])

    def err(x):
        return weighted_relative_rms(apply_alignment(coef(x), Hs), s, w)

    res = minimize(err, np.ones(3 * n), bounds, cfg)
    best = coef(res.x)
    best = AlignmentCoefficients(best.c, best.a, best.b, float(res.fun))
    return best, apply_alignment(best, H)


def average_k(results: Sequence[engine.StackResult], optics):
    """Mean attenuation k = a + b_b over every (result, scene) pair.

    Returns ``(mean_k (n_bands, h, w), min_over_bands (h, w), per_scene)``
    where ``per_scene`` maps scene id to its own mean over results.
    """
    if not results:
        raise UsageError("no results to average")
    layers, per = [], {}
    for res in results:
        k = res.k(optics)
        for j, sid in enumerate(res.scene_ids):
            layers.append(k[j])
            per.setdefault(sid, []).append(k[j])
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        mean = np.nanmean(np.stack(layers), axis=0)
        per_scene = {sid: np.nanmean(np.stack(v), axis=0) for sid, v in per.items()}
    return mean, mean.min(axis=0), per_scene


# ------------------------------------------------------------------ unmixing

def _canonical(B, q):
    """Rewrite a mix so ``q`` are fractions summing to 1 and every B_i equals
    the total albedo scale; the modelled mixture is unchanged."""
    c = B * q / q.sum()
    total = c.sum()
    if total <= 0:
        return np.zeros_like(B), np.full_like(q, 1.0 / q.size)
    return np.full_like(B, total), c / total


def _rescale(B, q, lib, target):
    mix = (B * q) @ lib / q.sum()
    den = float(np.sum(mix * mix)) * target.shape[0]
    if den <= 0:
        return B
    return B * float(np.sum(target * mix[None, :])) / den


def unmix_spectrum(rho, library, cfg: SimplexConfig = SimplexConfig(), B_max=0.6):
    """Fit (B, q) to per-scene bottom albedos ``rho`` (N_s, n_bands).

    Returns ``(B, q, e_unmixed)`` with canonical fractions.  A closed-form
    rescale of B follows the simplex; it leaves the angle term unchanged and
    can only lower the relative RMS term.
    """
    target = np.ascontiguousarray(np.atleast_2d(np.asarray(rho, dtype=float)))
    lib = np.ascontiguousarray(np.atleast_2d(np.asarray(library, dtype=float)))
    nt = lib.shape[0]
    if not np.all(np.isfinite(target)):
        raise NumericalError("bottom albedo is not finite")
    args = (target, lib)
    scale = float(np.clip(target.mean() / max(lib.mean(), 1e-12), 1e-3, B_max))
    if nt == 1:
        B, q = np.array([scale]), np.ones(1)
    else:
        bounds = Bounds(np.concatenate([np.zeros(nt), np.full(nt, 1e-3)]),
                        np.concatenate([np.full(nt, B_max), np.full(nt, 1.0)]))
        starts = [np.concatenate([np.full(nt, scale), np.full(nt, 1.0 / nt)])]
        for i in range(nt):
            q0 = np.full(nt, 1e-3)
            q0[i] = 1.0
            starts.append(np.concatenate([np.full(nt, scale), q0]))
        res = multi_start_minimize(kernels.unmix_objective, starts, bounds, cfg, args=args)
        B, q = res.x[:nt].copy(), res.x[nt:].copy()
    B = _rescale(B, q, lib, target)
    B, q = _canonical(B, q)
    e = float(kernels.unmix_objective_numpy(np.concatenate([B, q]), args))
    return B, q, e


PAIR_MARGIN = 0.01


@dataclass
class BottomSearchResult:
    indices: tuple
    B: np.ndarray
    q: np.ndarray
    e_unmixed: float
    evaluated: list  # (indices, e_unmixed) for every candidate


def exhaustive_bottom_search(rho, library, cfg: SimplexConfig = SimplexConfig()) -> BottomSearchResult:
    """Try every single library spectrum and every unordered pair.

    A pair replaces a single type only when it lowers the error by more than
    ``PAIR_MARGIN`` (relative, plus 1e-12); otherwise the simpler bottom wins.
    """
    lib = np.atleast_2d(np.asarray(library, dtype=float))
    k = lib.shape[0]
    if k < 1:
        raise UsageError("empty bottom library")
    cands = [(i,) for i in range(k)] + list(itertools.combinations(range(k), 2))
    best, evaluated = None, []
    for idx in cands:
        B, q, e = unmix_spectrum(rho, lib[list(idx)], cfg)
        evaluated.append((idx, e))
        if best is None:
            better = True
        elif len(idx) > len(best.indices):
            better = e < best.e_unmixed * (1.0 - PAIR_MARGIN) - 1e-12
        else:
            better = e < best.e_unmixed
        if better:
            best = BottomSearchResult(idx, B, q, e, evaluated)
    return best


def rho_modelled_field(P, G, X, delta, H, scenes: Sequence[Scene], S, Y):
    """Implied bottom albedo per scene, (N_s, n_bands, h, w).

    Water column rasters are (N_s, h, w); H is the (h, w) datum depth.
    """
    bands = scenes[0].bands
    o = band_optics(bands)
    lam = o.wavelengths[:, None, None]
    out = []
    for j, sc in enumerate(scenes):
        g = sc.geometry
        with np.errstate(all="ignore"):
            a = (o.a_w[:, None, None] + (o.a0[:, None, None] + o.a1[:, None, None] * np.log(P[j])) * P[j]
                 + G[j] * np.exp(-S[j] * (lam - 440.0)))
            bb = o.b_bw[:, None, None] + X[j] * (440.0 / lam) ** Y[j]
            k = a + bb
            u = bb / k
            rinf = 0.084 * u + 0.170 * u * u
            kc = (g.inv_cos_sun + 1.03 * np.sqrt(1 + 2.4 * u) * g.inv_cos_view) * k
            kb = (g.inv_cos_sun + 1.04 * np.sqrt(1 + 5.4 * u) * g.inv_cos_view) * k
            Hj = np.maximum(H + sc.metadata.tide_offset, 0.0)
            x = sc.data.astype(float) - delta[j]
            r = 2.0 * x / (1.0 + 3.0 * x)
            out.append(np.pi * (r - rinf * (1 - np.exp(-kc * Hj))) / np.exp(-kb * Hj))
    return np.stack(out)


def unmix_bottom(P, G, X, delta, H, scenes: Sequence[Scene], library, cfg: RunConfig = RunConfig(),
                 S=None, Y=None):
    """Second pass: water column and depth fixed, fit B and q per pixel.

    The water-column rasters are median filtered first.  Pixels whose
    implied albedo is not finite are left NaN.
    """
    ns = len(scenes)
    P, G, X, delta = (median_filter(np.asarray(v, dtype=float), cfg.median_filter)
                      for v in (P, G, X, delta))
    S = np.full(ns, cfg.S) if S is None else np.asarray(S, dtype=float)
    Y = np.ones(ns) if Y is None else np.asarray(Y, dtype=float)
    rho = rho_modelled_field(P, G, X, delta, np.asarray(H, dtype=float), scenes, S, Y)
    lib = np.atleast_2d(np.asarray(library, dtype=float))
    nt = lib.shape[0]
    h, w = np.shape(H)
    B = np.full((nt, h, w), np.nan)
    q = np.full((nt, h, w), np.nan)
    e = np.full((h, w), np.nan)
    simplex = SimplexConfig(cfg.max_iterations, 1e-12, cfg.x_tolerance, 5, cfg.seed, cfg.initial_step)
    for i in range(h):
        for j in range(w):
            target = rho[:, :, i, j]
            if not np.all(np.isfinite(target)):
                continue
            try:
                bi, qi, ei = unmix_spectrum(target, lib, simplex, cfg.B_max)
            except (NumericalError, FitError):
                continue
            B[:, i, j], q[:, i, j], e[i, j] = bi, qi, ei
    return B, q, e


# ------------------------------------------------------------- depth error

def surface_noise_from_stats(stats, at=0.0):
    """Sensor noise in surface reflectance from subsurface deep-water spread."""
    r = np.asarray(stats.mean.values if at is None else at, dtype=float)
    return np.asarray(stats.stddev.values) * 0.5 / (1.0 - 1.5 * r) ** 2


def depth_error_estimate(scenes: Sequence[Scene], noise, cfg: RunConfig = RunConfig(),
                         n_trials=None, seed=None, baseline: engine.StackResult | None = None,
                         library=None, deep_mask=None, depth_prior=None):
    """Per-pixel spread of depth over noise-perturbed inversions.

    ``noise`` gives the uniform noise amplitude per scene and band in surface
    reflectance, shape (N_s, n_bands) or broadcastable.  Every trial starts
    from ``baseline`` (computed here when absent).  Returns
    ``(sigma_H, baseline)`` with sigma_H scaled by ``cfg.depth_error_scale``.
    """
    n_trials = cfg.depth_error_trials if n_trials is None else int(n_trials)
    if n_trials < 2:
        raise UsageError("depth error needs at least two trials")
    seed = cfg.seed if seed is None else seed
    stack = engine.SceneStack(scenes)
    amp = np.broadcast_to(np.asarray(noise, dtype=float), (stack.n_scenes, len(stack.bands)))
    if np.any(amp < 0):
        raise UsageError("noise amplitude must be non-negative")
    if baseline is None:
        baseline = engine.run_scene_stack(scenes, cfg, depth_prior, deep_mask, library)
    rng = np.random.default_rng(seed)
    depths = []
    for _ in range(n_trials):
        px = stack.pixels + rng.uniform(-1.0, 1.0, stack.pixels.shape) * amp[None]
        res = engine.run_scene_stack(scenes, cfg, depth_prior, deep_mask, library,
                                     init=baseline, pixels=px)
        depths.append(res.H)
    d = np.stack(depths)
    # shifting by the first trial keeps identical trials at exactly zero spread
    sigma = np.std(d - d[:1], axis=0) * cfg.depth_error_scale
    return sigma, baseline


# ---------------------------------------------------------------- pipeline

@dataclass
class PipelineManifest:
    scenes: list
    output: str
    soundings: str | None = None
    deep_mask: str | None = None
    config: str | None = None
    tides: list | None = None
    combinations: list | None = None
    empirical: bool = True
    align: bool = True
    unmix: bool = True
    depth_error: bool = False
    noise: list | None = None


def load_manifest(path) -> PipelineManifest:
    p = Path(path)
    try:
        doc = json.loads(p.read_text())
    except OSError as exc:
        raise DataError(f"cannot read manifest {p}: {exc}") from None
    except json.JSONDecodeError as exc:
        raise DataError(f"malformed manifest {p}: {exc}") from None
    known = set(PipelineManifest.__dataclass_fields__)
    unknown = set(doc) - known
    if unknown:
        raise UsageError(f"unknown manifest keys {sorted(unknown)}")
    if "scenes" not in doc or "output" not in doc:
        raise UsageError("manifest needs 'scenes' and 'output'")

    def rel(v):
        return None if v is None else str((p.parent / v) if not Path(v).is_absolute() else v)

    doc["scenes"] = [rel(s) for s in doc["scenes"]]
    for key in ("output", "soundings", "deep_mask", "config"):
        if key in doc:
            doc[key] = rel(doc[key])
    return PipelineManifest(**doc)


def _run_combination(payload):
    paths, tides, cfg, prior, mask, library = payload
    scenes = [read_scene(p) for p in paths]
    for sc, t in zip(scenes, tides):
        sc.metadata.tide_offset = t
    return engine.run_scene_stack(scenes, cfg, prior, mask, library)


def _write_result(out_dir: Path, name, res: engine.StackResult, meta: SceneMetadata):
    out_dir.mkdir(parents=True, exist_ok=True)
    ns, nt = res.P.shape[0], res.B.shape[0]
    layers = [res.H, res.e_photic, res.source.astype(float), res.iterations.astype(float)]
    names = ["H", "e_photic", "source", "iterations"]
    for j in range(ns):
        for key in ("P", "G", "X", "delta"):
            layers.append(getattr(res, key)[j])
            names.append(f"{key}{j}")
    for t in range(nt):
        layers += [res.B[t], res.q[t]]
        names += [f"B{t}", f"q{t}"]
    write_raster(out_dir / f"{name}.bin", np.stack(layers), names=names, metadata=meta)


def run_pipeline(manifest: PipelineManifest, cfg: RunConfig | None = None, sequential=False):
    """Run every stage named in the manifest and write rasters plus a JSON report."""
    t0 = time.perf_counter()
    if cfg is None:
        cfg = load_config(manifest.config) if manifest.config else RunConfig()
    out = Path(manifest.output)
    out.mkdir(parents=True, exist_ok=True)
    scenes = [read_scene(p) for p in manifest.scenes]
    if manifest.tides is not None:
        if len(manifest.tides) != len(scenes):
            raise UsageError(f"{len(manifest.tides)} tides for {len(scenes)} scenes")
        for sc, t in zip(scenes, manifest.tides):
            sc.metadata.tide_offset = float(t)
    tides = [sc.metadata.tide_offset for sc in scenes]
    meta = SceneMetadata(scene_id="pipeline", geotransform=scenes[0].metadata.geotransform,
                         nodata=scenes[0].metadata.nodata)
    report: dict = {"scenes": [sc.metadata.scene_id for sc in scenes], "stages": {}}

    mask = None
    if manifest.deep_mask:
        data, _, _ = read_raster(manifest.deep_mask)
        mask = data[0] > 0.5
    soundings = read_soundings(manifest.soundings) if manifest.soundings else None

    lib_map = spectral.select_library(cfg.type_names or None,
                                      None if cfg.type_names else cfg.n_types,
                                      cfg.bottom_library or None)
    library = spectral.library_matrix(lib_map, scenes[0].bands)

    prior = None
    if soundings is not None and manifest.empirical:
        per, errs = [], []
        for sc in scenes:
            stack = engine.SceneStack([sc])
            m = mask if mask is not None else engine.auto_deep_mask(stack, cfg.deep_fraction).reshape(sc.shape)
            stats = deep_water_stats(sc, m)
            coef = fit_empirical(sc, stats, soundings, cfg.simplex)
            per.append(empirical_depth_raster(coef, sc, stats))
            errs.append(coef.fit_error)
        prior = synthesize_depths(per, errs, tides)
        prior = np.where(np.isfinite(prior), np.clip(prior, cfg.H_min, cfg.H_max), np.nan)
        write_raster(out / "empirical_depth.bin", prior, names=["H"], metadata=meta)
        report["stages"]["empirical"] = {"fit_errors": errs}

    combos = ([tuple(c) for c in manifest.combinations] if manifest.combinations
              else scene_combinations(len(scenes), cfg.max_combination))
    payloads = [([manifest.scenes[i] for i in c], [tides[i] for i in c], cfg, prior, mask, library)
                for c in combos]
    if cfg.jobs > 1 and not sequential and len(payloads) > 1:
        with ProcessPoolExecutor(max_workers=min(cfg.jobs, os.cpu_count() or 1)) as ex:
            results = list(ex.map(_run_combination, payloads))
    else:
        results = [_run_combination(p) for p in payloads]
    combo_report = []
    for c, res in zip(combos, results):
        name = "combo_" + "_".join(str(i) for i in c)
        _write_result(out / "combinations", name, res, meta)
        combo_report.append({"scenes": list(c), "diagnostics": res.diagnostics})
    report["stages"]["combinations"] = combo_report

    weights = None if cfg.median_mode == "plain" else [len(c) for c in combos]
    depth = weighted_median_depth([r.H for r in results], weights)
    depth = tide_correct(depth, 0.0, cfg.datum_offset)
    write_raster(out / "depth_median.bin", depth, names=["H"], metadata=meta)
    final = depth

    if soundings is not None and manifest.align:
        with warnings.catch_warnings(record=True) as caught:
            warnings.simplefilter("always")
            coef, aligned = align_depths([r.H for r in results], soundings, scenes[0].metadata, cfg.simplex)
        if coef is None:
            report["stages"]["align"] = {"skipped": str(caught[-1].message) if caught else "skipped"}
        else:
            final = tide_correct(aligned, 0.0, cfg.datum_offset)
            write_raster(out / "depth_aligned.bin", final, names=["H"], metadata=meta)
            report["stages"]["align"] = {"c": coef.c.tolist(), "a": coef.a.tolist(),
                                         "b": coef.b.tolist(), "fit_error": coef.fit_error}

    optics = band_optics(scenes[0].bands)
    kmean, kmin, _ = average_k(results, optics)
    write_raster(out / "k_mean.bin", kmean, scenes[0].bands, meta)
    write_raster(out / "k_min.bin", kmin, names=["k_min"], metadata=meta)

    if manifest.unmix:
        per_scene = {name: [] for name in ("P", "G", "X", "delta")}
        for j in range(len(scenes)):
            for name in per_scene:
                layers = [getattr(r, name)[c.index(j)] for c, r in zip(combos, results) if j in c]
                with warnings.catch_warnings():
                    warnings.simplefilter("ignore", RuntimeWarning)
                    per_scene[name].append(np.nanmedian(np.stack(layers), axis=0))
        Ys = [np.median([r.Y[c.index(j)] for c, r in zip(combos, results) if j in c])
              for j in range(len(scenes))]
        B, q, e = unmix_bottom(*(np.stack(per_scene[n]) for n in ("P", "G", "X", "delta")),
                               final, scenes, library, cfg, Y=np.array(Ys))
        nt = library.shape[0]
        write_raster(out / "bottom.bin", np.concatenate([B, q, e[None]]),
                     names=[f"B{t}" for t in range(nt)] + [f"q{t}" for t in range(nt)] + ["e_unmixed"],
                     metadata=meta)
        report["stages"]["unmix"] = {"types": list(lib_map), "median_e_unmixed":
                                     float(np.nanmedian(e)) if np.isfinite(e).any() else None}

    if manifest.depth_error:
        if manifest.noise is None:
            raise UsageError("depth_error stage needs 'noise' amplitudes in the manifest")
        lead = tuple(range(min(len(scenes), cfg.max_combination)))
        baseline = dict(zip(combos, results)).get(lead)
        sigma, _ = depth_error_estimate([scenes[i] for i in lead], manifest.noise, cfg,
                                        baseline=baseline, library=library, deep_mask=mask,
                                        depth_prior=prior)
        write_raster(out / "depth_sigma.bin", sigma, names=["sigma_H"], metadata=meta)
        report["stages"]["depth_error"] = {"median_sigma": float(np.nanmedian(sigma))}

    if soundings is not None:
        from shoalmap.report import regression_report
        try:
            report["regression"] = regression_report(final, soundings, meta).as_dict()
        except UsageError as exc:
            report["regression"] = {"skipped": str(exc)}
    report["config"] = asdict(cfg)
    report["time_s"] = time.perf_counter() - t0
    report = to_json_safe(report)
    (out / "report.json").write_text(json.dumps(report, indent=2))
    return report


def to_json_safe(v):
    """Recursively convert numpy values to plain Python; non-finite floats become None."""
    if isinstance(v, dict):
        return {str(k): to_json_safe(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [to_json_safe(x) for x in v]
    if isinstance(v, np.ndarray):
        return to_json_safe(v.tolist())
    if isinstance(v, np.generic):
        v = v.item()
    if isinstance(v, float) and not math.isfinite(v):
        return None
    return v
