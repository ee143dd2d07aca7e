"""Command line entry point: ``shoalmap <command> ...``."""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from shoalmap import engine, spectral
from shoalmap.config import RunConfig, load_config
from shoalmap.errors import DataError, NumericalError, ShoalmapError, UsageError
from shoalmap.scene import SceneMetadata, read_raster, read_scene, write_raster, write_scene

log = logging.getLogger("shoalmap")

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_NUMERICAL = 0, 1, 2, 3


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(f"{self.prog}: {message}")


def _floats(text):
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


def _common():
    p = argparse.ArgumentParser(add_help=False)
    p.add_argument("--config", help="key=value run configuration file")
    p.add_argument("--seed", type=int, help="random seed (overrides config)")
    p.add_argument("--sequential", action="store_true",
                   help="single process, deterministic path")
    p.add_argument("--no-lut", action="store_true", help="disable the lookup table")
    p.add_argument("--jobs", type=int, help="worker processes for independent runs")
    p.add_argument("-v", "--verbose", action="count", default=0)
    return p


def build_parser():
    common = _common()
    root = _Parser(prog="shoalmap", description="Shallow-water depth, turbidity and bottom "
                   "retrieval from multispectral reflectance.")
    sub = root.add_subparsers(dest="command", metavar="command", parser_class=_Parser)
    sub.required = True

    p = sub.add_parser("synth", parents=[common], help="write a forward-model scene with truth")
    p.add_argument("out", help="output raster path (.bin)")
    p.add_argument("--width", type=int, default=32)
    p.add_argument("--height", type=int, default=32)
    p.add_argument("--depth", type=_floats, default=[1.0, 25.0],
                   help="constant depth, or shallow,deep for a ramp along columns")
    p.add_argument("--P", type=float, default=0.05)
    p.add_argument("--G", type=float, default=0.06)
    p.add_argument("--X", type=float, default=0.014)
    p.add_argument("--delta", type=float, default=0.0008)
    p.add_argument("--Y", type=float, default=1.2)
    p.add_argument("--S", type=float, default=0.015)
    p.add_argument("--B", type=_floats, default=[0.4], help="albedo scale per bottom type")
    p.add_argument("--q", type=_floats, help="mixing weights per bottom type (default 1)")
    p.add_argument("--bands", type=_floats, help="band centres in nm")
    p.add_argument("--sun-elevation", type=float, default=55.0)
    p.add_argument("--tide", type=float, default=0.0)
    p.add_argument("--noise", type=float, default=0.0, help="uniform noise amplitude (sr^-1)")
    p.add_argument("--scene-id", default="synthetic")

    p = sub.add_parser("fit-empirical", parents=[common], help="empirical depth from soundings")
    p.add_argument("scenes", nargs="+")
    p.add_argument("--soundings", required=True, help="CSV with header x,y,depth_m")
    p.add_argument("--deep-mask", help="0/1 raster of optically deep water")
    p.add_argument("--out", required=True, help="output depth raster")
    p.add_argument("--mode", choices=("median", "weighted"), default="median")

    p = sub.add_parser("invert", parents=[common], help="invert one co-registered scene stack")
    p.add_argument("scenes", nargs="+")
    p.add_argument("--out", required=True, help="output raster path")
    p.add_argument("--depth-prior", help="initial depth raster")
    p.add_argument("--deep-mask", help="0/1 raster of optically deep water")
    p.add_argument("--report", help="JSON diagnostics path (default beside --out)")

    p = sub.add_parser("pipeline", parents=[common], help="run the multi-scene pipeline")
    p.add_argument("manifest", help="JSON manifest")

    p = sub.add_parser("depth-error", parents=[common], help="Monte-Carlo depth uncertainty")
    p.add_argument("scenes", nargs="+")
    p.add_argument("--noise", type=_floats, required=True,
                   help="noise amplitude, one value or one per band")
    p.add_argument("--trials", type=int)
    p.add_argument("--out", required=True)
    p.add_argument("--deep-mask")

    p = sub.add_parser("unmix", parents=[common], help="refit bottom composition on a fixed water column")
    p.add_argument("result", help="raster written by 'invert'")
    p.add_argument("scenes", nargs="+")
    p.add_argument("--out", required=True)
    p.add_argument("--exhaustive", action="store_true",
                   help="search every single type and pair instead of the configured mix")

    p = sub.add_parser("report", parents=[common], help="compare a depth raster with soundings")
    p.add_argument("depth")
    p.add_argument("--soundings", required=True)
    p.add_argument("--json", help="write the report as JSON")
    return root


def _config(args) -> RunConfig:
    cfg = load_config(args.config) if args.config else RunConfig()
    changes = {}
    if args.seed is not None:
        changes["seed"] = args.seed
    if args.no_lut:
        changes["use_lut"] = False
    if args.jobs is not None:
        changes["jobs"] = args.jobs
    if args.sequential:
        changes["jobs"] = 1
    return cfg.replace(**changes) if changes else cfg


def _mask(path):
    if not path:
        return None
    data = read_raster(path)[0]
    return data[0] > 0.5


def _library(cfg, bands):
    lib = spectral.select_library(cfg.type_names or None, None if cfg.type_names else cfg.n_types,
                                  cfg.bottom_library or None)
    return lib, spectral.library_matrix(lib, bands)


def cmd_synth(args, cfg):
    from shoalmap import synthetic as syn
    d = args.depth
    if len(d) == 1:
        H = np.full((args.height, args.width), d[0])
    elif len(d) == 2:
        H = syn.depth_ramp(args.height, args.width, d[0], d[1])
    else:
        raise UsageError("--depth takes one or two values")
    B = args.B
    q = args.q or [1.0] * len(B)
    if len(q) != len(B):
        raise UsageError("--B and --q need the same number of values")
    names = cfg.type_names or list(spectral.default_bottom_library())[:len(B)]
    lib = spectral.select_library(names, None, cfg.bottom_library or None)
    truth = syn.SyntheticTruth.uniform(H, args.P, args.G, args.X, args.delta, B=B, q=q,
                                       S=args.S, Y=args.Y, type_names=list(lib))
    meta = SceneMetadata(scene_id=args.scene_id, sun_elevation=args.sun_elevation,
                         tide_offset=args.tide)
    seed = cfg.seed
    scene = syn.generate_synthetic_scene(truth, bands=tuple(args.bands or syn.DEFAULT_BANDS),
                                         library=lib, noise=args.noise, seed=seed, metadata=meta)
    write_scene(args.out, scene)
    syn.write_truth(args.out, truth, meta)
    print(f"wrote {Path(args.out).with_suffix('.bin')} ({scene.height}x{scene.width}, "
          f"{len(scene.bands)} bands)")


def cmd_fit_empirical(args, cfg):
    from shoalmap.empirical import (deep_water_stats, empirical_depth_raster, fit_empirical,
                                    synthesize_depths)
    from shoalmap.soundings import read_soundings
    snd = read_soundings(args.soundings)
    mask = _mask(args.deep_mask)
    per, errs, coefs = [], [], []
    scenes = [read_scene(p) for p in args.scenes]
    for sc in scenes:
        m = mask if mask is not None else engine.auto_deep_mask(
            engine.SceneStack([sc]), cfg.deep_fraction).reshape(sc.shape)
        stats = deep_water_stats(sc, m)
        c = fit_empirical(sc, stats, snd, cfg.simplex)
        per.append(empirical_depth_raster(c, sc, stats))
        errs.append(c.fit_error)
        coefs.append({"scene": sc.metadata.scene_id, "h": c.h.tolist(), "fit_error": c.fit_error,
                      "bands": [scenes[0].bands.centers[i] for i in c.band_indices],
                      "soundings_used": c.n_soundings})
    H = synthesize_depths(per, errs, [sc.metadata.tide_offset for sc in scenes], args.mode)
    write_raster(args.out, H, names=["H"], metadata=scenes[0].metadata)
    Path(args.out).with_suffix(".coefficients.json").write_text(json.dumps(coefs, indent=2))
    for c in coefs:
        print(f"{c['scene']}: E_empirical = {c['fit_error']:.4f} ({c['soundings_used']} soundings)")


def _write_stack_result(path, res: engine.StackResult, meta):
    from shoalmap.pipeline import _write_result
    p = Path(path)
    _write_result(p.parent, p.stem, res, meta)


def cmd_invert(args, cfg):
    from shoalmap.pipeline import to_json_safe
    scenes = [read_scene(p) for p in args.scenes]
    prior = read_raster(args.depth_prior)[0][0] if args.depth_prior else None
    _, library = _library(cfg, scenes[0].bands)
    res = engine.run_scene_stack(scenes, cfg, prior, _mask(args.deep_mask), library)
    _write_stack_result(args.out, res, scenes[0].metadata)
    rep = Path(args.report) if args.report else Path(args.out).with_suffix(".report.json")
    doc = {"scenes": res.scene_ids, "diagnostics": res.diagnostics, "seed": cfg.seed,
           "use_lut": cfg.use_lut}
    rep.write_text(json.dumps(to_json_safe(doc), indent=2))
    d = res.diagnostics
    print(f"inverted {d['pixels']} pixels: {d['optimizer_pixels']} optimizer, "
          f"{d['lut_pixels']} lookup, {d['failed_pixels']} failed in {d['time_total_s']:.1f} s")
    return EXIT_NUMERICAL if d["pixels"] and d["failed_pixels"] == d["pixels"] else EXIT_OK


def cmd_pipeline(args, cfg):
    from shoalmap.pipeline import load_manifest, run_pipeline
    man = load_manifest(args.manifest)
    if args.config is None and man.config:
        cfg = _config(argparse.Namespace(**{**vars(args), "config": man.config}))
    rep = run_pipeline(man, cfg, sequential=args.sequential)
    n = len(rep["stages"]["combinations"])
    print(f"{n} combinations written to {man.output} in {rep['time_s']:.1f} s")


def cmd_depth_error(args, cfg):
    from shoalmap.pipeline import depth_error_estimate
    scenes = [read_scene(p) for p in args.scenes]
    noise = np.asarray(args.noise)
    if noise.size not in (1, len(scenes[0].bands)):
        raise UsageError(f"--noise needs 1 or {len(scenes[0].bands)} values")
    _, library = _library(cfg, scenes[0].bands)
    sigma, _ = depth_error_estimate(scenes, noise, cfg, args.trials, library=library,
                                    deep_mask=_mask(args.deep_mask))
    write_raster(args.out, sigma, names=["sigma_H"], metadata=scenes[0].metadata)
    print(f"median sigma_H = {float(np.nanmedian(sigma)):.4f} m")


def _layers(path):
    data, bands, meta = read_raster(path)
    names = list(bands.names or ())
    return {n: data[i].astype(float) for i, n in enumerate(names)}, meta


def cmd_unmix(args, cfg):
    from shoalmap.pipeline import exhaustive_bottom_search, rho_modelled_field, unmix_bottom
    layers, meta = _layers(args.result)
    scenes = [read_scene(p) for p in args.scenes]
    ns = len(scenes)
    try:
        P, G, X, D = (np.stack([layers[f"{k}{j}"] for j in range(ns)]) for k in ("P", "G", "X", "delta"))
        H = layers["H"]
    except KeyError as exc:
        raise DataError(f"{args.result}: layer {exc} missing (is it an 'invert' output?)") from None
    stack = engine.SceneStack(scenes)
    Y = np.array([engine.estimate_Y_from_mean(m, stack.bands)
                  for m in engine.deep_mean_spectra(stack, None, cfg.deep_fraction)])
    if np.isfinite(cfg.Y):
        Y[:] = cfg.Y
    lib_map, library = _library(cfg, scenes[0].bands)
    if args.exhaustive:
        full = spectral.default_bottom_library() if not cfg.bottom_library else \
            spectral.load_bottom_spectra(cfg.bottom_library)
        names = list(full)
        mat = spectral.library_matrix(full, scenes[0].bands)
        rho = rho_modelled_field(P, G, X, D, H, scenes, np.full(ns, cfg.S), Y)
        h, w = H.shape
        best = np.full((h, w), -1.0)
        e = np.full((h, w), np.nan)
        pairs = []
        for i in range(h):
            for j in range(w):
                t = rho[:, :, i, j]
                if not np.all(np.isfinite(t)):
                    continue
                r = exhaustive_bottom_search(t, mat, cfg.simplex)
                e[i, j] = r.e_unmixed
                key = r.indices
                if key not in pairs:
                    pairs.append(key)
                best[i, j] = pairs.index(key)
        write_raster(args.out, np.stack([best, e]), names=["candidate", "e_unmixed"], metadata=meta)
        legend = {i: [names[k] for k in key] for i, key in enumerate(pairs)}
        Path(args.out).with_suffix(".legend.json").write_text(json.dumps(legend, indent=2))
        print(f"exhaustive search over {len(names)} types: {len(pairs)} distinct winners")
        return
    B, q, e = unmix_bottom(P, G, X, D, H, scenes, library, cfg, Y=Y)
    nt = library.shape[0]
    write_raster(args.out, np.concatenate([B, q, e[None]]),
                 names=[f"B{t}" for t in range(nt)] + [f"q{t}" for t in range(nt)] + ["e_unmixed"],
                 metadata=meta)
    print(f"unmixed {int(np.isfinite(e).sum())} pixels into {list(lib_map)}")


def cmd_report(args, cfg):
    from shoalmap.report import regression_report
    from shoalmap.soundings import read_soundings
    data, _, meta = read_raster(args.depth)
    rep = regression_report(data[0].astype(float), read_soundings(args.soundings), meta)
    print(rep.table())
    if args.json:
        from shoalmap.pipeline import to_json_safe
        Path(args.json).write_text(json.dumps(to_json_safe(rep.as_dict()), indent=2))


COMMANDS = {
    "synth": cmd_synth,
    "fit-empirical": cmd_fit_empirical,
    "invert": cmd_invert,
    "pipeline": cmd_pipeline,
    "depth-error": cmd_depth_error,
    "unmix": cmd_unmix,
    "report": cmd_report,
}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        logging.basicConfig(level=logging.WARNING - 10 * min(args.verbose, 2),
                            format="%(levelname)s %(name)s: %(message)s")
        cfg = _config(args)
        status = COMMANDS[args.command](args, cfg)
        return EXIT_OK if status is None else int(status)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (DataError, OSError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except (NumericalError, FloatingPointError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except ShoalmapError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
