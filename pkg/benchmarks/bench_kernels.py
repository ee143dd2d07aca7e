"""Compare the numba kernels with their numpy twins.

    python3 benchmarks/bench_kernels.py [--repeat N]

Each kernel runs on a Table-3 sized region (2 scenes, 3x3 pixels, 2 bottom
types).  The simplex comparison minimises the same region objective with
the compiled loop and with the Python loop.
"""

import argparse
import sys
import time
from pathlib import Path

import numpy as np

sys.path.insert(0, str(Path(__file__).resolve().parents[1] / "tests"))

from shoalmap import _accel, engine, kernels, spectral  # noqa: E402
from shoalmap.config import RunConfig  # noqa: E402
from shoalmap.forward import Geometry  # noqa: E402
from shoalmap.optimizer import SimplexConfig, axis_simplex, nelder_mead_numba, nelder_mead_py  # noqa: E402
from table3_data import BANDS, SUN_ELEVATION, spectra  # noqa: E402


def best_of(fn, repeat, number):
    times = []
    for _ in range(repeat):
        t = time.perf_counter()
        for _ in range(number):
            fn()
        times.append((time.perf_counter() - t) / number)
    return min(times)


def setup():
    bands = spectral.BandSet(BANDS)
    cfg = RunConfig(n_types=2)
    lib = spectral.library_matrix(spectral.select_library(None, 2), bands)
    geo = [Geometry.from_sun_elevation(e) for e in SUN_ELEVATION]
    model = engine.StackModel(bands, geo, [0.0, 0.0], lib, cfg, [1.2, 1.4])
    region = engine.Region(4, np.arange(9), spectra(), np.zeros(2))
    x = model.bounds.clip(engine.pack(engine.cold_start(region, model, np.full(9, 15.0))))
    return model, region, x


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--iterations", type=int, default=2000, help="simplex iterations")
    args = ap.parse_args(argv)
    if not _accel.NUMBA_AVAILABLE:
        print("numba is not installed; nothing to compare")
        return 0

    model, region, x = setup()
    a = model.args(region)
    keys = np.random.default_rng(0).random((256, 2, 4))
    keys /= np.linalg.norm(keys, axis=-1, keepdims=True)
    query = keys[17] * 1.0001
    rho = np.ascontiguousarray(spectra()[:, 4, :] * 40)
    lib = np.ascontiguousarray(model.library)
    u = np.array([0.3, 0.3, 0.5, 0.5])

    cases = [
        ("region reflectance", lambda: kernels.region_rrs_numba(x, a), lambda: kernels.region_rrs_numpy(x, a)),
        ("region objective", lambda: kernels.objective_numba(x, a), lambda: kernels.objective_numpy(x, a)),
        ("unmix objective", lambda: kernels.unmix_objective_numba(u, (rho, lib)),
         lambda: kernels.unmix_objective_numpy(u, (rho, lib))),
        ("lut search (256)", lambda: kernels.lut_search_numba(keys, 256, query),
         lambda: kernels.lut_search_numpy(keys, 256, query)),
    ]
    print(f"{'kernel':<22}{'numba us':>12}{'numpy us':>12}{'speedup':>10}")
    for name, fast, slow in cases:
        fast()  # compile
        tf = best_of(fast, args.repeat, 2000)
        ts = best_of(slow, args.repeat, 200)
        print(f"{name:<22}{tf * 1e6:>12.2f}{ts * 1e6:>12.2f}{ts / tf:>10.1f}")

    cfg = SimplexConfig(max_iterations=args.iterations, f_tolerance=1e-300, x_tolerance=1e-300)
    b = model.bounds
    sx = axis_simplex(x, b, cfg.initial_step)

    def run(core, fun):
        fv = np.array([fun(v, a) for v in sx])
        return core(fun, a, sx.copy(), fv, b.lower, b.upper, cfg.max_iterations,
                    cfg.f_tolerance, cfg.x_tolerance)

    run(nelder_mead_numba, kernels.objective_numba)
    tf = best_of(lambda: run(nelder_mead_numba, kernels.objective_numba), args.repeat, 1)
    ts = best_of(lambda: run(nelder_mead_py, kernels.objective_numpy), max(1, args.repeat // 2), 1)
    print(f"{'simplex x' + str(args.iterations):<22}{tf * 1e3:>11.1f}m{ts * 1e3:>11.1f}m{ts / tf:>10.1f}")
    print("(simplex row in milliseconds per run)")
    return 0


if __name__ == "__main__":
    sys.exit(main())
