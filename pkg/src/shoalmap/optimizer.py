"""Box-constrained Nelder-Mead with restarts and multi-start search.

The simplex loop is written once.  It runs compiled (``nelder_mead_numba``)
when the objective is itself a numba function and the accelerated path is on,
otherwise as ordinary Python (``nelder_mead_py``).  Proposed vertices are
clamped into the box; non-finite objective values count as +inf.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, NamedTuple, Sequence

import numpy as np

from shoalmap._accel import USE_NUMBA, is_jitted, njit
from shoalmap.errors import FitError, UsageError

# Starting depths (m) for cold starts without a depth prior.
DEPTH_LADDER = (0.1, 0.5, 1.0, 1.5, 2.0, 3.0, 4.0, 5.0, 6.0, 8.0,
                10.0, 12.5, 15.0, 17.5, 20.0, 25.0, 30.0)

REFLECT, EXPAND, CONTRACT, SHRINK = 1.0, 2.0, 0.5, 0.5


@dataclass(frozen=True)
class Bounds:
    lower: np.ndarray
    upper: np.ndarray

    def __post_init__(self):
        lo = np.asarray(self.lower, dtype=float)
        hi = np.asarray(self.upper, dtype=float)
        if lo.shape != hi.shape or lo.ndim != 1:
            raise UsageError("bounds must be 1-D arrays of equal length")
        if np.any(lo >= hi):
            raise UsageError("lower bounds must be strictly below upper bounds")
        object.__setattr__(self, "lower", lo)
        object.__setattr__(self, "upper", hi)

    def __len__(self):
        return self.lower.size

    def contains(self, x):
        x = np.asarray(x)
        return bool(np.all(x >= self.lower) and np.all(x <= self.upper))

    def clip(self, x):
        return np.minimum(np.maximum(x, self.lower), self.upper)


@dataclass(frozen=True)
class SimplexConfig:
    max_iterations: int = 20000
    f_tolerance: float = 1e-9
    x_tolerance: float = 1e-8
    restarts: int = 2
    rng_seed: int = 0
    initial_step: float = 0.05
    # relative part of the spread tolerance: converged when the spread is at
    # most f_tolerance + f_rtol * |f_best|
    f_rtol: float = 0.0

    def __post_init__(self):
        if self.max_iterations <= 0 or self.restarts < 0:
            raise UsageError("iteration counts must be positive")
        if self.f_tolerance <= 0 or self.x_tolerance <= 0 or self.initial_step <= 0:
            raise UsageError("tolerances and step must be positive")
        if self.f_rtol < 0:
            raise UsageError("relative tolerance must be non-negative")


class MinimizeResult(NamedTuple):
    x: np.ndarray
    fun: float
    iterations: int
    nfev: int = 0


def _nelder_mead(fun, args, simplex, fvals, lower, upper, max_iter, ftol, xtol, frtol=0.0):
    n = simplex.shape[1]
    span = upper - lower
    it = 0
    nfev = 0
    while True:
        order = np.argsort(fvals, kind="mergesort")
        simplex = simplex[order]
        fvals = fvals[order]
        if fvals[n] - fvals[0] <= ftol + frtol * abs(fvals[0]):
            break
        xs = 0.0
        for i in range(1, n + 1):
            for d in range(n):
                v = abs(simplex[i, d] - simplex[0, d]) / span[d]
                if v > xs:
                    xs = v
        if xs <= xtol or it >= max_iter:
            break
        it += 1
        c = simplex[:n].sum(axis=0) / n
        worst = simplex[n]
        xr = np.minimum(np.maximum(c + REFLECT * (c - worst), lower), upper)
        fr = fun(xr, args)
        nfev += 1
        if not np.isfinite(fr):
            fr = np.inf
        if fr < fvals[0]:
            xe = np.minimum(np.maximum(c + EXPAND * (c - worst), lower), upper)
            fe = fun(xe, args)
            nfev += 1
            if not np.isfinite(fe):
                fe = np.inf
            if fe < fr:
                simplex[n] = xe
                fvals[n] = fe
            else:
                simplex[n] = xr
                fvals[n] = fr
            continue
        if fr < fvals[n - 1]:
            simplex[n] = xr
            fvals[n] = fr
            continue
        if fr < fvals[n]:
            xc = np.minimum(np.maximum(c + CONTRACT * (xr - c), lower), upper)
            accept_at = fr
        else:
            xc = np.minimum(np.maximum(c + CONTRACT * (worst - c), lower), upper)
            accept_at = fvals[n]
        fc = fun(xc, args)
        nfev += 1
        if not np.isfinite(fc):
            fc = np.inf
        if fc < accept_at or (fr < fvals[n] and fc <= fr):
            simplex[n] = xc
            fvals[n] = fc
            continue
        for i in range(1, n + 1):
            simplex[i] = simplex[0] + SHRINK * (simplex[i] - simplex[0])
            f = fun(simplex[i], args)
            nfev += 1
            fvals[i] = f if np.isfinite(f) else np.inf
    return simplex[0].copy(), fvals[0], it, nfev


nelder_mead_py = _nelder_mead
nelder_mead_numba = njit(_nelder_mead)


def _evaluate(fun, args, pts):
    out = np.empty(len(pts))
    for i, p in enumerate(pts):
        v = float(fun(p, args))
        out[i] = v if np.isfinite(v) else np.inf
    return out


def axis_simplex(x0, bounds: Bounds, step):
    """x0 plus one vertex per coordinate, stepped ``step * span`` inward."""
    x0 = np.asarray(x0, dtype=float)
    n = x0.size
    span = bounds.upper - bounds.lower
    s = max(step, 1e-9) * span
    verts = np.tile(x0, (n + 1, 1))
    for d in range(n):
        up = x0[d] + s[d]
        verts[d + 1, d] = up if up <= bounds.upper[d] else x0[d] - s[d]
    return bounds.clip(verts)


def random_initial_simplex(x0, bounds: Bounds, scale, rng, max_tries=20):
    """Randomly perturbed simplex around ``x0`` inside the box.

    Each coordinate moves by at most ``scale * (upper - lower)``; ``scale`` is
    floored at 1e-9 so the simplex never collapses onto ``x0``.
    """
    x0 = np.asarray(x0, dtype=float)
    n = x0.size
    span = bounds.upper - bounds.lower
    s = max(float(scale), 1e-9)
    for _ in range(max_tries):
        v = bounds.clip(x0 + rng.uniform(-1.0, 1.0, size=(n, n)) * s * span)
        d = (v - x0) / span
        if np.linalg.matrix_rank(d, tol=1e-12 * s) == n:
            return np.vstack([x0, v])
    return axis_simplex(x0, bounds, s)


def _resolve(f, args):
    if args is None:
        return (lambda x, _a: f(x)), ()
    return f, args


def minimize(f: Callable, x0, bounds: Bounds, cfg: SimplexConfig = SimplexConfig(),
             args=None, simplex=None) -> MinimizeResult:
    """Minimise ``f`` inside ``bounds`` starting from ``x0``.

    ``f`` is called as ``f(x)``, or ``f(x, args)`` when ``args`` is given.
    Each simplex run is capped at ``cfg.max_iterations``.  After a run the
    search restarts from a fresh axis simplex at the incumbent, up to
    ``cfg.restarts`` times, stopping once a restart gains less than
    ``cfg.f_tolerance + cfg.f_rtol * |f|``.  Restarting is what keeps the simplex from
    stalling in higher dimensions.
    """
    x0 = np.asarray(x0, dtype=float)
    if x0.shape != bounds.lower.shape:
        raise UsageError(f"x0 has {x0.size} entries, bounds have {len(bounds)}")
    if not bounds.contains(x0):
        raise UsageError("x0 outside bounds")
    fun, args = _resolve(f, args)
    f0 = float(fun(x0, args))
    if not np.isfinite(f0):
        raise FitError("objective is not finite at the starting point")
    core = nelder_mead_numba if (USE_NUMBA and is_jitted(fun)) else nelder_mead_py

    sx = axis_simplex(x0, bounds, cfg.initial_step) if simplex is None else np.array(simplex, dtype=float)
    best_x, best_f, iters, nfev = x0, f0, 0, 1
    for attempt in range(cfg.restarts + 1):
        fv = _evaluate(fun, args, sx)
        nfev += len(sx)
        x, fx, it, ne = core(fun, args, sx, fv, bounds.lower, bounds.upper,
                             cfg.max_iterations, cfg.f_tolerance, cfg.x_tolerance, cfg.f_rtol)
        iters += int(it)
        nfev += int(ne)
        gain = best_f - fx
        if fx < best_f:
            best_x, best_f = x, float(fx)
        if attempt > 0 and gain < cfg.f_tolerance + cfg.f_rtol * abs(best_f):
            break
        sx = axis_simplex(best_x, bounds, cfg.initial_step)
    return MinimizeResult(np.asarray(best_x), best_f, iters, nfev)


def multi_start_minimize(f: Callable, starts: Sequence, bounds: Bounds,
                         cfg: SimplexConfig = SimplexConfig(), args=None,
                         randomize=False) -> MinimizeResult:
    """Run ``minimize`` from every start and keep the best.

    With ``randomize`` each start gets a pseudo-random initial simplex drawn
    from ``cfg.rng_seed``; the reported iteration count is the total.
    """
    if len(starts) == 0:
        raise UsageError("multi-start search needs at least one start")
    rng = np.random.default_rng(cfg.rng_seed)
    best = None
    total = 0
    nfev = 0
    for x0 in starts:
        sx = random_initial_simplex(x0, bounds, cfg.initial_step, rng) if randomize else None
        res = minimize(f, x0, bounds, cfg, args=args, simplex=sx)
        total += res.iterations
        nfev += res.nfev
        if best is None or res.fun < best.fun:
            best = res
    return MinimizeResult(best.x, best.fun, total, nfev)
