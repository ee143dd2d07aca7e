"""Hot inner loops: region reflectance model, combined region objective,
unmixing objective and lookup-table search.

Each kernel exists twice: an explicit-loop version compiled with numba and a
vectorised numpy version.  ``objective``/``unmix_objective``/``lut_search``
point at whichever path ``_accel.USE_NUMBA`` selects; the ``*_numba`` and
``*_numpy`` names are always importable for cross-checks and benchmarks.

Parameter vector layout for a region with N_s scenes, N_r pixels and N_b
bottom types::

    [P_0, G_0, X_0, D_0, ..., P_{Ns-1}, G_{Ns-1}, X_{Ns-1}, D_{Ns-1},
     H_0 .. H_{Nr-1},
     B[0, 0..Nr-1], ..., B[Nb-1, 0..Nr-1],
     q[0, 0..Nr-1], ..., q[Nb-1, 0..Nr-1]]

Objective ``args`` tuple (see ``objective_args``)::

    (measured (Ns, Nr, nb), lam, a_w, b_bw, a0, a1, library (Nb, nb),
     S (Ns,), Y (Ns,), inv_cos_sun (Ns,), inv_cos_view (Ns,), tides (Ns,),
     w_spectral, w_depth, kappa)
"""

import math

import numpy as np

from shoalmap._accel import USE_NUMBA, njit


def n_params(n_scenes, n_pixels, n_types):
    return n_pixels + 2 * n_types * n_pixels + 4 * n_scenes


def objective_args(measured, optics, library, S, Y, inv_cos_sun, inv_cos_view, tides,
                   w_spectral=0.85, w_depth=0.15, kappa=0.1):
    f = lambda v: np.ascontiguousarray(v, dtype=np.float64)
    return (f(measured), f(optics.wavelengths), f(optics.a_w), f(optics.b_bw),
            f(optics.a0), f(optics.a1), f(np.atleast_2d(library)),
            f(S), f(Y), f(inv_cos_sun), f(inv_cos_view), f(tides),
            float(w_spectral), float(w_depth), float(kappa))


# ---------------------------------------------------------------- numpy path

def region_rrs_numpy(x, args):
    measured, lam, a_w, b_bw, a0, a1, lib, S, Y, isun, iview, tides = args[:12]
    ns, nr, _ = measured.shape
    nt = lib.shape[0]
    wc = x[:4 * ns].reshape(ns, 4)
    P, G, X, D = wc[:, 0:1], wc[:, 1:2], wc[:, 2:3], wc[:, 3]
    o = 4 * ns
    H = x[o:o + nr]
    B = x[o + nr:o + nr + nt * nr].reshape(nt, nr)
    q = x[o + nr + nt * nr:o + nr + 2 * nt * nr].reshape(nt, nr)

    a = a_w + (a0 + a1 * np.log(P)) * P + G * np.exp(-S[:, None] * (lam - 440.0))
    bb = b_bw + X * (440.0 / lam) ** Y[:, None]
    k = a + bb
    u = bb / k
    rinf = 0.084 * u + 0.170 * u * u
    kc = (isun[:, None] + 1.03 * np.sqrt(1.0 + 2.4 * u) * iview[:, None]) * k
    kb = (isun[:, None] + 1.04 * np.sqrt(1.0 + 5.4 * u) * iview[:, None]) * k
    rho = (B * q).T @ lib / q.sum(axis=0)[:, None]
    Hj = np.maximum(H[None, :] + tides[:, None], 0.0)[:, :, None]
    r = (rinf[:, None, :] * (1.0 - np.exp(-kc[:, None, :] * Hj))
         + rho[None, :, :] / np.pi * np.exp(-kb[:, None, :] * Hj))
    return 0.5 * r / (1.0 - 1.5 * r) + D[:, None, None]


def _sam_rows_numpy(x, y):
    ux = x / np.sqrt((x * x).sum(axis=-1, keepdims=True))
    uy = y / np.sqrt((y * y).sum(axis=-1, keepdims=True))
    return 2.0 * np.arctan2(np.sqrt(((ux - uy) ** 2).sum(axis=-1)),
                            np.sqrt(((ux + uy) ** 2).sum(axis=-1)))


def objective_numpy(x, args):
    measured = args[0]
    w0, w1, kappa = args[12], args[13], args[14]
    ns, nr, _ = measured.shape
    R = region_rrs_numpy(x, args)
    rms = math.sqrt(((R - measured) ** 2).sum()) / measured.sum()
    sam = _sam_rows_numpy(R, measured).mean()
    H = x[4 * ns:4 * ns + nr]
    mean = H.mean()
    dev = H - mean
    eh = math.sqrt(np.where(np.abs(dev) > kappa * mean, (dev / mean) ** 2, 0.0).sum() / nr)
    return w0 * rms * sam + w1 * eh


def unmix_objective_numpy(x, args):
    """``x = [B_0..B_{Nb-1}, q_0..q_{Nb-1}]``; args = (rho_modelled (Ns, nb), library (Nb, nb))."""
    target, lib = args
    nt = lib.shape[0]
    B, q = x[:nt], x[nt:2 * nt]
    mix = (B * q) @ lib / q.sum()
    rms = math.sqrt(((mix[None, :] - target) ** 2).sum()) / target.sum()
    return rms * _sam_rows_numpy(np.broadcast_to(mix, target.shape), target).mean()


def lut_search_numpy(keys, count, query):
    """Best (index, mean angle) among the first ``count`` unit-normalised keys."""
    if count == 0:
        return -1, np.inf
    k = keys[:count]
    ang = 2.0 * np.arctan2(np.sqrt(((k - query) ** 2).sum(axis=-1)),
                           np.sqrt(((k + query) ** 2).sum(axis=-1))).mean(axis=-1)
    i = int(np.argmin(ang))
    return i, float(ang[i])


# ---------------------------------------------------------------- numba path

@njit
def _region_rrs_into(x, args, R):
    measured, lam, a_w, b_bw, a0, a1, lib, S, Y, isun, iview, tides = (
        args[0], args[1], args[2], args[3], args[4], args[5], args[6],
        args[7], args[8], args[9], args[10], args[11])
    ns, nr, nb = measured.shape
    nt = lib.shape[0]
    o = 4 * ns
    ob = o + nr
    oq = ob + nt * nr
    rho = np.empty(nb)
    for j in range(ns):
        P = x[4 * j]
        G = x[4 * j + 1]
        X = x[4 * j + 2]
        D = x[4 * j + 3]
        lnP = math.log(P)
        for b in range(nb):
            a = a_w[b] + (a0[b] + a1[b] * lnP) * P + G * math.exp(-S[j] * (lam[b] - 440.0))
            bb = b_bw[b] + X * (440.0 / lam[b]) ** Y[j]
            k = a + bb
            u = bb / k
            rinf = 0.084 * u + 0.170 * u * u
            kc = (isun[j] + 1.03 * math.sqrt(1.0 + 2.4 * u) * iview[j]) * k
            kb = (isun[j] + 1.04 * math.sqrt(1.0 + 5.4 * u) * iview[j]) * k
            for i in range(nr):
                qs = 0.0
                acc = 0.0
                for t in range(nt):
                    qt = x[oq + t * nr + i]
                    qs += qt
                    acc += x[ob + t * nr + i] * qt * lib[t, b]
                h = x[o + i] + tides[j]
                if h < 0.0:
                    h = 0.0
                r = rinf * (1.0 - math.exp(-kc * h)) + acc / qs / math.pi * math.exp(-kb * h)
                R[j, i, b] = 0.5 * r / (1.0 - 1.5 * r) + D
    return R


@njit
def region_rrs_numba(x, args):
    return _region_rrs_into(x, args, np.empty(args[0].shape))


@njit
def _angle(x, y):
    nx = 0.0
    ny = 0.0
    for b in range(x.shape[0]):
        nx += x[b] * x[b]
        ny += y[b] * y[b]
    nx = math.sqrt(nx)
    ny = math.sqrt(ny)
    dm = 0.0
    dp = 0.0
    for b in range(x.shape[0]):
        ux = x[b] / nx
        uy = y[b] / ny
        dm += (ux - uy) * (ux - uy)
        dp += (ux + uy) * (ux + uy)
    return 2.0 * math.atan2(math.sqrt(dm), math.sqrt(dp))


@njit
def objective_numba(x, args):
    measured = args[0]
    w0, w1, kappa = args[12], args[13], args[14]
    ns, nr, nb = measured.shape
    R = region_rrs_numba(x, args)
    sq = 0.0
    tot = 0.0
    sam = 0.0
    for j in range(ns):
        for i in range(nr):
            for b in range(nb):
                d = R[j, i, b] - measured[j, i, b]
                sq += d * d
                tot += measured[j, i, b]
            sam += _angle(R[j, i], measured[j, i])
    sam /= ns * nr
    o = 4 * ns
    mean = 0.0
    for i in range(nr):
        mean += x[o + i]
    mean /= nr
    acc = 0.0
    for i in range(nr):
        d = x[o + i] - mean
        if abs(d) > kappa * mean:
            acc += (d / mean) * (d / mean)
    return w0 * math.sqrt(sq) / tot * sam + w1 * math.sqrt(acc / nr)


@njit
def unmix_objective_numba(x, args):
    target, lib = args[0], args[1]
    ns, nb = target.shape
    nt = lib.shape[0]
    qs = 0.0
    for t in range(nt):
        qs += x[nt + t]
    mix = np.zeros(nb)
    for t in range(nt):
        w = x[t] * x[nt + t] / qs
        for b in range(nb):
            mix[b] += w * lib[t, b]
    sq = 0.0
    tot = 0.0
    sam = 0.0
    for j in range(ns):
        for b in range(nb):
            d = mix[b] - target[j, b]
            sq += d * d
            tot += target[j, b]
        sam += _angle(mix, target[j])
    return math.sqrt(sq) / tot * sam / ns


@njit
def lut_search_numba(keys, count, query):
    best = -1
    best_ang = np.inf
    ns, nb = query.shape
    for e in range(count):
        acc = 0.0
        for j in range(ns):
            dm = 0.0
            dp = 0.0
            for b in range(nb):
                dm += (keys[e, j, b] - query[j, b]) ** 2
                dp += (keys[e, j, b] + query[j, b]) ** 2
            acc += 2.0 * math.atan2(math.sqrt(dm), math.sqrt(dp))
        acc /= ns
        if acc < best_ang:
            best_ang = acc
            best = e
    return best, best_ang


if USE_NUMBA:
    region_rrs = region_rrs_numba
    objective = objective_numba
    unmix_objective = unmix_objective_numba
    lut_search = lut_search_numba
else:
    region_rrs = region_rrs_numpy
    objective = objective_numpy
    unmix_objective = unmix_objective_numpy
    lut_search = lut_search_numpy
