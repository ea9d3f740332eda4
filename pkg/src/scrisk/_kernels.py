"""Compiled cascade kernels.

All weights arrive as float64 holding integer hundredths, so strength sums at
full production are exact and an unshocked network is a fixed point.

Each iteration sweeps every link. Partial market shares let even a small
loss reach nearly every firm, so sparse frontier updates do not pay off.
"""
import numpy as np
from numba import config, njit, prange

# skip the outdated TBB build some platforms ship
config.THREADING_LAYER_PRIORITY = ["omp", "workqueue", "tbb"]


@njit(cache=True)
def cascade_one(
    shock, n, src, tgt, w, lslot, share, slot_ptr, slot_pi, slot_ess,
    gamma_eff, sout, h, trace, tol, t_max,
):
    """Run one shock to convergence. Fills ``h``; returns (iterations, last max change).

    ``trace`` is either shape (0, 0) or (t_max + 1, n) and then receives h(t).
    """
    n_slots = slot_pi.shape[0]
    n_links = src.shape[0]
    acc = np.empty(n_slots)
    up = np.empty(n)
    hnew = np.empty(n)
    record = trace.shape[0] > 0
    for i in range(n):
        h[i] = 1.0
    h[shock] = 0.0
    if record:
        for i in range(n):
            trace[0, i] = h[i]
    delta = 1.0
    t = 0
    while t < t_max:
        for s in range(n_slots):
            acc[s] = 0.0
        for i in range(n):
            up[i] = 0.0
        for l in range(n_links):
            j = src[l]
            i = tgt[l]
            sl = lslot[l]
            if sl >= 0:
                acc[sl] += w[l] * (1.0 - share[j] * (1.0 - h[j]))
            up[j] += w[l] * h[i]
        delta = 0.0
        for i in range(n):
            hd = 1.0
            ne_sum = 0.0
            ne_tot = 0.0
            for s in range(slot_ptr[i], slot_ptr[i + 1]):
                if slot_ess[s]:
                    f = acc[s] / slot_pi[s]
                    if f < hd:
                        hd = f
                else:
                    ne_sum += acc[s]
                    ne_tot += slot_pi[s]
            g = gamma_eff[i]
            if g > 0.0 and ne_tot > 0.0:
                lin = 1.0 - g * (1.0 - ne_sum / ne_tot)
                if lin < hd:
                    hd = lin
            if sout[i] > 0.0:
                hu = up[i] / sout[i]
            else:
                hu = 1.0
            v = h[i]
            if hd < v:
                v = hd
            if hu < v:
                v = hu
            if v < 0.0:
                v = 0.0
            hnew[i] = v
        hnew[shock] = 0.0
        for i in range(n):
            d = h[i] - hnew[i]
            if d > delta:
                delta = d
            h[i] = hnew[i]
        t += 1
        if record:
            for i in range(n):
                trace[t, i] = h[i]
        if delta < tol:
            break
    return t, delta


@njit(cache=True)
def _esri_of(h, weights):
    tot = 0.0
    for i in range(h.shape[0]):
        tot += weights[i] * (1.0 - h[i])
    return tot


@njit(cache=True)
def profile_serial(
    n, src, tgt, w, lslot, share, slot_ptr, slot_pi, slot_ess, gamma_eff, sout,
    weights, tol, t_max, esri, iters, last_delta,
):
    h = np.empty(n)
    trace = np.empty((0, 0))
    for k in range(n):
        t, d = cascade_one(k, n, src, tgt, w, lslot, share, slot_ptr, slot_pi,
                           slot_ess, gamma_eff, sout, h, trace, tol, t_max)
        esri[k] = _esri_of(h, weights)
        iters[k] = t
        last_delta[k] = d


@njit(cache=True, parallel=True)
def profile_parallel(
    n, src, tgt, w, lslot, share, slot_ptr, slot_pi, slot_ess, gamma_eff, sout,
    weights, tol, t_max, esri, iters, last_delta,
):
    for k in prange(n):
        h = np.empty(n)
        trace = np.empty((0, 0))
        t, d = cascade_one(k, n, src, tgt, w, lslot, share, slot_ptr, slot_pi,
                           slot_ess, gamma_eff, sout, h, trace, tol, t_max)
        esri[k] = _esri_of(h, weights)
        iters[k] = t
        last_delta[k] = d
