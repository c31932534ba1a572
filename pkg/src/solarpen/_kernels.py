"""Compiled inner loop for the cyclic coordinate-descent dual solver.

The sweep kernel works on a sparse row layout of the base matrix and tracks,
besides the iterate, the exact per-sweep decrease of ||y||^2 (accumulated
per update, so it stays meaningful far below float cancellation levels) and
the range of reflect-and-average coefficients c = delta / (2 <r, y>).
"""

from __future__ import annotations

import numpy as np

try:
    from numba import njit

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover - numba is a declared dependency
    HAVE_NUMBA = False

    def njit(*args, **kwargs):
        if args and callable(args[0]):
            return args[0]

        def wrap(fn):
            return fn

        return wrap


def _cd_sweeps_impl(x, y, alpha, lo, hi, indptr, cols, vals, order,
                    max_sweeps, tol, refresh_every):
    n = y.shape[0]
    m = alpha.shape[0]
    ynorm2 = 0.0
    for i in range(n):
        ynorm2 += y[i] * y[i]
    c_min = np.inf
    c_max = -np.inf
    sweeps = 0
    converged = False
    last_rel = np.inf
    n_updates = 0
    for t in range(max_sweeps):
        dec = 0.0
        for oi in range(order.shape[0]):
            j = order[oi]
            s = 0.0
            for k in range(indptr[j], indptr[j + 1]):
                s += vals[k] * y[cols[k]]
            aj = alpha[j]
            anew = aj + s
            if anew < lo[j]:
                anew = lo[j]
            elif anew > hi[j]:
                anew = hi[j]
            delta = anew - aj
            if delta != 0.0:
                alpha[j] = anew
                for k in range(indptr[j], indptr[j + 1]):
                    y[cols[k]] -= delta * vals[k]
                dec += 2.0 * delta * s - delta * delta
                n_updates += 1
                if s != 0.0:
                    c = delta / (2.0 * s)
                    if c < c_min:
                        c_min = c
                    if c > c_max:
                        c_max = c
        sweeps = t + 1
        ynorm2_new = ynorm2 - dec
        if ynorm2_new < 0.0:
            ynorm2_new = 0.0
        if ynorm2_new > 0.0:
            last_rel = dec / ynorm2_new
        else:
            last_rel = 0.0 if dec == 0.0 else np.inf
        if sweeps % refresh_every == 0:
            for i in range(n):
                y[i] = x[i]
            for j2 in range(m):
                a = alpha[j2]
                if a != 0.0:
                    for k in range(indptr[j2], indptr[j2 + 1]):
                        y[cols[k]] -= a * vals[k]
            ynorm2_new = 0.0
            for i in range(n):
                ynorm2_new += y[i] * y[i]
        ynorm2 = ynorm2_new
        if last_rel <= tol:
            converged = True
            break
    if c_min > c_max:
        c_min = 0.0
        c_max = 0.0
    return sweeps, converged, c_min, c_max, last_rel, n_updates


if HAVE_NUMBA:
    cd_sweeps = njit(cache=True)(_cd_sweeps_impl)
else:  # pragma: no cover
    cd_sweeps = _cd_sweeps_impl
