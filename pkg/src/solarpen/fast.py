"""Specialized direct solvers: taut string, pool-adjacent-violators, soft threshold.

These serve double duty as fast paths and as independent cross-checks for
the coordinate-descent dual solver.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class TautTube:
    """Tube of radius lam around the cumulative-sum path, endpoints pinned.

    `w` has length n+1 with w[0] = 0 and w[i] = x_1 + ... + x_i.  Feasible
    strings z satisfy z[0] = w[0], z[n] = w[n] and ||z - w||_inf <= radius;
    their first differences sweep out exactly the dual feasible set of the
    chain fused penalty.
    """

    w: np.ndarray
    radius: float

    def __post_init__(self):
        w = np.asarray(self.w, dtype=float)
        if w.ndim != 1 or w.size < 2:
            raise ValueError("w must be a vector of length at least 2")
        if self.radius < 0:
            raise ValueError("radius must be nonnegative")
        w = w.copy()
        w.setflags(write=False)
        object.__setattr__(self, "w", w)

    @classmethod
    def from_signal(cls, x, radius: float) -> "TautTube":
        x = np.asarray(x, dtype=float)
        w = np.empty(x.size + 1)
        w[0] = 0.0
        np.cumsum(x, out=w[1:])
        return cls(w, float(radius))


def taut_string(x, lam: float) -> np.ndarray:
    """Chain fused-lasso fit with penalty lam * sum |theta_{j+1} - theta_j|.

    Computes the taut string through the tube of radius lam around the
    cumulative sums with pinned endpoints and returns its first differences.
    The sweep tracks the running greatest-convex-minorant slope of the upper
    tube and least-concave-majorant slope of the lower tube from the current
    anchor; when the two cross, a knot is committed on the binding boundary
    and the scan restarts there.  Values inside one linear piece come out
    exactly equal.
    """
    x = np.asarray(x, dtype=float).ravel()
    n = x.size
    if n == 0:
        raise ValueError("empty signal")
    if lam < 0:
        raise ValueError("lam must be nonnegative")
    if lam == 0.0 or n == 1:
        return x.copy()
    w = np.empty(n + 1)
    w[0] = 0.0
    np.cumsum(x, out=w[1:])
    fit = np.empty(n)

    a = 0
    za = 0.0
    while a < n:
        mmax = math.inf
        imax = a
        mmin = -math.inf
        imin = a
        i = a + 1
        while True:
            if i < n:
                ui = w[i] + lam
                li = w[i] - lam
            else:
                ui = li = w[n]
            d = i - a
            su = (ui - za) / d
            sl = (li - za) / d
            if sl > mmax:
                # Lower requirement exceeds the upper cap: knot on the upper
                # boundary at its binding station.
                fit[a:imax] = mmax
                za = za + mmax * (imax - a)
                a = imax
                break
            if su < mmin:
                fit[a:imin] = mmin
                za = za + mmin * (imin - a)
                a = imin
                break
            if su < mmax:
                mmax = su
                imax = i
            if sl > mmin:
                mmin = sl
                imin = i
            if i == n:
                fit[a:n] = (w[n] - za) / (n - a)
                a = n
                break
            i += 1
    return fit


def pava(x) -> np.ndarray:
    """Least-squares projection onto {theta_1 <= ... <= theta_n}, unit weights.

    Pool-adjacent-violators with a block stack; linear time.
    """
    x = np.asarray(x, dtype=float).ravel()
    n = x.size
    if n == 0:
        raise ValueError("empty signal")
    means = []
    counts = []
    for v in x:
        means.append(float(v))
        counts.append(1)
        while len(means) >= 2 and means[-2] > means[-1]:
            m = means.pop()
            c = counts.pop()
            total = means[-1] * counts[-1] + m * c
            counts[-1] += c
            means[-1] = total / counts[-1]
    out = np.empty(n)
    pos = 0
    for m, c in zip(means, counts):
        out[pos:pos + c] = m
        pos += c
    return out


def soft_threshold(x, lam: float) -> np.ndarray:
    """Coordinate-wise sign(x) * max(|x| - lam, 0)."""
    if lam < 0:
        raise ValueError("lam must be nonnegative")
    x = np.asarray(x, dtype=float)
    return np.sign(x) * np.maximum(np.abs(x) - lam, 0.0)


def tube_check(x, lam: float, z) -> bool:
    """True when the string z stays inside the tube of radius lam around cumsum(x).

    Requires the endpoints of z to match the pinned tube endpoints within
    1e-9; raises otherwise.
    """
    tube = TautTube.from_signal(x, lam)
    z = np.asarray(z, dtype=float)
    if z.shape != tube.w.shape:
        raise ValueError(f"z must have length {tube.w.size}")
    if abs(z[0] - tube.w[0]) > 1e-9 or abs(z[-1] - tube.w[-1]) > 1e-9:
        raise ValueError("string endpoints must match the pinned tube endpoints")
    return bool(np.max(np.abs(z - tube.w)) <= lam + 1e-9)


def string_from_fit(x, fit) -> np.ndarray:
    """Integrate a fit back into a string: z[0] = 0, z[i] = fit_1 + ... + fit_i."""
    fit = np.asarray(fit, dtype=float)
    z = np.empty(fit.size + 1)
    z[0] = 0.0
    np.cumsum(fit, out=z[1:])
    return z
