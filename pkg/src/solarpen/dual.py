"""Minimum-norm element of x - Z by cyclic coordinate descent.

Each update moves the fitted value y = x - sum_j alpha_j r_j to the
minimum-norm point of (y + span(r_j)) intersected with the feasible set,
which in closed form is alpha_j <- clip(alpha_j + <r_j, y>, I_j).
Geometrically the new iterate is a convex combination of y and its
reflection across the hyperplane normal to r_j, so the norm sequence is
nonincreasing and the iterates stay inside the orbit hull of the start.

The converged fit is simultaneously the penalized least-squares estimate
argmin 0.5||x - theta||^2 + h(theta) and a dual solution for every
group-invariant generator sharing the penalty.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field

import numpy as np

from ._kernels import cd_sweeps
from .penalty import SolarBase


@dataclass(frozen=True)
class SolveOptions:
    """Knobs for the coordinate-descent solve.

    `tol` bounds the relative decrease of ||y||^2 over one full sweep (the
    decrease is accumulated per update, so tolerances far below float
    epsilon remain meaningful).  `sweep_order` is "cyclic" (base order) or
    "cyclic-shuffled-once" (one fixed shuffle, then cyclic).
    """

    tol: float = 1e-10
    max_sweeps: int = 100_000
    trace_enabled: bool = False
    sweep_order: str = "cyclic"
    shuffle_seed: int = 0
    refresh_every: int = 64

    def __post_init__(self):
        if not self.tol > 0:
            raise ValueError("tol must be positive")
        if self.max_sweeps < 1:
            raise ValueError("max_sweeps must be positive")
        if self.sweep_order not in ("cyclic", "cyclic-shuffled-once"):
            raise ValueError(f"unknown sweep order {self.sweep_order!r}")


@dataclass(frozen=True)
class UpdateRecord:
    sweep: int
    j: int
    alpha_old: float
    alpha_new: float
    c: float
    norm_y: float


@dataclass
class DualState:
    """Coordinate-descent state: coefficients, fitted value, bookkeeping."""

    alpha: np.ndarray
    y: np.ndarray
    sweep: int = 0
    trace: list[UpdateRecord] | None = None
    _norm2: float = field(default=0.0, repr=False)
    # Exact squared-norm decrease of the last update; summing these per sweep
    # avoids the cancellation that differencing ||y||^2 values would suffer.
    _last_decrease: float = field(default=0.0, repr=False)

    @classmethod
    def initial(cls, x: np.ndarray, base: SolarBase, alpha0=None, trace: bool = False) -> "DualState":
        if alpha0 is None:
            alpha = np.array([iv.nearest_feasible_to_zero() for iv in base.intervals])
        else:
            alpha = np.asarray(alpha0, dtype=float).copy()
            if alpha.shape != (base.m,):
                raise ValueError(f"alpha0 must have length {base.m}")
            for j, iv in enumerate(base.intervals):
                if not iv.contains(alpha[j]):
                    raise ValueError(f"alpha0[{j}]={alpha[j]} outside interval [{iv.lo}, {iv.hi}]")
        y = x - base.bases.T @ alpha
        state = cls(alpha=alpha, y=y, trace=[] if trace else None)
        state._norm2 = float(y @ y)
        return state


def coordinate_update(state: DualState, j: int, base: SolarBase) -> DualState:
    """Exact single-coordinate minimizer of ||x - sum alpha_k r_k|| over alpha_j.

    Mutates and returns the state.  When tracing, records the convex
    combination coefficient c with y_new = y + c (S_r y - y).
    """
    r = base.bases[j]
    s = float(r @ state.y)
    a_old = float(state.alpha[j])
    a_new = base.intervals[j].clip(a_old + s)
    delta = a_new - a_old
    state._last_decrease = 0.0
    if delta != 0.0:
        state.alpha[j] = a_new
        state.y -= delta * r
        state._last_decrease = 2.0 * delta * s - delta * delta
        state._norm2 -= state._last_decrease
    if state.trace is not None:
        c = delta / (2.0 * s) if s != 0.0 else 0.0
        norm_y = math.sqrt(max(state._norm2, 0.0))
        state.trace.append(UpdateRecord(state.sweep, j, a_old, a_new, c, norm_y))
    return state


@dataclass(frozen=True)
class MinNormResult:
    """Minimum-norm solve outcome: U(x) = y plus diagnostics."""

    y: np.ndarray
    alpha: np.ndarray
    sweeps: int
    converged: bool
    kkt_residual: float
    last_rel_decrease: float
    c_min: float
    c_max: float
    n_updates: int
    state: DualState


def _sparse_rows(base: SolarBase):
    rows = base.bases
    cols_list = []
    vals_list = []
    indptr = np.zeros(base.m + 1, dtype=np.int64)
    for j in range(base.m):
        nz = np.nonzero(rows[j])[0]
        cols_list.append(nz)
        vals_list.append(rows[j, nz])
        indptr[j + 1] = indptr[j] + nz.size
    cols = np.concatenate(cols_list) if cols_list else np.zeros(0, dtype=np.int64)
    vals = np.concatenate(vals_list) if vals_list else np.zeros(0)
    return indptr, cols.astype(np.int64), vals.astype(float)


def _sweep_order(base: SolarBase, opts: SolveOptions) -> np.ndarray:
    active = np.array(
        [j for j in range(base.m) if not base.intervals[j].is_degenerate],
        dtype=np.int64,
    )
    if opts.sweep_order == "cyclic-shuffled-once" and active.size:
        rng = np.random.default_rng(opts.shuffle_seed)
        active = active[rng.permutation(active.size)]
    return active


def kkt_residual(base: SolarBase, alpha: np.ndarray, y: np.ndarray) -> float:
    """Max over j of the distance from alpha_j to its own best response."""
    s = base.bases @ y
    target = np.clip(alpha + s, base.lo, base.hi)
    return float(np.max(np.abs(target - alpha))) if alpha.size else 0.0


def solve_min_norm(
    x,
    base: SolarBase,
    opts: SolveOptions | None = None,
    alpha0=None,
) -> MinNormResult:
    """Cyclic coordinate descent for min ||x - sum_j alpha_j r_j||, alpha_j in I_j.

    Sweeps until the relative squared-norm decrease over a full sweep drops
    to `opts.tol` or `opts.max_sweeps` is reached; non-convergence is
    reported through the `converged` flag, never silently.  The returned y
    is refreshed from alpha at the end, so x - y = sum_j alpha_j r_j holds
    to rounding and the reported KKT residual is computed on exact data.
    """
    opts = opts or SolveOptions()
    x = np.asarray(x, dtype=float)
    if x.shape != (base.dim,):
        raise ValueError(f"x must have length {base.dim}, got shape {x.shape}")

    state = DualState.initial(x, base, alpha0=alpha0, trace=opts.trace_enabled)
    order = _sweep_order(base, opts)

    if opts.trace_enabled:
        result = _solve_traced(x, base, state, order, opts)
    else:
        indptr, cols, vals = _sparse_rows(base)
        sweeps, converged, c_min, c_max, last_rel, n_updates = cd_sweeps(
            x, state.y, state.alpha, base.lo, base.hi, indptr, cols, vals,
            order, opts.max_sweeps, opts.tol, opts.refresh_every,
        )
        state.sweep = sweeps
        result = (sweeps, bool(converged), c_min, c_max, last_rel, n_updates)

    sweeps, converged, c_min, c_max, last_rel, n_updates = result
    # Final refresh: make x - y == B^T alpha exact and score KKT on it.
    state.y = x - base.bases.T @ state.alpha
    state._norm2 = float(state.y @ state.y)
    return MinNormResult(
        y=state.y,
        alpha=state.alpha,
        sweeps=sweeps,
        converged=converged,
        kkt_residual=kkt_residual(base, state.alpha, state.y),
        last_rel_decrease=last_rel,
        c_min=c_min,
        c_max=c_max,
        n_updates=n_updates,
        state=state,
    )


def _solve_traced(x, base, state, order, opts):
    converged = False
    last_rel = math.inf
    n_before = 0
    c_min = math.inf
    c_max = -math.inf
    sweeps = 0
    for t in range(opts.max_sweeps):
        state.sweep = t
        n_before = len(state.trace)
        dec = 0.0
        for j in order:
            coordinate_update(state, int(j), base)
            dec += state._last_decrease
        sweeps = t + 1
        denom = max(state._norm2, 0.0)
        if denom > 0.0:
            last_rel = dec / denom
        else:
            last_rel = 0.0 if dec == 0.0 else math.inf
        if sweeps % opts.refresh_every == 0:
            state.y = x - base.bases.T @ state.alpha
            state._norm2 = float(state.y @ state.y)
        for rec in state.trace[n_before:]:
            if rec.alpha_new != rec.alpha_old or rec.c != 0.0:
                c_min = min(c_min, rec.c)
                c_max = max(c_max, rec.c)
        if last_rel <= opts.tol:
            converged = True
            break
    if c_min > c_max:
        c_min = c_max = 0.0
    return sweeps, converged, c_min, c_max, last_rel, len(state.trace)


def trace_to_csv(records, fileobj) -> None:
    """Write per-update records as CSV: sweep, j, alpha_old, alpha_new, c, norm_y."""
    writer = csv.writer(fileobj)
    writer.writerow(["sweep", "j", "alpha_old", "alpha_new", "c", "norm_y"])
    for rec in records:
        writer.writerow([
            rec.sweep, rec.j,
            format(rec.alpha_old, ".17g"), format(rec.alpha_new, ".17g"),
            format(rec.c, ".17g"), format(rec.norm_y, ".17g"),
        ])


def replay_fitted_values(x, base: SolarBase, records) -> list[np.ndarray]:
    """Reconstruct the y iterate after every traced update, starting from y_0."""
    alpha = np.array([iv.nearest_feasible_to_zero() for iv in base.intervals])
    y = x - base.bases.T @ alpha
    out = [y.copy()]
    for rec in records:
        y = y - (rec.alpha_new - rec.alpha_old) * base.bases[rec.j]
        out.append(y.copy())
    return out
