"""Segment-and-ray penalties in base form.

A penalty here is the support function of a Minkowski sum of line segments
and rays.  Its base representation pairs unit direction vectors with closed,
possibly unbounded, intervals; the penalty support set is
``Z = {sum_j t_j r_j : t_j in I_j}``.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

INF = math.inf
SQRT2 = math.sqrt(2.0)
SQRT6 = math.sqrt(6.0)

PENALTY_KINDS = (
    "lasso",
    "nonneg",
    "fused-graph",
    "isotonic-graph",
    "nearly-isotonic-graph",
    "trend-filter",
    "sparse-fused",
    "custom-matrix",
)


@dataclass(frozen=True)
class ExtInterval:
    """Closed interval on the extended real line, never empty.

    `lo` may be -inf and `hi` may be +inf.  Degenerate point intervals
    (lo == hi) are allowed.
    """

    lo: float
    hi: float

    def __post_init__(self):
        lo = float(self.lo)
        hi = float(self.hi)
        if math.isnan(lo) or math.isnan(hi):
            raise ValueError("interval endpoints must not be NaN")
        if lo == INF or hi == -INF:
            raise ValueError(f"interval [{lo}, {hi}] is empty")
        if lo > hi:
            raise ValueError(f"interval [{lo}, {hi}] is empty")
        object.__setattr__(self, "lo", lo)
        object.__setattr__(self, "hi", hi)

    @property
    def is_degenerate(self) -> bool:
        return self.lo == self.hi

    @property
    def is_finite(self) -> bool:
        return self.lo > -INF and self.hi < INF

    def clip(self, t: float) -> float:
        return min(max(t, self.lo), self.hi)

    def contains(self, t: float, tol: float = 0.0) -> bool:
        return self.lo - tol <= t <= self.hi + tol

    def nearest_feasible_to_zero(self) -> float:
        """0 when the interval contains it, else the finite endpoint nearest 0."""
        return self.clip(0.0)

    def sup_linear(self, s: float) -> float:
        """sup over t in the interval of t*s, with the 0*inf convention = 0."""
        if s == 0.0:
            return 0.0
        if s > 0.0:
            return self.hi * s
        return self.lo * s

    def scaled(self, c: float) -> "ExtInterval":
        """The interval {c*t : t in I} for c >= 0."""
        if c < 0:
            raise ValueError("scale factor must be nonnegative")
        if c == 0.0:
            return ExtInterval(0.0, 0.0)
        lo = self.lo * c if self.lo != -INF else -INF
        hi = self.hi * c if self.hi != INF else INF
        return ExtInterval(lo, hi)


@dataclass(frozen=True)
class SolarBase:
    """Base representation: unit direction vectors paired with intervals.

    `bases` is an (m, dim) array whose rows are normalized to unit norm on
    construction; `intervals` has one entry per row.  The represented support
    set is ``Z = {sum_j t_j r_j : t_j in I_j}`` and the penalty is its
    support function.
    """

    dim: int
    bases: np.ndarray
    intervals: tuple[ExtInterval, ...]
    lo: np.ndarray = field(init=False, repr=False, compare=False)
    hi: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if self.dim < 1:
            raise ValueError("ambient dimension must be positive")
        bases = np.atleast_2d(np.asarray(self.bases, dtype=float))
        if bases.ndim != 2 or bases.shape[1] != self.dim:
            raise ValueError(f"base vectors must be rows of length {self.dim}")
        m = bases.shape[0]
        if m < 1:
            raise ValueError("a base needs at least one direction vector")
        intervals = tuple(self.intervals)
        if len(intervals) != m:
            raise ValueError("bases and intervals must have equal length")
        norms = np.linalg.norm(bases, axis=1)
        if np.any(norms == 0.0):
            raise ValueError("zero base vectors are not allowed")
        if np.any(np.abs(norms - 1.0) > 1e-12):
            bases = bases / norms[:, None]
        bases = np.ascontiguousarray(bases)
        bases.setflags(write=False)
        lo = np.array([iv.lo for iv in intervals])
        hi = np.array([iv.hi for iv in intervals])
        lo.setflags(write=False)
        hi.setflags(write=False)
        object.__setattr__(self, "bases", bases)
        object.__setattr__(self, "intervals", intervals)
        object.__setattr__(self, "lo", lo)
        object.__setattr__(self, "hi", hi)

    @property
    def m(self) -> int:
        return self.bases.shape[0]

    def scaled_intervals(self, c: float) -> "SolarBase":
        """Same directions with every interval scaled by c >= 0 (c*Z)."""
        return SolarBase(self.dim, self.bases, tuple(iv.scaled(c) for iv in self.intervals))


def support_function(base: SolarBase, theta, infeasibility_tol: float = 0.0) -> float:
    """Evaluate the penalty at theta: sum over j of sup_{t in I_j} t*<r_j, theta>.

    Returns +inf when any ray summand is unbounded above.  With a positive
    `infeasibility_tol`, ray directions violated by no more than the tolerance
    contribute their finite-endpoint value instead of +inf; this is used when
    evaluating objectives at numerically near-feasible points.
    """
    theta = np.asarray(theta, dtype=float)
    if theta.shape != (base.dim,):
        raise ValueError(f"theta must have length {base.dim}, got shape {theta.shape}")
    s = base.bases @ theta
    total = 0.0
    for j in range(base.m):
        sj = s[j]
        if sj == 0.0:
            continue
        lo = base.lo[j]
        hi = base.hi[j]
        if sj > 0.0:
            if hi == INF:
                if sj > infeasibility_tol:
                    return INF
                contrib = lo * sj if lo != -INF else 0.0
            else:
                contrib = hi * sj if lo == -INF else max(lo * sj, hi * sj)
        else:
            if lo == -INF:
                if sj < -infeasibility_tol:
                    return INF
                contrib = hi * sj if hi != INF else 0.0
            else:
                contrib = lo * sj if hi == INF else max(lo * sj, hi * sj)
        total += contrib
    return float(total)


def sum_penalties(a: SolarBase, b: SolarBase) -> SolarBase:
    """Minkowski sum of two penalties: concatenated bases and intervals."""
    if a.dim != b.dim:
        raise ValueError(f"dimension mismatch: {a.dim} vs {b.dim}")
    bases = np.vstack([a.bases, b.bases])
    return SolarBase(a.dim, bases, a.intervals + b.intervals)


# ---------------------------------------------------------------------------
# Penalty specifications and builders
# ---------------------------------------------------------------------------

def chain_edges(n: int) -> tuple[tuple[int, int], ...]:
    """Edges of the path graph 0-1, 1-2, ..., (n-2)-(n-1)."""
    return tuple((j, j + 1) for j in range(n - 1))


@dataclass(frozen=True)
class PenaltySpec:
    """Serializable description of a named penalty.

    `edges` use 0-based vertex indices internally; the JSON file format is
    1-based.  `lambdas` holds one weight for most kinds and two for
    sparse-fused (lasso weight, fused weight).
    """

    kind: str
    n: int
    lambdas: tuple[float, ...] = ()
    edges: tuple[tuple[int, int], ...] | None = None
    matrix: tuple[tuple[float, ...], ...] | None = None

    def __post_init__(self):
        if self.kind not in PENALTY_KINDS:
            raise ValueError(f"unknown penalty kind {self.kind!r}")
        if self.n < 1:
            raise ValueError("n must be positive")
        lambdas = tuple(float(v) for v in self.lambdas)
        if any(v < 0 for v in lambdas):
            raise ValueError("penalty weights must be nonnegative")
        object.__setattr__(self, "lambdas", lambdas)
        if self.edges is not None:
            edges = tuple((int(i), int(j)) for i, j in self.edges)
            for i, j in edges:
                if not (0 <= i < self.n and 0 <= j < self.n):
                    raise ValueError(f"edge ({i},{j}) references a vertex outside [0, {self.n})")
                if i == j:
                    raise ValueError(f"self-loop edge ({i},{j})")
            object.__setattr__(self, "edges", edges)
        if self.matrix is not None:
            mat = tuple(tuple(float(v) for v in row) for row in self.matrix)
            if any(len(row) != self.n for row in mat):
                raise ValueError("matrix rows must have length n")
            object.__setattr__(self, "matrix", mat)

    def lam(self, k: int = 0) -> float:
        if k >= len(self.lambdas):
            raise ValueError(f"{self.kind} needs at least {k + 1} penalty weight(s)")
        return self.lambdas[k]

    def to_json_dict(self) -> dict:
        out: dict = {"kind": self.kind, "n": self.n}
        if len(self.lambdas) == 1:
            out["lambda"] = self.lambdas[0]
        elif self.lambdas:
            out["lambda"] = list(self.lambdas)
        if self.edges is not None:
            out["edges"] = [[i + 1, j + 1] for i, j in self.edges]
        if self.matrix is not None:
            out["matrix"] = [list(row) for row in self.matrix]
        return out

    @classmethod
    def from_json_dict(cls, d: dict) -> "PenaltySpec":
        lam = d.get("lambda", ())
        if isinstance(lam, (int, float)):
            lambdas: tuple[float, ...] = (float(lam),)
        else:
            lambdas = tuple(float(v) for v in lam)
        edges = d.get("edges")
        if edges is not None:
            edges = tuple((int(i) - 1, int(j) - 1) for i, j in edges)
        matrix = d.get("matrix")
        if matrix is not None:
            matrix = tuple(tuple(float(v) for v in row) for row in matrix)
        return cls(kind=d["kind"], n=int(d["n"]), lambdas=lambdas, edges=edges, matrix=matrix)

    @classmethod
    def from_json_file(cls, path) -> "PenaltySpec":
        with open(path) as fh:
            return cls.from_json_dict(json.load(fh))


def _difference_rows(n: int, edges: Sequence[tuple[int, int]]) -> np.ndarray:
    rows = np.zeros((len(edges), n))
    for k, (i, j) in enumerate(edges):
        rows[k, i] = -1.0 / SQRT2
        rows[k, j] = 1.0 / SQRT2
    return rows


def _require_edges(spec: PenaltySpec) -> tuple[tuple[int, int], ...]:
    if not spec.edges:
        raise ValueError(f"{spec.kind} needs a nonempty edge set")
    return spec.edges


def _build_lasso(spec: PenaltySpec) -> SolarBase:
    lam = spec.lam()
    iv = ExtInterval(-lam, lam)
    return SolarBase(spec.n, np.eye(spec.n), (iv,) * spec.n)


def _build_nonneg(spec: PenaltySpec) -> SolarBase:
    iv = ExtInterval(-INF, 0.0)
    return SolarBase(spec.n, np.eye(spec.n), (iv,) * spec.n)


def _build_fused(spec: PenaltySpec) -> SolarBase:
    edges = _require_edges(spec)
    lam = spec.lam()
    iv = ExtInterval(-lam * SQRT2, lam * SQRT2)
    return SolarBase(spec.n, _difference_rows(spec.n, edges), (iv,) * len(edges))


def _build_isotonic(spec: PenaltySpec) -> SolarBase:
    edges = _require_edges(spec)
    iv = ExtInterval(-INF, 0.0)
    return SolarBase(spec.n, _difference_rows(spec.n, edges), (iv,) * len(edges))


def _build_nearly_isotonic(spec: PenaltySpec) -> SolarBase:
    edges = _require_edges(spec)
    lam = spec.lam()
    iv = ExtInterval(-lam * SQRT2, 0.0)
    return SolarBase(spec.n, _difference_rows(spec.n, edges), (iv,) * len(edges))


def _build_trend_filter(spec: PenaltySpec) -> SolarBase:
    if spec.n < 3:
        raise ValueError("trend-filter needs n >= 3")
    lam = spec.lam()
    m = spec.n - 2
    rows = np.zeros((m, spec.n))
    for j in range(m):
        rows[j, j] = 1.0 / SQRT6
        rows[j, j + 1] = -2.0 / SQRT6
        rows[j, j + 2] = 1.0 / SQRT6
    iv = ExtInterval(-lam * SQRT6, lam * SQRT6)
    return SolarBase(spec.n, rows, (iv,) * m)


def _build_sparse_fused(spec: PenaltySpec) -> SolarBase:
    lam1 = spec.lam(0)
    lam2 = spec.lam(1)
    edges = spec.edges if spec.edges else chain_edges(spec.n)
    lasso = PenaltySpec("lasso", spec.n, (lam1,))
    fused = PenaltySpec("fused-graph", spec.n, (lam2,), edges=edges)
    return sum_penalties(build_penalty(lasso), build_penalty(fused))


def _build_custom_matrix(spec: PenaltySpec) -> SolarBase:
    if spec.matrix is None:
        raise ValueError("custom-matrix needs a matrix")
    lam = spec.lam()
    D = np.asarray(spec.matrix, dtype=float)
    norms = np.linalg.norm(D, axis=1)
    if np.any(norms == 0.0):
        raise ValueError("custom matrix has a zero row")
    intervals = tuple(ExtInterval(-lam * nk, lam * nk) for nk in norms)
    return SolarBase(spec.n, D / norms[:, None], intervals)


_BUILDERS = {
    "lasso": _build_lasso,
    "nonneg": _build_nonneg,
    "fused-graph": _build_fused,
    "isotonic-graph": _build_isotonic,
    "nearly-isotonic-graph": _build_nearly_isotonic,
    "trend-filter": _build_trend_filter,
    "sparse-fused": _build_sparse_fused,
    "custom-matrix": _build_custom_matrix,
}


def build_penalty(spec: PenaltySpec) -> SolarBase:
    """Construct the base representation of a named penalty.

    Interval radii are scaled so that the support function reproduces the
    conventional penalty value for the user-facing weight: a graph difference
    penalty with weight lam yields lam * sum_e |theta_j - theta_i|, second
    differences yield lam * sum |d2 theta|, and a custom matrix row d gets
    direction d/||d|| with interval [-lam*||d||, lam*||d||].
    """
    return _BUILDERS[spec.kind](spec)
