"""Reflection groups of a penalty base: generation, classification, majorization.

Every base direction r contributes the reflection S_r x = x - 2 r <r, x>.
The group these reflections generate encodes the symmetry of the penalty
support set; deciding whether one point lies in the convex hull of the group
orbit of another (group majorization) is the workhorse test here.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Sequence

import numpy as np

from .penalty import SolarBase

_KEY_DECIMALS = 8
_RATIONAL_DENOM_BOUND = 720
_RATIONAL_TOL = 1e-9
_SIGNED_PERM_TOL = 1e-8
INV_SQRT2 = 1.0 / math.sqrt(2.0)


class OrbitTooLargeError(ValueError):
    pass


@dataclass(frozen=True)
class Reflection:
    """Orthogonal involution across the hyperplane normal to a unit vector."""

    normal: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.normal, dtype=float)
        nrm = np.linalg.norm(v)
        if nrm == 0:
            raise ValueError("reflection normal must be nonzero")
        if abs(nrm - 1.0) > 1e-12:
            v = v / nrm
        v = np.ascontiguousarray(v)
        v.setflags(write=False)
        object.__setattr__(self, "normal", v)

    def matrix(self) -> np.ndarray:
        d = self.normal.size
        return np.eye(d) - 2.0 * np.outer(self.normal, self.normal)


def reflect(r: Reflection, x) -> np.ndarray:
    """Apply S_r: x - 2 r <r, x>."""
    x = np.asarray(x, dtype=float)
    v = r.normal
    if x.shape != v.shape:
        raise ValueError(f"dimension mismatch: {x.shape} vs {v.shape}")
    return x - 2.0 * v * float(v @ x)


@dataclass(frozen=True)
class GroupStructure:
    """Coordinate-block action of a recognized signed-permutation group.

    Each block is a tuple of coordinate indices with a kind:
      "sym"   all permutations within the block,
      "hyp"   all signed permutations within the block,
      "flip"  a single sign-flippable coordinate,
      "fixed" an untouched coordinate.
    """

    blocks: tuple[tuple[int, ...], ...]
    kinds: tuple[str, ...]

    def orbit_size(self, y: np.ndarray) -> int:
        total = 1
        for block, kind in zip(self.blocks, self.kinds):
            vals = [y[i] for i in block]
            if kind == "sym":
                total *= _distinct_permutation_count(vals)
            elif kind == "hyp":
                signed = len([v for v in vals if v != 0.0])
                total *= _distinct_permutation_count([abs(v) for v in vals]) * 2**signed
            elif kind == "flip":
                total *= 2 if vals[0] != 0.0 else 1
        return total


def _distinct_permutation_count(vals) -> int:
    n = len(vals)
    total = math.factorial(n)
    seen: dict[float, int] = {}
    for v in vals:
        seen[v] = seen.get(v, 0) + 1
    for c in seen.values():
        total //= math.factorial(c)
    return total


@dataclass(frozen=True)
class GroupReport:
    """Outcome of generating the reflection group of a base."""

    verdict: str  # "finite" | "infinite" | "undetermined"
    classification: str
    angle_table: np.ndarray
    order: int | None = None
    elements: tuple[np.ndarray, ...] | None = None
    structure: GroupStructure | None = None
    generators: tuple[np.ndarray, ...] = ()
    irrational_pair: tuple[int, int] | None = None

    @property
    def is_finite(self) -> bool:
        return self.verdict == "finite"


def _matrix_key(M: np.ndarray) -> bytes:
    return (np.round(M, _KEY_DECIMALS) + 0.0).tobytes()


def _angle_is_rational(cosine: float) -> bool:
    q = math.acos(min(1.0, max(-1.0, cosine))) / math.pi
    frac = Fraction(q).limit_denominator(_RATIONAL_DENOM_BOUND)
    return abs(q - frac.numerator / frac.denominator) <= _RATIONAL_TOL


def _closure(generators: Sequence[np.ndarray], cap: int) -> list[np.ndarray] | None:
    """Breadth-first closure under products; None when the cap is exceeded."""
    d = generators[0].shape[0]
    identity = np.eye(d)
    elements: dict[bytes, np.ndarray] = {_matrix_key(identity): identity}
    frontier = [identity]
    while frontier:
        fresh = []
        for M in frontier:
            for S in generators:
                P = S @ M
                key = _matrix_key(P)
                if key not in elements:
                    if len(elements) >= cap:
                        return None
                    elements[key] = P
                    fresh.append(P)
        frontier = fresh
    return list(elements.values())


class _UnionFind:
    def __init__(self, n: int):
        self.parent = list(range(n))

    def find(self, i: int) -> int:
        while self.parent[i] != i:
            self.parent[i] = self.parent[self.parent[i]]
            i = self.parent[i]
        return i

    def union(self, i: int, j: int):
        ri, rj = self.find(i), self.find(j)
        if ri != rj:
            self.parent[rj] = ri

    def blocks(self, n: int) -> list[list[int]]:
        groups: dict[int, list[int]] = {}
        for i in range(n):
            groups.setdefault(self.find(i), []).append(i)
        return [sorted(v) for v in sorted(groups.values())]


def _recognize_rows(bases: np.ndarray):
    """Classify each unit row as an axis vector, a difference pair, or neither.

    Returns (flips, swaps) where flips is a set of coordinates carrying a
    +-e_j row and swaps a set of index pairs from (e_j - e_i)/sqrt(2) rows,
    or None when some row matches neither pattern.
    """
    flips: set[int] = set()
    swaps: set[tuple[int, int]] = set()
    for row in bases:
        nz = np.nonzero(np.abs(row) > 1e-12)[0]
        if nz.size == 1 and abs(abs(row[nz[0]]) - 1.0) <= 1e-9:
            flips.add(int(nz[0]))
        elif (
            nz.size == 2
            and abs(abs(row[nz[0]]) - INV_SQRT2) <= 1e-9
            and abs(abs(row[nz[1]]) - INV_SQRT2) <= 1e-9
            and row[nz[0]] * row[nz[1]] < 0
        ):
            swaps.add((int(nz[0]), int(nz[1])))
        else:
            return None
    return flips, swaps


def _structure_from_flips_swaps(dim: int, flips: set[int], swaps: set[tuple[int, int]]) -> GroupStructure:
    uf = _UnionFind(dim)
    for i, j in swaps:
        uf.union(i, j)
    blocks = []
    kinds = []
    for block in uf.blocks(dim):
        has_flip = any(i in flips for i in block)
        if len(block) == 1:
            kinds.append("flip" if has_flip else "fixed")
        else:
            kinds.append("hyp" if has_flip else "sym")
        blocks.append(tuple(block))
    return GroupStructure(tuple(blocks), tuple(kinds))


def _structure_order(structure: GroupStructure) -> int:
    order = 1
    for block, kind in zip(structure.blocks, structure.kinds):
        c = len(block)
        if kind == "sym":
            order *= math.factorial(c)
        elif kind == "hyp":
            order *= (2**c) * math.factorial(c)
        elif kind == "flip":
            order *= 2
    return order


def _classification_from_structure(structure: GroupStructure) -> str:
    kinds = set(structure.kinds) - {"fixed"}
    if not kinds:
        return "trivial"
    has_sign = bool(kinds & {"flip", "hyp"})
    has_perm = bool(kinds & {"sym", "hyp"})
    if has_sign and has_perm:
        return "signed-permutation"
    if has_sign:
        return "sign-change"
    return "permutation"


def _signed_permutation_shape(M: np.ndarray) -> bool:
    """True when M has exactly one entry of magnitude 1 per row and column."""
    A = np.abs(M)
    big = A > 0.5
    if not (big.sum(axis=0) == 1).all() or not (big.sum(axis=1) == 1).all():
        return False
    if np.abs(A[big] - 1.0).max() > _SIGNED_PERM_TOL:
        return False
    return np.abs(A[~big]).max() <= _SIGNED_PERM_TOL if (~big).any() else True


def _structure_from_elements(dim: int, elements: Sequence[np.ndarray], order: int) -> tuple[str, GroupStructure | None]:
    """Classify enumerated elements and recover block structure when clean."""
    if not all(_signed_permutation_shape(M) for M in elements):
        return "unknown-finite", None
    any_negative = any(M.min() < -0.5 for M in elements)
    all_diagonal = all(np.abs(M - np.diag(np.diag(M))).max() <= _SIGNED_PERM_TOL for M in elements)
    uf = _UnionFind(dim)
    for M in elements:
        rows, cols = np.nonzero(np.abs(M) > 0.5)
        for i, j in zip(rows, cols):
            uf.union(int(i), int(j))
    raw_blocks = uf.blocks(dim)
    if all_diagonal:
        flipped = set()
        for M in elements:
            d = np.diag(M)
            flipped.update(int(i) for i in np.nonzero(d < -0.5)[0])
        blocks = tuple(tuple(b) for b in raw_blocks)
        kinds = tuple("flip" if b[0] in flipped else "fixed" for b in blocks)
        return "sign-change", GroupStructure(blocks, kinds)
    if not any_negative:
        blocks = tuple(tuple(b) for b in raw_blocks)
        kinds = tuple("sym" if len(b) > 1 else "fixed" for b in blocks)
        return "permutation", GroupStructure(blocks, kinds)
    # Mixed signs: recover structure only in the clean single-block case.
    if len(raw_blocks) == 1 and order == (2**dim) * math.factorial(dim):
        structure = GroupStructure((tuple(range(dim)),), ("hyp",))
        return "signed-permutation", structure
    return "signed-permutation", None


def generate_group(base: SolarBase, cap: int = 100_000) -> GroupReport:
    """Generate the reflection group of a base and classify it.

    Stage 1 tests every pairwise angle arccos(<r_i, r_j>)/pi for rationality
    (continued-fraction match with denominator bound 720, tolerance 1e-9);
    any irrational angle makes the group infinite.  Stage 2 recognizes pure
    sign-flip and adjacent-difference bases structurally (these generate
    sign-change and permutation actions per coordinate component) and falls
    back to breadth-first matrix closure, which reports `undetermined` when
    the element cap is exceeded.
    """
    if cap < 2:
        raise ValueError("cap must be at least 2")
    bases = base.bases
    m = base.m
    angle_table = bases @ bases.T
    for i in range(m):
        for j in range(i + 1, m):
            if not _angle_is_rational(angle_table[i, j]):
                return GroupReport(
                    verdict="infinite",
                    classification="orthogonal-fallback",
                    angle_table=angle_table,
                    irrational_pair=(i, j),
                    generators=_dedup_generators(bases),
                )
    generators = _dedup_generators(bases)
    gen_matrices = [np.eye(base.dim) - 2.0 * np.outer(r, r) for r in generators]

    recognized = _recognize_rows(bases)
    if recognized is not None:
        flips, swaps = recognized
        structure = _structure_from_flips_swaps(base.dim, flips, swaps)
        order = _structure_order(structure)
        classification = _classification_from_structure(structure)
        elements = None
        if order <= cap:
            closed = _closure(gen_matrices, cap)
            if closed is None or len(closed) != order:
                raise RuntimeError(
                    "closure enumeration disagrees with structural order "
                    f"({None if closed is None else len(closed)} vs {order})"
                )
            elements = tuple(closed)
        return GroupReport(
            verdict="finite",
            classification=classification,
            angle_table=angle_table,
            order=order,
            elements=elements,
            structure=structure,
            generators=generators,
        )

    closed = _closure(gen_matrices, cap)
    if closed is None:
        return GroupReport(
            verdict="undetermined",
            classification="orthogonal-fallback",
            angle_table=angle_table,
            generators=generators,
        )
    classification, structure = _structure_from_elements(base.dim, closed, len(closed))
    return GroupReport(
        verdict="finite",
        classification=classification,
        angle_table=angle_table,
        order=len(closed),
        elements=tuple(closed),
        structure=structure,
        generators=generators,
    )


def _dedup_generators(bases: np.ndarray) -> tuple[np.ndarray, ...]:
    """Distinct unit normals up to sign (r and -r define the same reflection)."""
    seen: dict[bytes, np.ndarray] = {}
    for row in bases:
        oriented = row.copy()
        nz = np.nonzero(np.abs(oriented) > 1e-12)[0]
        if nz.size and oriented[nz[0]] < 0:
            oriented = -oriented
        key = (np.round(oriented, _KEY_DECIMALS) + 0.0).tobytes()
        if key not in seen:
            seen[key] = oriented
    return tuple(seen.values())


# ---------------------------------------------------------------------------
# Orbits
# ---------------------------------------------------------------------------

def orbit(report: GroupReport, y, max_points: int = 20_000) -> list[np.ndarray]:
    """Deduplicated orbit {g y : g in the group} of a finite group."""
    if not report.is_finite:
        raise ValueError("orbit needs a finite group report")
    y = np.asarray(y, dtype=float)
    if report.elements is not None:
        points: dict[bytes, np.ndarray] = {}
        for g in report.elements:
            v = g @ y
            points.setdefault(_matrix_key(v), v)
        return list(points.values())
    if report.structure is None:
        raise OrbitTooLargeError("group is too large to enumerate and has no block structure")
    if report.structure.orbit_size(y) > max_points:
        raise OrbitTooLargeError(f"orbit exceeds {max_points} points")
    return _structure_orbit(report.structure, y)


def _structure_orbit(structure: GroupStructure, y: np.ndarray) -> list[np.ndarray]:
    block_variants: list[list[tuple[float, ...]]] = []
    for block, kind in zip(structure.blocks, structure.kinds):
        vals = tuple(float(y[i]) for i in block)
        if kind == "fixed":
            variants = [vals]
        elif kind == "flip":
            variants = [vals] if vals[0] == 0.0 else [vals, (-vals[0],)]
        elif kind == "sym":
            variants = sorted(set(itertools.permutations(vals)))
        else:  # hyp
            variants_set = set()
            for perm in set(itertools.permutations(vals)):
                nz = [i for i, v in enumerate(perm) if v != 0.0]
                for signs in itertools.product((1.0, -1.0), repeat=len(nz)):
                    out = list(perm)
                    for i, s in zip(nz, signs):
                        out[i] = out[i] * s
                    variants_set.add(tuple(out))
            variants = sorted(variants_set)
        block_variants.append(variants)
    out_points = []
    for combo in itertools.product(*block_variants):
        v = np.empty_like(y)
        for block, vals in zip(structure.blocks, combo):
            for i, val in zip(block, vals):
                v[i] = val
        out_points.append(v)
    return out_points


def sample_element_action(report: GroupReport, theta: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    """Apply a random group element (or random reflection word when infinite)."""
    if report.is_finite and report.elements is not None:
        g = report.elements[rng.integers(len(report.elements))]
        return g @ theta
    if report.is_finite and report.structure is not None:
        out = theta.copy()
        for block, kind in zip(report.structure.blocks, report.structure.kinds):
            idx = np.array(block)
            if kind in ("sym", "hyp"):
                out[idx] = out[idx[rng.permutation(len(idx))]]
            if kind in ("hyp", "flip"):
                signs = rng.choice((-1.0, 1.0), size=len(idx))
                out[idx] = out[idx] * signs
        return out
    # Infinite or undetermined: random word in the generating reflections.
    out = theta.copy()
    length = int(rng.integers(1, 13))
    for _ in range(length):
        r = report.generators[rng.integers(len(report.generators))]
        out = out - 2.0 * r * float(r @ out)
    return out


# ---------------------------------------------------------------------------
# Majorization
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class MajorizationVerdict:
    """Result of deciding x <=_G y (x in the convex hull of the orbit of y)."""

    holds: bool
    weights: np.ndarray | None = None
    vertices: np.ndarray | None = None
    violation: np.ndarray | None = None
    residual: float | None = None
    path: str = "generic"


def _partial_sum_violation(xs: np.ndarray, ys: np.ndarray, tol: float) -> int | None:
    """First k (1-based) where sum of k largest xs exceeds that of ys, else None."""
    px = np.cumsum(np.sort(xs)[::-1])
    py = np.cumsum(np.sort(ys)[::-1])
    bad = np.nonzero(px > py + tol)[0]
    return int(bad[0]) + 1 if bad.size else None


def _fast_path(structure: GroupStructure, x: np.ndarray, y: np.ndarray, tol: float):
    """Exact blockwise test; returns (holds, violation direction or None)."""
    n = x.size
    for block, kind in zip(structure.blocks, structure.kinds):
        idx = np.array(block)
        xs, ys = x[idx], y[idx]
        if kind == "fixed":
            j = int(idx[0])
            if abs(x[j] - y[j]) > tol:
                u = np.zeros(n)
                u[j] = 1.0 if x[j] > y[j] else -1.0
                return False, u
        elif kind == "flip":
            j = int(idx[0])
            if abs(x[j]) > abs(y[j]) + tol:
                u = np.zeros(n)
                u[j] = 1.0 if x[j] >= 0 else -1.0
                return False, u
        elif kind == "sym":
            if abs(xs.sum() - ys.sum()) > tol:
                u = np.zeros(n)
                u[idx] = 1.0 if xs.sum() > ys.sum() else -1.0
                return False, u
            k = _partial_sum_violation(xs, ys, tol)
            if k is not None:
                u = np.zeros(n)
                u[idx[:k]] = 1.0
                return False, u
        else:  # hyp: weak majorization of magnitudes, no sum equality
            k = _partial_sum_violation(np.abs(xs), np.abs(ys), tol)
            if k is not None:
                u = np.zeros(n)
                u[idx[:k]] = 1.0
                return False, u
    return True, None


def majorizes(
    report: GroupReport,
    x,
    y,
    tol: float = 1e-9,
    force_generic: bool = False,
    want_certificate: bool = False,
    residual_tol: float | None = None,
) -> MajorizationVerdict:
    """Decide whether x is group-majorized by y.

    Recognized block structures use exact partial-sum checks (classical
    majorization per permutation component, magnitude comparisons for
    sign-change coordinates, weak magnitude majorization for the full
    signed-permutation action).  Otherwise, or on request, membership in the
    orbit hull is decided by simplex-constrained least squares; it holds when
    the residual is at most 1e-6 * (1 + ||y||).
    """
    if not report.is_finite:
        raise ValueError("majorization test needs a finite group report")
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.shape != y.shape:
        raise ValueError("x and y must have the same shape")

    if report.structure is not None and not force_generic:
        holds, violation = _fast_path(report.structure, x, y, tol)
        if not holds:
            return MajorizationVerdict(holds=False, violation=violation, path="fast")
        if not want_certificate:
            return MajorizationVerdict(holds=True, path="fast")

    from .oracle import SimplexLSProblem, simplex_least_squares

    vertices = np.array(orbit(report, y))
    scale = 1.0 + float(np.linalg.norm(y))
    bound = (1e-6 if residual_tol is None else residual_tol) * scale
    # Certificates must reconstruct x to 1e-8, so the inside-exit is tighter
    # than the decision bound; the outside-exit only needs the bound itself.
    result = simplex_least_squares(
        SimplexLSProblem(vertices, x),
        decide_below=min(1e-9 * scale, 0.25 * bound),
        decide_above=2.0 * bound,
    )
    if result.residual <= bound:
        return MajorizationVerdict(
            holds=True, weights=result.weights, vertices=vertices,
            residual=result.residual, path="generic",
        )
    direction = x - result.weights @ vertices
    return MajorizationVerdict(
        holds=False, vertices=vertices, violation=direction,
        residual=result.residual, path="generic",
    )


def orbit_support(report: GroupReport, x, u) -> float:
    """Support function of the orbit of x in direction u: max_g <g x, u>."""
    x = np.asarray(x, dtype=float)
    u = np.asarray(u, dtype=float)
    if report.structure is not None:
        total = 0.0
        for block, kind in zip(report.structure.blocks, report.structure.kinds):
            idx = np.array(block)
            xs, us = x[idx], u[idx]
            if kind == "fixed":
                total += float(xs[0] * us[0])
            elif kind == "flip":
                total += abs(float(xs[0] * us[0]))
            elif kind == "sym":
                total += float(np.sort(xs) @ np.sort(us))
            else:
                total += float(np.sort(np.abs(xs)) @ np.sort(np.abs(us)))
        return total
    if report.elements is None:
        raise ValueError("orbit support needs elements or block structure")
    return max(float((g @ x) @ u) for g in report.elements)


# ---------------------------------------------------------------------------
# Export
# ---------------------------------------------------------------------------

def report_to_json_dict(report: GroupReport, element_limit: int = 1000) -> dict:
    out: dict = {
        "verdict": report.verdict,
        "classification": report.classification,
        "order": report.order,
        "angle_table": [[float(v) for v in row] for row in report.angle_table],
    }
    if report.irrational_pair is not None:
        i, j = report.irrational_pair
        out["irrational_pair"] = [i, j]
        out["irrational_cosine"] = float(report.angle_table[i, j])
    if report.elements is not None and report.order is not None and report.order <= element_limit:
        out["elements"] = [[[float(v) for v in row] for row in g] for g in report.elements]
    return out
