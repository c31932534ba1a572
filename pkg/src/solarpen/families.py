"""Generator families and the conjugate-map reduction.

For a convex generator phi invariant under the penalty's reflection group,
the estimator argmin phi(theta) - <x, theta> + h(theta) is recovered from
the penalized least-squares fit U(x) as T(x) = grad phi*(U(x)), where
grad phi* inverts grad phi.  `fit` runs the whole pipeline and `oracle_solve`
certifies it by solving the composite problem directly.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from . import fast
from .dual import MinNormResult, SolveOptions, solve_min_norm, kkt_residual
from .groups import GroupReport, generate_group, sample_element_action
from .penalty import (
    INF,
    PenaltySpec,
    SolarBase,
    SQRT2,
    build_penalty,
    chain_edges,
    support_function,
)


class BoundarySolution(Exception):
    """The dual fit touches the mean-domain boundary: the primal argmin is unattained."""

    def __init__(self, family: str, coordinates):
        self.family = family
        self.coordinates = tuple(int(c) for c in coordinates)
        super().__init__(
            f"{family} reduction undefined on coordinate(s) {list(self.coordinates)}: "
            "value on the boundary of the mean domain"
        )


class InvarianceError(Exception):
    """The generator is not invariant under the penalty's group; reduction refused."""


class OracleNonConvergence(Exception):
    def __init__(self, message, theta=None):
        super().__init__(message)
        self.theta = theta


@dataclass(frozen=True)
class InvarianceTag:
    """Smallest orthogonal-subgroup label the generator is invariant under."""

    group_required: str  # "permutation" | "sign-change" | "signed-permutation" | "orthogonal"


@dataclass(frozen=True)
class GeneratorFamily:
    """A generator phi with gradient and conjugate-gradient maps.

    `mean_domain` is the per-coordinate open interval on which conj_grad is
    finite (None bounds mean unrestricted); the whole-space families use
    (-inf, inf).
    """

    name: str
    value: Callable[[np.ndarray], float]
    grad: Callable[[np.ndarray], np.ndarray]
    conj_grad: Callable[[np.ndarray], np.ndarray]
    invariance: InvarianceTag
    mean_domain: tuple[float, float]

    def boundary_violations(self, u: np.ndarray) -> np.ndarray:
        lo, hi = self.mean_domain
        bad = ~((u > lo) & (u < hi))
        return np.nonzero(bad)[0]


def _gaussian_value(t):
    return 0.5 * float(t @ t)


def _bernoulli_value(t):
    return float(np.logaddexp(0.0, t).sum())


def _bernoulli_grad(t):
    return 0.5 * (1.0 + np.tanh(0.5 * t))


def _bernoulli_conj_grad(u):
    return np.log(u) - np.log1p(-u)


def _poisson_value(t):
    return float(np.exp(t).sum())


def _spherical_value(t):
    return 0.25 * float(t @ t) ** 2


def _spherical_grad(t):
    return float(t @ t) * t


def _spherical_conj_grad(u):
    nrm = float(np.linalg.norm(u))
    if nrm == 0.0:
        return np.zeros_like(u)
    return u * nrm ** (-2.0 / 3.0)


FAMILIES: dict[str, GeneratorFamily] = {
    "gaussian": GeneratorFamily(
        name="gaussian",
        value=_gaussian_value,
        grad=lambda t: np.asarray(t, dtype=float).copy(),
        conj_grad=lambda u: np.asarray(u, dtype=float).copy(),
        invariance=InvarianceTag("orthogonal"),
        mean_domain=(-INF, INF),
    ),
    "bernoulli": GeneratorFamily(
        name="bernoulli",
        value=_bernoulli_value,
        grad=_bernoulli_grad,
        conj_grad=_bernoulli_conj_grad,
        invariance=InvarianceTag("permutation"),
        mean_domain=(0.0, 1.0),
    ),
    "poisson": GeneratorFamily(
        name="poisson",
        value=_poisson_value,
        grad=np.exp,
        conj_grad=np.log,
        invariance=InvarianceTag("permutation"),
        mean_domain=(0.0, INF),
    ),
    "spherical-power": GeneratorFamily(
        name="spherical-power",
        value=_spherical_value,
        grad=_spherical_grad,
        conj_grad=_spherical_conj_grad,
        invariance=InvarianceTag("orthogonal"),
        mean_domain=(-INF, INF),
    ),
}


def get_family(name: str) -> GeneratorFamily:
    try:
        return FAMILIES[name]
    except KeyError:
        raise ValueError(f"unknown generator family {name!r}") from None


def reduce(family: GeneratorFamily, u) -> np.ndarray:
    """Map a dual fit u = U(x) to the estimator value T(x) = grad phi*(u).

    Raises BoundarySolution when u leaves the interior of the mean domain,
    identifying the offending coordinates.
    """
    u = np.asarray(u, dtype=float)
    bad = family.boundary_violations(u)
    if bad.size:
        raise BoundarySolution(family.name, bad)
    return family.conj_grad(u)


# Which penalty-group classifications each invariance tag is safe for.
_COVERS = {
    "orthogonal": {
        "trivial", "sign-change", "permutation", "signed-permutation",
        "orthogonal-fallback", "unknown-finite",
    },
    "signed-permutation": {"trivial", "sign-change", "permutation", "signed-permutation"},
    "permutation": {"trivial", "permutation"},
    "sign-change": {"trivial", "sign-change"},
}


def check_invariance(family: GeneratorFamily, report: GroupReport, samples: int = 100,
                     seed: int = 0) -> bool:
    """True when the family is invariant under the reported group.

    Decides by tag coverage of the classification, then samples random
    (element, point) pairs and asserts the generator value is unchanged.
    A False result means the reduction is unsound for this pairing.
    """
    tag = family.invariance.group_required
    if report.classification not in _COVERS[tag]:
        return False
    rng = np.random.default_rng(seed)
    dim = report.generators[0].size
    for _ in range(samples):
        theta = rng.standard_normal(dim)
        g_theta = sample_element_action(report, theta, rng)
        v = family.value(theta)
        if abs(family.value(g_theta) - v) > 1e-9 * (1.0 + abs(v)):
            raise AssertionError(
                f"sampled invariance violation for {family.name} under "
                f"{report.classification}: tag coverage is inconsistent"
            )
    return True


# ---------------------------------------------------------------------------
# Direct solver used only to certify the reduction
# ---------------------------------------------------------------------------

def prox_penalty(v, base: SolarBase, step: float, solve_opts: SolveOptions | None = None) -> np.ndarray:
    """prox of step * h at v, computed as the min-norm element of v - step*Z.

    The default solve runs to the floating-point fixed point (tol far below
    epsilon); the outer certification loop needs prox outputs whose
    feasibility error is negligible against its own objective decreases.
    """
    scaled = base.scaled_intervals(step)
    opts = solve_opts or SolveOptions(tol=1e-30, max_sweeps=500_000)
    return solve_min_norm(v, scaled, opts).y


def composite_objective(family: GeneratorFamily, base: SolarBase, x, theta,
                        feas_tol: float = 1e-9) -> float:
    theta = np.asarray(theta, dtype=float)
    return family.value(theta) - float(x @ theta) + support_function(base, theta, feas_tol)


def oracle_solve(family: GeneratorFamily, base: SolarBase, x, tol: float = 1e-10,
                 max_iter: int = 5000) -> np.ndarray:
    """Solve min phi(theta) - <x, theta> + h(theta) by proximal gradient.

    Backtracking line search from step 1 with halving and an Armijo constant
    of 1e-4 on the composite objective; the prox of h is a dual solve.
    Terminates when the relative objective decrease is at most tol and the
    prox-gradient residual is at most sqrt(tol).  Raises OracleNonConvergence
    (with the best iterate attached) if the budget runs out, and on
    line-search failure.
    """
    x = np.asarray(x, dtype=float)
    if x.shape != (base.dim,):
        raise ValueError(f"x must have length {base.dim}")
    if base.dim > 200:
        raise ValueError("direct certification solver is limited to n <= 200")
    theta = np.zeros(base.dim)
    obj = composite_objective(family, base, x, theta)
    resid_tol = math.sqrt(tol)
    for _ in range(max_iter):
        g = family.grad(theta) - x
        step = 1.0
        # Sufficient decrease with a float-noise allowance: near stationarity
        # the required decrease drops below objective evaluation error.
        noise = 4e-16 * (1.0 + abs(obj))
        stuck = False
        while True:
            cand = prox_penalty(theta - step * g, base, step)
            cand_obj = composite_objective(family, base, x, cand)
            move2 = float((cand - theta) @ (cand - theta))
            if cand_obj <= obj - 1e-4 * move2 / step + noise:
                break
            step *= 0.5
            if step < 1e-18:
                # The iterate cannot move beyond the prox accuracy floor:
                # numerically stationary, not a failure.
                if move2 <= (1e-9 * (1.0 + float(np.linalg.norm(theta)))) ** 2:
                    stuck = True
                    break
                raise OracleNonConvergence("line search failed", theta=theta)
        if stuck:
            return theta
        residual = math.sqrt(move2) / step
        rel_dec = (obj - cand_obj) / (1.0 + abs(cand_obj))
        theta = cand
        obj = cand_obj
        if rel_dec <= tol and residual <= resid_tol:
            return theta
    raise OracleNonConvergence(
        f"no convergence within {max_iter} iterations", theta=theta,
    )


# ---------------------------------------------------------------------------
# End-to-end fit
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class FitReport:
    """Everything a fit produces: dual fit, reduced fit, and diagnostics.

    `zero_pattern` lists the base rows j with |<r_j, T(x)>| <= 1e-8, i.e.
    the inactive differences of the reduced fit.  `boundary_coordinates` is
    set instead of `reduced` when the dual fit touches the mean-domain
    boundary.
    """

    u: np.ndarray
    reduced: np.ndarray | None
    family: str
    penalty_kind: str
    method: str
    group_verdict: str
    group_classification: str
    kkt_residual: float
    fenchel_gap: float
    converged: bool
    sweeps: int | None = None
    zero_pattern: tuple[int, ...] | None = None
    boundary_coordinates: tuple[int, ...] | None = None

    def to_json_dict(self) -> dict:
        out: dict = {
            "family": self.family,
            "penalty_kind": self.penalty_kind,
            "method": self.method,
            "group_verdict": self.group_verdict,
            "group_classification": self.group_classification,
            "u": [float(v) for v in self.u],
            "reduced": None if self.reduced is None else [float(v) for v in self.reduced],
            "kkt_residual": float(self.kkt_residual),
            "fenchel_gap": float(self.fenchel_gap),
            "converged": self.converged,
        }
        if self.sweeps is not None:
            out["sweeps"] = self.sweeps
        if self.zero_pattern is not None:
            out["zero_pattern"] = list(self.zero_pattern)
        if self.boundary_coordinates is not None:
            out["boundary_coordinates"] = list(self.boundary_coordinates)
        return out


def _is_chain(spec: PenaltySpec) -> bool:
    return spec.edges is not None and spec.edges == chain_edges(spec.n)


def _chain_alpha(x: np.ndarray, u: np.ndarray) -> np.ndarray:
    # x - u = sum_j alpha_j (e_{j+1} - e_j)/sqrt(2)  =>  alpha from prefix sums.
    return -SQRT2 * np.cumsum(x - u)[:-1]


def _recover_alpha(spec: PenaltySpec, base: SolarBase, x: np.ndarray, u: np.ndarray):
    if spec.kind == "lasso":
        return x - u
    if spec.kind in ("fused-graph", "isotonic-graph") and _is_chain(spec):
        return _chain_alpha(x, u)
    return None


def _default_method(spec: PenaltySpec) -> str:
    if spec.kind == "lasso":
        return "soft-threshold"
    if spec.kind == "fused-graph" and _is_chain(spec):
        return "taut-string"
    if spec.kind == "isotonic-graph" and _is_chain(spec):
        return "pava"
    return "dual-cd"


def fit(
    family: GeneratorFamily,
    spec: PenaltySpec,
    x,
    solve_opts: SolveOptions | None = None,
    zero_pattern: bool = False,
    group_cap: int = 100_000,
    method: str = "auto",
) -> tuple[FitReport, MinNormResult | None]:
    """Full pipeline: build penalty, identify its group, solve, reduce.

    With method="auto", uses the matching direct solver (soft threshold,
    taut string, PAVA) when the penalty has that shape, otherwise the
    coordinate-descent dual solve; an explicit method forces that route and
    is rejected when the penalty shape does not fit it.  Refuses with
    InvarianceError when the generator is not invariant under the penalty's
    group; a boundary dual fit yields a partial report with the offending
    coordinates flagged.
    """
    x = np.asarray(x, dtype=float)
    base = build_penalty(spec)
    report = generate_group(base, cap=group_cap)
    if not check_invariance(family, report):
        raise InvarianceError(
            f"generator {family.name!r} requires invariance tag "
            f"{family.invariance.group_required!r}, but the {spec.kind} penalty generates "
            f"a group classified as {report.classification!r} (verdict {report.verdict}); "
            "the reduction through the least-squares fit would be unsound"
        )

    if method == "auto":
        method = _default_method(spec)
    elif method != "dual-cd" and method != _default_method(spec):
        raise ValueError(
            f"method {method!r} does not apply to a {spec.kind} penalty"
            + ("" if _is_chain(spec) or spec.edges is None else " on this graph"))

    solve_result: MinNormResult | None = None
    sweeps = None
    converged = True
    if method == "soft-threshold":
        u = fast.soft_threshold(x, spec.lam())
    elif method == "taut-string":
        u = fast.taut_string(x, spec.lam())
    elif method == "pava":
        u = fast.pava(x)
    elif method == "dual-cd":
        opts = solve_opts or SolveOptions(tol=1e-20, max_sweeps=1_000_000)
        solve_result = solve_min_norm(x, base, opts)
        u = solve_result.y
        sweeps = solve_result.sweeps
        converged = solve_result.converged
    else:
        raise ValueError(f"unknown method {method!r}")

    alpha = solve_result.alpha if solve_result is not None else _recover_alpha(spec, base, x, u)
    kkt = kkt_residual(base, alpha, u) if alpha is not None else float("nan")
    fenchel_gap = float((x - u) @ u) - support_function(base, u, infeasibility_tol=1e-9)

    reduced = None
    boundary = None
    try:
        reduced = reduce(family, u)
    except BoundarySolution as exc:
        boundary = exc.coordinates

    pattern = None
    if zero_pattern and reduced is not None:
        s = base.bases @ reduced
        pattern = tuple(int(j) for j in np.nonzero(np.abs(s) <= 1e-8)[0])

    fit_report = FitReport(
        u=u,
        reduced=reduced,
        family=family.name,
        penalty_kind=spec.kind,
        method=method,
        group_verdict=report.verdict,
        group_classification=report.classification,
        kkt_residual=kkt,
        fenchel_gap=fenchel_gap,
        converged=converged,
        sweeps=sweeps,
        zero_pattern=pattern,
        boundary_coordinates=boundary,
    )
    return fit_report, solve_result
