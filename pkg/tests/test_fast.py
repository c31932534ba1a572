import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from solarpen.dual import SolveOptions, solve_min_norm
from solarpen.fast import TautTube, pava, soft_threshold, string_from_fit, taut_string, tube_check
from solarpen.groups import generate_group, majorizes
from solarpen.penalty import PenaltySpec, build_penalty, chain_edges

cvxpy = pytest.importorskip("cvxpy")

TIGHT = SolveOptions(tol=1e-18, max_sweeps=1_000_000)


_CLARABEL_TIGHT = dict(tol_gap_abs=1e-12, tol_gap_rel=1e-12, tol_feas=1e-12)


def tv_reference(x, lam):
    """Independent quadratic-program oracle for the chain fused fit."""
    n = x.size
    theta = cvxpy.Variable(n)
    objective = 0.5 * cvxpy.sum_squares(x - theta)
    if n > 1:
        objective = objective + lam * cvxpy.sum(cvxpy.abs(cvxpy.diff(theta)))
    cvxpy.Problem(cvxpy.Minimize(objective)).solve(solver=cvxpy.CLARABEL, **_CLARABEL_TIGHT)
    return np.asarray(theta.value).ravel()


def isotonic_reference(x):
    n = x.size
    theta = cvxpy.Variable(n)
    constraints = [theta[i + 1] >= theta[i] for i in range(n - 1)]
    cvxpy.Problem(
        cvxpy.Minimize(0.5 * cvxpy.sum_squares(x - theta)), constraints
    ).solve(solver=cvxpy.CLARABEL, **_CLARABEL_TIGHT)
    return np.asarray(theta.value).ravel()


class TestTautString:
    def test_zero_radius_identity(self):
        x = np.array([3.0, -1.0, 2.0])
        assert np.array_equal(taut_string(x, 0.0), x)

    def test_two_point_analytic(self):
        assert np.allclose(taut_string(np.array([0.0, 2.0]), 0.5), [0.5, 1.5])

    def test_large_radius_constant_mean(self):
        rng = np.random.default_rng(0)
        x = rng.standard_normal(40)
        fit = taut_string(x, 1e4)
        assert np.allclose(fit, x.mean())

    def test_matches_qp_oracle(self):
        rng = np.random.default_rng(1)
        for trial in range(25):
            n = int(rng.integers(2, 35))
            lam = float(rng.choice([0.05, 0.3, 1.0, 5.0]))
            kind = trial % 4
            if kind == 0:
                x = rng.standard_normal(n)
            elif kind == 1:
                x = np.sort(rng.standard_normal(n))
            elif kind == 2:
                x = np.full(n, float(rng.standard_normal()))
            else:
                x = np.where(np.arange(n) % 2 == 0, 1.0, -1.0) * rng.uniform(0.5, 3.0)
            assert np.max(np.abs(taut_string(x, lam) - tv_reference(x, lam))) <= 5e-6

    def test_mean_preserved(self):
        rng = np.random.default_rng(2)
        for lam in (0.1, 1.0, 20.0):
            x = rng.standard_normal(100)
            assert taut_string(x, lam).mean() == pytest.approx(x.mean(), abs=1e-9)

    def test_bends_only_at_tube_contacts(self):
        # Within a linear piece the emitted values are exactly equal; a
        # nonzero first difference means the string touches the tube there.
        rng = np.random.default_rng(3)
        lam = 2.0
        x = rng.standard_normal(50)
        fit = taut_string(x, lam)
        z = string_from_fit(x, fit)
        w = string_from_fit(x, x)
        knots = np.nonzero(np.diff(fit))[0]
        assert knots.size > 0
        for i in knots:
            assert abs(abs(z[i + 1] - w[i + 1]) - lam) <= 1e-9

    def test_matches_dual_solver_medium(self):
        rng = np.random.default_rng(4)
        for n in (10, 200):
            for lam in (0.1, 1.0):
                x = rng.standard_normal(n)
                base = build_penalty(
                    PenaltySpec("fused-graph", n, (lam,), edges=chain_edges(n)))
                res = solve_min_norm(x, base, TIGHT)
                assert np.max(np.abs(res.y - taut_string(x, lam))) <= 1e-6

    def test_rejects_bad_input(self):
        with pytest.raises(ValueError):
            taut_string(np.array([]), 1.0)
        with pytest.raises(ValueError):
            taut_string(np.ones(3), -0.1)


class TestPava:
    def test_monotone_input_unchanged(self):
        assert np.array_equal(pava(np.array([1.0, 2.0, 3.0])), [1.0, 2.0, 3.0])

    def test_two_point_pool(self):
        assert np.allclose(pava(np.array([2.0, 1.0])), [1.5, 1.5])

    def test_partial_pool(self):
        assert np.allclose(pava(np.array([1.0, 3.0, 2.0, 4.0])), [1.0, 2.5, 2.5, 4.0])

    def test_matches_qp_oracle(self):
        rng = np.random.default_rng(5)
        for _ in range(15):
            n = int(rng.integers(2, 40))
            x = rng.standard_normal(n) * rng.uniform(0.5, 3.0)
            assert np.max(np.abs(pava(x) - isotonic_reference(x))) <= 5e-6

    def test_output_monotone_and_idempotent(self):
        rng = np.random.default_rng(6)
        x = rng.standard_normal(60)
        fit = pava(x)
        assert np.all(np.diff(fit) >= 0.0)
        assert np.array_equal(pava(fit), fit)


class TestSoftThreshold:
    def test_example(self):
        assert np.allclose(soft_threshold(np.array([3.0, -0.5, 0.0]), 1.0), [2.0, 0.0, 0.0])

    def test_zero_lam_identity(self):
        x = np.array([1.0, -2.0])
        assert np.array_equal(soft_threshold(x, 0.0), x)

    def test_all_small_to_zero(self):
        assert np.allclose(soft_threshold(np.array([0.5, -0.9]), 1.0), 0.0)


class TestTubeCheck:
    def test_center_of_tube(self):
        x = np.array([1.0, -2.0, 0.5])
        w = string_from_fit(x, x)
        assert tube_check(x, 0.5, w)

    def test_exceeding_radius(self):
        x = np.array([1.0, -2.0, 0.5])
        lam = 0.5
        z = string_from_fit(x, x)
        z[1] += lam + 1.0
        assert not tube_check(x, lam, z)

    def test_taut_string_reintegrates_into_tube(self):
        rng = np.random.default_rng(7)
        x = rng.standard_normal(30)
        lam = 0.8
        fit = taut_string(x, lam)
        assert tube_check(x, lam, string_from_fit(x, fit))

    def test_endpoint_violation_raises(self):
        x = np.array([1.0, 2.0])
        z = string_from_fit(x, x)
        z[-1] += 1.0
        with pytest.raises(ValueError):
            tube_check(x, 0.5, z)

    def test_feasible_strings_map_to_dual_feasible_fits(self):
        # First differences of tube strings are feasible for the dual, and
        # feasible dual points integrate back into the tube.
        rng = np.random.default_rng(8)
        n = 12
        lam = 0.6
        x = rng.standard_normal(n)
        base = build_penalty(PenaltySpec("fused-graph", n, (lam,), edges=chain_edges(n)))
        tube = TautTube.from_signal(x, lam)
        for _ in range(20):
            z = tube.w.copy()
            z[1:-1] += rng.uniform(-lam, lam, n - 1)
            assert tube_check(x, lam, z)
            y = np.diff(z)
            # y = x - B^T t with feasible t: recover t by prefix sums.
            t = -math.sqrt(2.0) * np.cumsum(x - y)[:-1]
            assert np.all(t >= base.lo - 1e-9) and np.all(t <= base.hi + 1e-9)
        for _ in range(20):
            t = rng.uniform(base.lo, base.hi)
            y = x - base.bases.T @ t
            assert tube_check(x, lam, string_from_fit(x, y))

    def test_taut_string_least_majorized_differences(self):
        rng = np.random.default_rng(9)
        n = 8
        lam = 0.7
        x = rng.standard_normal(n)
        fit = taut_string(x, lam)
        report = generate_group(
            build_penalty(PenaltySpec("fused-graph", n, (lam,), edges=chain_edges(n))))
        tube = TautTube.from_signal(x, lam)
        for _ in range(20):
            z = tube.w.copy()
            z[1:-1] += rng.uniform(-lam, lam, n - 1)
            assert majorizes(report, fit, np.diff(z)).holds


@given(st.lists(st.floats(-10, 10, allow_nan=False), min_size=1, max_size=30),
       st.floats(0, 20, allow_nan=False))
@settings(max_examples=60, deadline=None)
def test_taut_string_mean_and_feasibility(values, lam):
    x = np.array(values)
    fit = taut_string(x, lam)
    assert fit.mean() == pytest.approx(x.mean(), abs=1e-9 * (1 + abs(x.mean())))
    if x.size > 1 and lam > 0:
        assert tube_check(x, lam, string_from_fit(x, fit))
