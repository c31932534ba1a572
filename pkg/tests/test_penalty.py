import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from solarpen.penalty import (
    ExtInterval,
    PenaltySpec,
    SolarBase,
    build_penalty,
    chain_edges,
    sum_penalties,
    support_function,
)

INF = math.inf
SQRT2 = math.sqrt(2.0)


def lasso_spec(n, lam=1.0):
    return PenaltySpec("lasso", n, (lam,))


def fused_chain_spec(n, lam=1.0):
    return PenaltySpec("fused-graph", n, (lam,), edges=chain_edges(n))


def isotonic_chain_spec(n):
    return PenaltySpec("isotonic-graph", n, edges=chain_edges(n))


class TestExtInterval:
    def test_empty_rejected(self):
        with pytest.raises(ValueError):
            ExtInterval(1.0, 0.0)
        with pytest.raises(ValueError):
            ExtInterval(INF, INF)

    def test_degenerate_point_allowed(self):
        iv = ExtInterval(2.0, 2.0)
        assert iv.is_degenerate

    def test_sup_linear_zero_slope_is_zero(self):
        # 0 * inf convention: a zero linear term contributes nothing.
        assert ExtInterval(-INF, 0.0).sup_linear(0.0) == 0.0
        assert ExtInterval(-INF, INF).sup_linear(0.0) == 0.0

    def test_sup_linear_rays(self):
        iv = ExtInterval(-INF, 0.0)
        assert iv.sup_linear(1.0) == 0.0
        assert iv.sup_linear(-1.0) == INF

    def test_scaled(self):
        iv = ExtInterval(-INF, 3.0).scaled(2.0)
        assert iv.lo == -INF and iv.hi == 6.0
        assert ExtInterval(-1.0, 1.0).scaled(0.0) == ExtInterval(0.0, 0.0)


class TestSolarBase:
    def test_rows_normalized(self):
        base = SolarBase(2, np.array([[3.0, 4.0]]), (ExtInterval(-1, 1),))
        assert np.linalg.norm(base.bases[0]) == pytest.approx(1.0, abs=1e-14)

    def test_zero_row_rejected(self):
        with pytest.raises(ValueError):
            SolarBase(2, np.zeros((1, 2)), (ExtInterval(-1, 1),))

    def test_length_mismatch_rejected(self):
        with pytest.raises(ValueError):
            SolarBase(2, np.eye(2), (ExtInterval(-1, 1),))

    def test_needs_a_vector(self):
        with pytest.raises(ValueError):
            SolarBase(2, np.zeros((0, 2)), ())


class TestSupportFunction:
    def test_lasso_value(self):
        base = build_penalty(lasso_spec(2))
        assert support_function(base, [3.0, -4.0]) == pytest.approx(7.0)

    def test_isotonic_monotone_is_zero(self):
        base = build_penalty(isotonic_chain_spec(3))
        assert support_function(base, [1.0, 2.0, 3.0]) == 0.0

    def test_isotonic_violation_is_infinite(self):
        base = build_penalty(isotonic_chain_spec(2))
        assert support_function(base, [2.0, 1.0]) == INF

    def test_fused_raw_intervals(self):
        # Direct base with unit intervals: value sqrt(2) at (0, 1, 0).
        rows = np.array([[-1, 1, 0], [0, -1, 1]]) / SQRT2
        base = SolarBase(3, rows, (ExtInterval(-1, 1),) * 2)
        assert support_function(base, [0.0, 1.0, 0.0]) == pytest.approx(SQRT2)

    def test_dimension_mismatch(self):
        base = build_penalty(lasso_spec(2))
        with pytest.raises(ValueError):
            support_function(base, [1.0, 2.0, 3.0])

    def test_full_line_interval(self):
        # A full-line summand forces orthogonality: finite only on the hyperplane.
        base = SolarBase(2, np.array([[1.0, 0.0]]), (ExtInterval(-INF, INF),))
        assert support_function(base, [0.0, 5.0]) == 0.0
        assert support_function(base, [0.1, 5.0]) == INF
        assert support_function(base, [-0.1, 5.0]) == INF

    def test_infeasibility_tolerance(self):
        base = build_penalty(isotonic_chain_spec(2))
        theta = np.array([1.0 + 5e-10, 1.0])
        assert support_function(base, theta) == INF
        assert support_function(base, theta, infeasibility_tol=1e-9) != INF


class TestBuildPenalty:
    def test_lasso(self):
        base = build_penalty(lasso_spec(2, 1.0))
        assert np.allclose(base.bases, np.eye(2))
        assert base.intervals == (ExtInterval(-1, 1), ExtInterval(-1, 1))

    def test_isotonic_chain(self):
        base = build_penalty(isotonic_chain_spec(3))
        assert base.m == 2
        expected = np.array([[-1, 1, 0], [0, -1, 1]]) / SQRT2
        assert np.allclose(base.bases, expected)
        assert all(iv == ExtInterval(-INF, 0.0) for iv in base.intervals)

    def test_custom_matrix_rescaling(self):
        spec = PenaltySpec("custom-matrix", 2, (1.0,), matrix=((2.0, 0.0),))
        base = build_penalty(spec)
        assert np.allclose(base.bases, [[1.0, 0.0]])
        assert base.intervals[0] == ExtInterval(-2.0, 2.0)

    def test_custom_matrix_zero_row_rejected(self):
        spec = PenaltySpec("custom-matrix", 2, (1.0,), matrix=((0.0, 0.0),))
        with pytest.raises(ValueError):
            build_penalty(spec)

    def test_graph_penalty_needs_edges(self):
        with pytest.raises(ValueError):
            build_penalty(PenaltySpec("fused-graph", 3, (1.0,)))

    def test_fused_weight_convention(self):
        # User weight lam reproduces lam * sum |first differences|.
        base = build_penalty(fused_chain_spec(4, 0.8))
        theta = np.array([0.0, 2.0, -1.0, -1.0])
        expected = 0.8 * np.abs(np.diff(theta)).sum()
        assert support_function(base, theta) == pytest.approx(expected)

    def test_trend_filter_weight_convention(self):
        base = build_penalty(PenaltySpec("trend-filter", 5, (0.3,)))
        theta = np.array([0.0, 1.0, 3.0, 2.0, 2.0])
        second = np.diff(theta, n=2)
        assert support_function(base, theta) == pytest.approx(0.3 * np.abs(second).sum())

    def test_nearly_isotonic_penalizes_decreases_only(self):
        base = build_penalty(
            PenaltySpec("nearly-isotonic-graph", 3, (2.0,), edges=chain_edges(3)))
        assert support_function(base, [1.0, 2.0, 3.0]) == 0.0
        assert support_function(base, [3.0, 1.0, 2.0]) == pytest.approx(2.0 * 2.0)

    def test_nonneg_indicator(self):
        base = build_penalty(PenaltySpec("nonneg", 2))
        assert support_function(base, [1.0, 0.5]) == 0.0
        assert support_function(base, [1.0, -0.5]) == INF

    def test_sparse_fused_is_lasso_plus_fused(self):
        n = 4
        spec = PenaltySpec("sparse-fused", n, (0.7, 0.4))
        combined = build_penalty(spec)
        manual = sum_penalties(
            build_penalty(lasso_spec(n, 0.7)), build_penalty(fused_chain_spec(n, 0.4)))
        rng = np.random.default_rng(0)
        for _ in range(20):
            theta = rng.standard_normal(n)
            assert support_function(combined, theta) == pytest.approx(
                support_function(manual, theta), abs=1e-12)

    def test_unknown_kind_rejected(self):
        with pytest.raises(ValueError):
            PenaltySpec("ridge", 3, (1.0,))

    def test_edges_out_of_range_rejected(self):
        with pytest.raises(ValueError):
            PenaltySpec("fused-graph", 3, (1.0,), edges=((0, 3),))


class TestSumPenalties:
    def test_dimension_mismatch(self):
        with pytest.raises(ValueError):
            sum_penalties(build_penalty(lasso_spec(2)), build_penalty(lasso_spec(3)))

    def test_support_adds_at_random_points(self):
        rng = np.random.default_rng(1)
        a = build_penalty(lasso_spec(5, 0.6))
        b = build_penalty(fused_chain_spec(5, 1.2))
        s = sum_penalties(a, b)
        for _ in range(100):
            theta = rng.standard_normal(5) * 3
            total = support_function(a, theta) + support_function(b, theta)
            assert support_function(s, theta) == pytest.approx(total, abs=1e-10)

    def test_zero_lambda_summand_is_identity(self):
        a = build_penalty(fused_chain_spec(3, 0.5))
        zero = build_penalty(lasso_spec(3, 0.0))
        s = sum_penalties(a, zero)
        rng = np.random.default_rng(2)
        for _ in range(20):
            theta = rng.standard_normal(3)
            assert support_function(s, theta) == pytest.approx(
                support_function(a, theta), abs=1e-12)

    def test_sum_with_itself_doubles(self):
        a = build_penalty(lasso_spec(3, 0.9))
        s = sum_penalties(a, a)
        rng = np.random.default_rng(3)
        for _ in range(20):
            theta = rng.standard_normal(3)
            assert support_function(s, theta) == pytest.approx(
                2.0 * support_function(a, theta), abs=1e-12)


finite_vectors = st.lists(
    st.floats(-10, 10, allow_nan=False, allow_infinity=False), min_size=3, max_size=3
).map(np.array)


@given(theta=finite_vectors, t=st.floats(0, 50, allow_nan=False))
@settings(max_examples=50, deadline=None)
def test_positive_homogeneity(theta, t):
    base = build_penalty(fused_chain_spec(3, 0.7))
    h1 = support_function(base, theta)
    ht = support_function(base, t * theta)
    assert ht == pytest.approx(t * h1, abs=1e-9 * (1 + abs(t * h1)))


@given(a=finite_vectors, b=finite_vectors)
@settings(max_examples=50, deadline=None)
def test_midpoint_convexity(a, b):
    base = build_penalty(PenaltySpec("sparse-fused", 3, (0.5, 0.5)))
    mid = support_function(base, 0.5 * (a + b))
    avg = 0.5 * support_function(base, a) + 0.5 * support_function(base, b)
    assert mid <= avg + 1e-9 * (1 + abs(avg))


@given(data=st.data())
@settings(max_examples=50, deadline=None)
def test_membership_support_inequality(data):
    # Points of Z built from feasible coefficients satisfy <z, theta> <= h(theta).
    base = build_penalty(PenaltySpec("sparse-fused", 3, (0.8, 0.3)))
    coeffs = np.array([
        data.draw(st.floats(iv.lo if iv.lo > -INF else -50.0,
                            iv.hi if iv.hi < INF else 50.0,
                            allow_nan=False))
        for iv in base.intervals
    ])
    z = base.bases.T @ coeffs
    theta = np.array(data.draw(finite_vectors))
    h = support_function(base, theta)
    assert float(z @ theta) <= h + 1e-9 * (1 + abs(h))


def test_finite_intervals_give_finite_h_everywhere():
    rng = np.random.default_rng(4)
    base = build_penalty(PenaltySpec("trend-filter", 6, (2.0,)))
    for _ in range(50):
        assert np.isfinite(support_function(base, rng.standard_normal(6) * 100))


def test_half_infinite_interval_hits_infinity():
    base = build_penalty(isotonic_chain_spec(3))
    rng = np.random.default_rng(5)
    hit = sum(
        support_function(base, rng.standard_normal(3)) == INF for _ in range(50))
    assert hit > 0


class TestPenaltySpecJson:
    def test_round_trip_edges_one_based(self):
        spec = PenaltySpec("fused-graph", 4, (0.5,), edges=((0, 1), (2, 3)))
        d = spec.to_json_dict()
        assert d["edges"] == [[1, 2], [3, 4]]
        back = PenaltySpec.from_json_dict(d)
        assert back == spec

    def test_scalar_and_list_lambda(self):
        assert PenaltySpec.from_json_dict({"kind": "lasso", "n": 2, "lambda": 1}).lambdas == (1.0,)
        two = PenaltySpec.from_json_dict(
            {"kind": "sparse-fused", "n": 2, "lambda": [1, 2]})
        assert two.lambdas == (1.0, 2.0)

    def test_matrix_round_trip(self):
        spec = PenaltySpec("custom-matrix", 2, (1.0,), matrix=((2.0, 0.0), (0.0, 1.0)))
        back = PenaltySpec.from_json_dict(spec.to_json_dict())
        assert back.matrix == spec.matrix
