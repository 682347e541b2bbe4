"""Solver unit tests: simplex core, duality certificates, canonicalization."""

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from bruteforce import solve_by_enumeration
from hmpc.lp import (
    DimensionMismatch,
    GeneralLP,
    LPStatus,
    StandardLP,
    UnboundedVariable,
    canonicalize,
    solve_lp,
)


def test_two_variable_vertex_optimum():
    """min -x1 - 2 x2  s.t.  x1 + x2 + s = 4, x >= 0: optimum at x2 = 4."""
    lp = StandardLP(
        cost=np.array([-1.0, -2.0, 0.0]),
        eq_matrix=np.array([[1.0, 1.0, 1.0]]),
        eq_rhs=np.array([4.0]),
    )
    sol = solve_lp(lp)
    assert sol.status is LPStatus.OPTIMAL
    assert sol.objective == pytest.approx(-8.0, abs=1e-10)
    np.testing.assert_allclose(sol.primal, [0.0, 4.0, 0.0], atol=1e-9)
    # Dual of the single row prices the binding resource.
    assert sol.dual[0] == pytest.approx(-2.0, abs=1e-10)


def test_infeasible_negative_rhs():
    """x1 + x2 = -1 with x >= 0 has no solution."""
    lp = StandardLP(
        cost=np.array([1.0, 1.0]),
        eq_matrix=np.array([[1.0, 1.0]]),
        eq_rhs=np.array([-1.0]),
    )
    assert solve_lp(lp).status is LPStatus.INFEASIBLE


def test_unbounded_ray():
    """min -x1 with x1 - x2 = 0: the ray (t, t) decreases cost forever."""
    lp = StandardLP(
        cost=np.array([-1.0, 0.0]),
        eq_matrix=np.array([[1.0, -1.0]]),
        eq_rhs=np.array([0.0]),
    )
    assert solve_lp(lp).status is LPStatus.UNBOUNDED


def test_degenerate_problem_terminates():
    """Multiple rows active at the optimum; Bland fallback must not cycle."""
    A = np.array(
        [
            [1.0, 1.0, 1.0, 0.0, 0.0],
            [1.0, 0.0, 0.0, 1.0, 0.0],
            [0.0, 1.0, 0.0, 0.0, 1.0],
        ]
    )
    lp = StandardLP(
        cost=np.array([-1.0, -1.0, 0.0, 0.0, 0.0]),
        eq_matrix=A,
        eq_rhs=np.array([1.0, 1.0, 1.0]),
    )
    sol = solve_lp(lp)
    assert sol.status is LPStatus.OPTIMAL
    assert sol.objective == pytest.approx(-1.0, abs=1e-9)


def test_duplicate_row_dropped_with_zero_dual():
    lp = StandardLP(
        cost=np.array([1.0, 2.0]),
        eq_matrix=np.array([[1.0, 1.0], [2.0, 2.0]]),
        eq_rhs=np.array([3.0, 6.0]),
    )
    sol = solve_lp(lp)
    assert sol.status is LPStatus.OPTIMAL
    assert sol.objective == pytest.approx(3.0, abs=1e-9)
    assert len(sol.dropped_rows) == 1
    assert sol.dual[sol.dropped_rows[0]] == 0.0
    # The surviving multiplier still certifies the objective.
    assert sol.dual @ lp.eq_rhs == pytest.approx(sol.objective, abs=1e-9)


def test_inconsistent_duplicate_row_infeasible():
    lp = StandardLP(
        cost=np.array([1.0, 2.0]),
        eq_matrix=np.array([[1.0, 1.0], [2.0, 2.0]]),
        eq_rhs=np.array([3.0, 7.0]),
    )
    assert solve_lp(lp).status is LPStatus.INFEASIBLE


def test_shape_validation():
    with pytest.raises(DimensionMismatch):
        StandardLP(
            cost=np.array([1.0]),
            eq_matrix=np.array([[1.0, 2.0]]),
            eq_rhs=np.array([1.0]),
        )
    with pytest.raises(DimensionMismatch):
        StandardLP(
            cost=np.array([np.nan]),
            eq_matrix=np.array([[1.0]]),
            eq_rhs=np.array([1.0]),
        )


def _random_standard_lp(rng, max_vars=8, max_rows=4):
    n = int(rng.integers(1, max_vars + 1))
    m = int(rng.integers(1, max_rows + 1))
    A = rng.integers(-5, 6, size=(m, n)).astype(float)
    b = rng.integers(-5, 6, size=m).astype(float)
    c = rng.integers(-5, 6, size=n).astype(float)
    return StandardLP(cost=c, eq_matrix=A, eq_rhs=b)


def test_matches_enumeration_on_random_batch():
    """Status and objective agree with basis enumeration on 200 small LPs."""
    rng = np.random.default_rng(42)
    for _ in range(200):
        lp = _random_standard_lp(rng)
        want_status, want_obj = solve_by_enumeration(lp.cost, lp.eq_matrix, lp.eq_rhs)
        sol = solve_lp(lp)
        assert sol.status is want_status, (lp.cost, lp.eq_matrix, lp.eq_rhs)
        if want_status is LPStatus.OPTIMAL:
            assert sol.objective == pytest.approx(want_obj, abs=1e-8)


@settings(max_examples=80, deadline=None)
@given(st.integers(min_value=0, max_value=10_000))
def test_optimal_solutions_carry_duality_certificates(seed):
    """On every optimal solve: primal feasible, dual feasible, zero gap."""
    rng = np.random.default_rng(seed)
    lp = _random_standard_lp(rng, max_vars=7, max_rows=4)
    sol = solve_lp(lp)
    if sol.status is not LPStatus.OPTIMAL:
        return
    res = lp.eq_matrix @ sol.primal - lp.eq_rhs
    assert np.abs(res).max() < 1e-7
    assert sol.primal.min() > -1e-9
    slack = lp.cost - lp.eq_matrix.T @ sol.dual
    assert slack.min() > -1e-7
    assert sol.dual @ lp.eq_rhs == pytest.approx(sol.objective, abs=1e-7)


def test_canonicalize_shifts_bounds_into_rows():
    """{min x : -1 <= x <= 1} -> min (y - 1) with y + s = 2."""
    gen = GeneralLP(
        cost=np.array([1.0]),
        ub_matrix=np.zeros((0, 1)),
        ub_rhs=np.zeros(0),
        eq_matrix=np.zeros((0, 1)),
        eq_rhs=np.zeros(0),
        lower=np.array([-1.0]),
        upper=np.array([1.0]),
    )
    std, vmap = canonicalize(gen)
    np.testing.assert_allclose(std.eq_matrix, [[1.0, 1.0]])
    np.testing.assert_allclose(std.eq_rhs, [2.0])
    sol = solve_lp(std)
    assert sol.status is LPStatus.OPTIMAL
    assert vmap.original_objective(sol.objective) == pytest.approx(-1.0)
    np.testing.assert_allclose(vmap.original_primal(sol.primal), [-1.0])


def test_canonicalize_requires_finite_lower_bounds():
    gen = GeneralLP(
        cost=np.array([1.0]),
        ub_matrix=np.zeros((0, 1)),
        ub_rhs=np.zeros(0),
        eq_matrix=np.zeros((0, 1)),
        eq_rhs=np.zeros(0),
        lower=np.array([-np.inf]),
        upper=np.array([1.0]),
    )
    with pytest.raises(UnboundedVariable):
        canonicalize(gen)


def test_slack_dual_equals_inequality_multiplier():
    """max x1 + x2 (as min of negative) s.t. x1 + 2 x2 <= 4, 3 x1 + x2 <= 6.

    Optimum at the row intersection x = (8/5, 6/5); multipliers solve
    [1 3; 2 1] pi = c, giving pi = (-2/5, -1/5) in min convention."""
    gen = GeneralLP(
        cost=np.array([-1.0, -1.0]),
        ub_matrix=np.array([[1.0, 2.0], [3.0, 1.0]]),
        ub_rhs=np.array([4.0, 6.0]),
        eq_matrix=np.zeros((0, 2)),
        eq_rhs=np.zeros(0),
        lower=np.zeros(2),
        upper=np.array([np.inf, np.inf]),
    )
    std, vmap = canonicalize(gen)
    sol = solve_lp(std)
    assert sol.status is LPStatus.OPTIMAL
    assert vmap.original_objective(sol.objective) == pytest.approx(-14.0 / 5.0)
    np.testing.assert_allclose(sol.dual, [-2.0 / 5.0, -1.0 / 5.0], atol=1e-9)
    # Inequality duals of a min problem are nonpositive by construction:
    # the slack column (cost 0) prices the row.
    assert (sol.dual <= 1e-12).all()


def test_canonical_row_and_column_layout():
    gen = GeneralLP(
        cost=np.array([1.0, 2.0, 3.0]),
        ub_matrix=np.array([[1.0, 1.0, 0.0]]),
        ub_rhs=np.array([5.0]),
        eq_matrix=np.array([[0.0, 1.0, 1.0]]),
        eq_rhs=np.array([2.0]),
        lower=np.array([0.0, -1.0, 0.0]),
        upper=np.array([np.inf, 2.0, 4.0]),
    )
    std, vmap = canonicalize(gen)
    # Rows: 1 equality, 1 inequality, 2 bound rows; columns: 3 + 1 + 2.
    assert std.eq_matrix.shape == (4, 6)
    assert vmap.n_eq == 1 and vmap.n_ub == 1
    np.testing.assert_array_equal(vmap.bound_cols, [1, 2])
    assert vmap.bound_row_of(2) == 3
    # Equality rhs shifted by the lower bound of x2.
    assert std.eq_rhs[0] == pytest.approx(3.0)
    assert vmap.objective_offset == pytest.approx(-2.0)
