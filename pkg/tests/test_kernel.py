"""
This test module covers the interior-point kernel.

Functions:
- test_unconstrained_quadratic: A pure quadratic is minimised at its stationary point.
- test_active_bound_dual: The multiplier of an active bound is reported.
- test_equality_dual: Equality multipliers follow the Qx + c + A'y = 0 convention.
- test_linear_program: solve_lp finds a vertex optimum.
- test_quadratic_constraint: A disc constraint is honoured.
- test_infeasible_programs: Presolve detects crossed bounds and inconsistent equalities.
- test_rejects_non_convex: Non-symmetric or indefinite data is refused.
- test_box_qp_matches_clip: A separable box QP equals the clipped unconstrained optimum.
- test_solve_lp_rejects_quadratics: A quadratic objective is a configuration error for solve_lp.
- test_degenerate_bound_is_exact: An active bound with a zero multiplier is met exactly.
- test_dense_box_qp_matches_projected_gradient: Dense box QPs agree with projected gradient descent.

Dependencies:
- pytest / hypothesis: Used for writing and running tests.
- numpy: Used for building the programs.
- wolfsoftware.zonal_dispatch.kernel: The module being tested.
"""

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from wolfsoftware.zonal_dispatch import ConfigurationError, InfeasibleProblemError
from wolfsoftware.zonal_dispatch.kernel import ConvexProgram, KktSolution, QuadraticConstraint, solve, solve_lp, verify_kkt


def test_unconstrained_quadratic() -> None:
    """(x - 1)^2 is minimised at x = 1 with value 0."""
    program: ConvexProgram = ConvexProgram(n=1, Q=[[2.0]], c=[-2.0], constant=1.0)

    solution: KktSolution = solve(program)

    assert solution.status == 'optimal'  # nosec: B101
    assert solution.x[0] == pytest.approx(1.0, abs=1e-6)  # nosec: B101
    assert solution.objective == pytest.approx(0.0, abs=1e-6)  # nosec: B101


def test_active_bound_dual() -> None:
    """With x <= 1 the optimum of (x - 3)^2 sits on the bound with multiplier 4."""
    program: ConvexProgram = ConvexProgram(n=1, Q=[[2.0]], c=[-6.0], ub=[1.0], constant=9.0)

    solution: KktSolution = solve(program)

    assert solution.x[0] == pytest.approx(1.0, abs=1e-6)  # nosec: B101
    assert solution.duals['upper'][0] == pytest.approx(4.0, abs=1e-5)  # nosec: B101
    assert solution.objective == pytest.approx(4.0, abs=1e-5)  # nosec: B101
    assert verify_kkt(program, solution).ok(1e-6)  # nosec: B101


def test_equality_dual() -> None:
    """min x^2 + y^2 subject to x + y = 2 gives (1, 1) and y = -2."""
    program: ConvexProgram = ConvexProgram(n=2, Q=2.0 * np.eye(2), A=[[1.0, 1.0]], b=[2.0])

    solution: KktSolution = solve(program)

    np.testing.assert_allclose(solution.x, [1.0, 1.0], atol=1e-6)
    assert solution.duals['eq'][0] == pytest.approx(-2.0, abs=1e-5)  # nosec: B101
    assert verify_kkt(program, solution).ok(1e-6)  # nosec: B101


def test_linear_program() -> None:
    """min -x - y over the unit simplex has value -1."""
    program: ConvexProgram = ConvexProgram(n=2, c=[-1.0, -1.0], G=[[1.0, 1.0]], h=[1.0], lb=[0.0, 0.0])

    solution: KktSolution = solve_lp(program)

    assert solution.status == 'optimal'  # nosec: B101
    assert solution.objective == pytest.approx(-1.0, abs=1e-6)  # nosec: B101
    assert solution.duals['ineq'][0] == pytest.approx(1.0, abs=1e-5)  # nosec: B101


def test_solve_lp_rejects_quadratics() -> None:
    """A quadratic objective is a configuration error for solve_lp."""
    with pytest.raises(ConfigurationError):
        solve_lp(ConvexProgram(n=1, Q=[[1.0]]))


def test_quadratic_constraint() -> None:
    """min -x - y on the disc x^2 + y^2 <= 2 is reached at (1, 1)."""
    disc: QuadraticConstraint = QuadraticConstraint(P=2.0 * np.eye(2), q=np.zeros(2), r=-2.0, name='disc')
    program: ConvexProgram = ConvexProgram(n=2, c=[-1.0, -1.0], qineq=[disc])

    solution: KktSolution = solve(program)

    np.testing.assert_allclose(solution.x, [1.0, 1.0], atol=1e-5)
    assert solution.duals['qineq'][0] == pytest.approx(0.5, abs=1e-4)  # nosec: B101
    assert verify_kkt(program, solution).ok(1e-6)  # nosec: B101


@pytest.mark.parametrize('program', [
    ConvexProgram(n=1, Q=[[1.0]], lb=[2.0], ub=[1.0]),
    ConvexProgram(n=2, Q=np.eye(2), A=[[1.0, 1.0], [2.0, 2.0]], b=[1.0, 3.0]),
])
def test_infeasible_programs(program: ConvexProgram) -> None:
    """Crossed bounds and inconsistent equalities raise, or report with raise_errors off."""
    with pytest.raises(InfeasibleProblemError):
        solve(program)

    solution: KktSolution = solve(program, {'raise_errors': False})

    assert solution.status == 'infeasible'  # nosec: B101
    assert np.all(np.isnan(solution.x))  # nosec: B101


@pytest.mark.parametrize('Q', [
    [[1.0, 1.0], [0.0, 1.0]],
    [[1.0, 0.0], [0.0, -1.0]],
])
def test_rejects_non_convex(Q: list) -> None:
    """Asymmetric or indefinite Hessians are refused before solving."""
    with pytest.raises(ConfigurationError):
        solve(ConvexProgram(n=2, Q=Q))


@settings(max_examples=40, deadline=None)
@given(
    q=st.lists(st.floats(min_value=0.1, max_value=10.0), min_size=3, max_size=3),
    c=st.lists(st.floats(min_value=-10.0, max_value=10.0), min_size=3, max_size=3),
    lb=st.lists(st.floats(min_value=-5.0, max_value=0.0), min_size=3, max_size=3),
    width=st.lists(st.floats(min_value=0.1, max_value=5.0), min_size=3, max_size=3),
)
def test_box_qp_matches_clip(q: list, c: list, lb: list, width: list) -> None:
    """A diagonal QP over a box is solved coordinate-wise by clipping."""
    lower: np.ndarray = np.array(lb)
    upper: np.ndarray = lower + np.array(width)
    program: ConvexProgram = ConvexProgram(n=3, Q=np.diag(q), c=c, lb=lower, ub=upper)

    solution: KktSolution = solve(program)

    expected: np.ndarray = np.clip(-np.array(c) / np.array(q), lower, upper)
    np.testing.assert_allclose(solution.x, expected, atol=1e-6)


def test_degenerate_bound_is_exact() -> None:
    """A bound that is active with a zero multiplier is met exactly."""
    program: ConvexProgram = ConvexProgram(n=3, Q=np.eye(3), lb=[0.0, -3.0, 0.0], ub=[1.0, -2.0, 3.0])

    solution: KktSolution = solve(program)

    np.testing.assert_allclose(solution.x, [0.0, -2.0, 0.0], atol=1e-9)
    assert solution.duals['upper'][1] == pytest.approx(2.0, abs=1e-9)  # nosec: B101
    assert verify_kkt(program, solution).ok(1e-8)  # nosec: B101


def _projected_gradient(Q: np.ndarray, c: np.ndarray, lower: np.ndarray, upper: np.ndarray, iterations: int = 5000) -> np.ndarray:
    """Minimise 1/2 x'Qx + c'x over a box by projected gradient steps of length 1/L."""
    step: float = 1.0 / float(np.max(np.linalg.eigvalsh(Q)))
    x: np.ndarray = np.clip(np.zeros(Q.shape[0]), lower, upper)
    for _ in range(iterations):
        x = np.clip(x - step * (Q @ x + c), lower, upper)
    return x


@settings(max_examples=200, deadline=None)
@given(
    m=st.lists(st.floats(min_value=-2.0, max_value=2.0), min_size=16, max_size=16),
    c=st.lists(st.floats(min_value=-10.0, max_value=10.0), min_size=4, max_size=4),
    lb=st.lists(st.floats(min_value=-5.0, max_value=0.0), min_size=4, max_size=4),
    width=st.lists(st.floats(min_value=0.1, max_value=5.0), min_size=4, max_size=4),
)
def test_dense_box_qp_matches_projected_gradient(m: list, c: list, lb: list, width: list) -> None:
    """A dense positive definite QP over a box agrees with projected gradient descent."""
    M: np.ndarray = np.array(m).reshape(4, 4)
    Q: np.ndarray = M @ M.T + 0.5 * np.eye(4)
    lower: np.ndarray = np.array(lb)
    upper: np.ndarray = lower + np.array(width)
    program: ConvexProgram = ConvexProgram(n=4, Q=Q, c=c, lb=lower, ub=upper)

    solution: KktSolution = solve(program)
    expected: np.ndarray = _projected_gradient(Q, np.array(c), lower, upper)

    np.testing.assert_allclose(solution.x, expected, atol=1e-6)
    assert solution.objective <= program.objective(expected) + 1e-8  # nosec: B101
