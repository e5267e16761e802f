"""
This module provides the convex solver every optimisation problem in the package runs on.

It minimises a convex quadratic objective subject to linear equalities, linear inequalities, convex
quadratic inequalities and variable bounds, using a dense primal-dual interior-point method with a
Mehrotra predictor-corrector and a fixed, seedless starting point:

    minimise    1/2 x'Qx + c'x + constant
    subject to  A x = b
                G x <= h
                1/2 x'P_k x + q_k'x + r_k <= 0      for every quadratic row k
                lb <= x <= ub

Residuals are scaled by the magnitude of the data they are built from, so the same tolerance is
meaningful for problems mixing unit-size and heavily penalised terms.

Once the interior point meets the tolerance, the rows it leaves active (multiplier larger than slack)
are held as equalities and the reduced KKT system is solved directly. The polished point replaces the
interior one whenever it passes the independent KKT check, which puts active bounds exactly on the
bound instead of a barrier distance away.

Classes:
- QuadraticConstraint: One convex quadratic inequality.
- ConvexProgram: The problem data.
- KktSolution: Primal point, multipliers, status and final KKT residual.
- KktReport: The result of the independent KKT re-check.

Functions:
- check_program: Validate dimensions, finiteness, symmetry and positive semi-definiteness.
- solve: Solve a convex program.
- solve_lp: Solve a linear program (no quadratic terms).
- verify_kkt: Re-check a solution against the original program data.

Dependencies:
- numpy / scipy.linalg: Dense LU of the reduced KKT system, pivoted QR and pivoted Cholesky in presolve.

Example usage:
    from .kernel import ConvexProgram, solve

    program = ConvexProgram(n=1, Q=[[2.0]], c=[-2.0], constant=1.0)
    sol = solve(program)
    print(sol.x, sol.objective)
"""

from dataclasses import dataclass, field
from typing import Dict, List, Optional, Tuple

import logging

import numpy as np
import scipy.linalg as la

from .constants import (
    DEFAULT_KERNEL_MAX_ITER, DEFAULT_KERNEL_TOL, KERNEL_CERTIFICATE_TOL, KERNEL_POLISH_PASSES, KERNEL_STEP_FRACTION, KERNEL_UNBOUNDED_NORM
)
from .exceptions import ConfigurationError, InfeasibleProblemError, IterationLimitError, UnboundedProblemError

logger: logging.Logger = logging.getLogger(__name__)

STATUS_OPTIMAL: str = 'optimal'
STATUS_INFEASIBLE: str = 'infeasible'
STATUS_UNBOUNDED: str = 'unbounded'
STATUS_ITERATION_LIMIT: str = 'iteration_limit'

REGULARISATION: float = 1e-10
DUAL_BLOWUP: float = 1e6


@dataclass
class QuadraticConstraint:
    """
    A convex quadratic inequality 1/2 x'Px + q'x + r <= 0.

    Attributes:
        P (np.ndarray): Symmetric positive semi-definite matrix.
        q (np.ndarray): Linear term.
        r (float): Constant term.
        name (str): Optional label used in listings.
    """

    P: np.ndarray
    q: np.ndarray
    r: float = 0.0
    name: str = ''

    def __post_init__(self) -> None:
        """Coerce the data to float arrays."""
        self.P = np.asarray(self.P, dtype=float)
        self.q = np.asarray(self.q, dtype=float)
        self.r = float(self.r)

    def value(self, x: np.ndarray) -> float:
        """Evaluate the constraint function at x."""
        return float(0.5 * x @ self.P @ x + self.q @ x + self.r)

    def gradient(self, x: np.ndarray) -> np.ndarray:
        """Return the gradient at x."""
        return self.P @ x + self.q


@dataclass
class ConvexProgram:  # pylint: disable=too-many-instance-attributes
    """
    A convex quadratic program with quadratic inequalities.

    Missing blocks default to empty; missing bounds default to +-inf.

    Attributes:
        n (int): Number of variables.
        Q (np.ndarray): Objective Hessian (n x n, symmetric PSD).
        c (np.ndarray): Objective linear term.
        A (np.ndarray): Equality matrix.
        b (np.ndarray): Equality right-hand side.
        G (np.ndarray): Inequality matrix.
        h (np.ndarray): Inequality right-hand side.
        qineq (List[QuadraticConstraint]): Quadratic inequalities.
        lb (np.ndarray): Lower bounds.
        ub (np.ndarray): Upper bounds.
        constant (float): Objective constant.
        names (List[str]): Optional variable names used in listings.
    """

    n: int
    Q: Optional[np.ndarray] = None
    c: Optional[np.ndarray] = None
    A: Optional[np.ndarray] = None
    b: Optional[np.ndarray] = None
    G: Optional[np.ndarray] = None
    h: Optional[np.ndarray] = None
    qineq: List[QuadraticConstraint] = field(default_factory=list)
    lb: Optional[np.ndarray] = None
    ub: Optional[np.ndarray] = None
    constant: float = 0.0
    names: List[str] = field(default_factory=list)

    def __post_init__(self) -> None:
        """Fill defaults and coerce shapes."""
        n: int = self.n
        self.Q = np.zeros((n, n)) if self.Q is None else np.asarray(self.Q, dtype=float).reshape(n, n)
        self.c = np.zeros(n) if self.c is None else np.asarray(self.c, dtype=float).reshape(n)
        self.A = np.zeros((0, n)) if self.A is None else np.asarray(self.A, dtype=float).reshape(-1, n)
        self.b = np.zeros(0) if self.b is None else np.asarray(self.b, dtype=float).reshape(-1)
        self.G = np.zeros((0, n)) if self.G is None else np.asarray(self.G, dtype=float).reshape(-1, n)
        self.h = np.zeros(0) if self.h is None else np.asarray(self.h, dtype=float).reshape(-1)
        self.lb = np.full(n, -np.inf) if self.lb is None else np.asarray(self.lb, dtype=float).reshape(n)
        self.ub = np.full(n, np.inf) if self.ub is None else np.asarray(self.ub, dtype=float).reshape(n)
        self.constant = float(self.constant)

    @property
    def is_linear(self) -> bool:
        """True when there is no quadratic term anywhere."""
        return not self.qineq and not np.any(self.Q)

    def objective(self, x: np.ndarray) -> float:
        """Evaluate the objective (constant included) at x."""
        return float(0.5 * x @ self.Q @ x + self.c @ x + self.constant)


@dataclass
class KktSolution:
    """
    The result of a solve.

    Attributes:
        x (np.ndarray): The primal point.
        duals (Dict[str, np.ndarray]): Multipliers keyed 'eq', 'ineq', 'qineq', 'lower', 'upper'.
        status (str): 'optimal', 'infeasible', 'unbounded' or 'iteration_limit'.
        kkt_residual (float): Max of the scaled primal, dual and complementarity residuals.
        iterations (int): Interior-point iterations performed.
        objective (float): Objective value at x.
    """

    x: np.ndarray
    duals: Dict[str, np.ndarray]
    status: str
    kkt_residual: float
    iterations: int = 0
    objective: float = float('nan')


@dataclass(frozen=True)
class KktReport:
    """
    Independent KKT residuals of a solution.

    Attributes:
        primal (float): Scaled primal infeasibility.
        dual (float): Scaled stationarity residual.
        complementarity (float): Scaled complementary slackness.
        sign (float): Largest negative multiplier magnitude.
    """

    primal: float
    dual: float
    complementarity: float
    sign: float

    @property
    def kkt_residual(self) -> float:
        """The largest of the four residuals."""
        return max(self.primal, self.dual, self.complementarity, self.sign)

    def ok(self, tol: float = DEFAULT_KERNEL_TOL) -> bool:
        """True when every residual is within tol."""
        return self.kkt_residual <= tol


def _is_psd(M: np.ndarray) -> bool:
    """Pivoted-Cholesky test of positive semi-definiteness."""
    if M.size == 0 or not np.any(M):
        return True
    scale: float = float(np.max(np.abs(M)))
    c, piv, rank, _ = la.lapack.dpstrf(M, tol=1e-13 * scale)
    U: np.ndarray = np.triu(c)[:rank]
    p: np.ndarray = piv - 1
    remainder: np.ndarray = M[np.ix_(p, p)] - U.T @ U
    return bool(np.max(np.abs(remainder)) <= 1e-9 * scale)


def check_program(program: ConvexProgram) -> None:
    """
    Validate a program.

    Arguments:
        program (ConvexProgram): The program.

    Raises:
        ConfigurationError: On inconsistent dimensions, non-finite data, or a non-symmetric / indefinite matrix.
    """
    n: int = program.n
    if program.A.shape[0] != program.b.shape[0]:
        raise ConfigurationError(f"equality block has {program.A.shape[0]} rows but {program.b.shape[0]} right-hand sides")
    if program.G.shape[0] != program.h.shape[0]:
        raise ConfigurationError(f"inequality block has {program.G.shape[0]} rows but {program.h.shape[0]} right-hand sides")
    for name in ('Q', 'c', 'A', 'b', 'G', 'h'):
        if not np.all(np.isfinite(getattr(program, name))):
            raise ConfigurationError(f"program data '{name}' must be finite")
    if np.any(np.isnan(program.lb)) or np.any(np.isnan(program.ub)):
        raise ConfigurationError("bounds must not be NaN")

    matrices: List[Tuple[str, np.ndarray]] = [('Q', program.Q)]
    for k, qc in enumerate(program.qineq):
        if qc.P.shape != (n, n) or qc.q.shape != (n,):
            raise ConfigurationError(f"quadratic constraint {k} has inconsistent dimensions")
        matrices.append((f"P[{k}]", qc.P))

    for name, M in matrices:
        if not np.allclose(M, M.T, atol=1e-12, rtol=1e-10):
            raise ConfigurationError(f"matrix {name} must be symmetric")
        if not _is_psd(M):
            raise ConfigurationError(f"matrix {name} must be positive semi-definite")


@dataclass
class _Standard:  # pylint: disable=too-many-instance-attributes
    """The presolved problem in solver form plus the maps back to the caller's rows."""

    A: np.ndarray
    b: np.ndarray
    L: np.ndarray
    hL: np.ndarray
    eq_rows: np.ndarray
    fixed: np.ndarray
    g_rows: np.ndarray
    upper: np.ndarray
    lower: np.ndarray


def _presolve(program: ConvexProgram) -> _Standard:
    """Turn fixed bounds into equalities, drop empty and dependent rows, stack the inequalities."""
    n: int = program.n
    lb: np.ndarray = program.lb
    ub: np.ndarray = program.ub

    crossed: np.ndarray = np.flatnonzero(lb > ub)
    if crossed.size:
        raise InfeasibleProblemError(f"lower bound exceeds upper bound for variable(s) {crossed.tolist()}", residual=float(np.max(lb[crossed] - ub[crossed])))

    fixed: np.ndarray = np.flatnonzero(np.isfinite(lb) & (lb == ub))
    A: np.ndarray = np.vstack([program.A, np.eye(n)[fixed]])
    b: np.ndarray = np.concatenate([program.b, lb[fixed]])
    origin: np.ndarray = np.arange(A.shape[0])

    empty: np.ndarray = ~np.any(A != 0.0, axis=1)
    if np.any(np.abs(b[empty]) > 1e-12):
        raise InfeasibleProblemError("equality row 0 = b with b != 0", residual=float(np.max(np.abs(b[empty]))))
    A, b, origin = A[~empty], b[~empty], origin[~empty]

    if A.shape[0]:
        _, R, piv = la.qr(A.T, mode='economic', pivoting=True)
        diag: np.ndarray = np.abs(np.diag(R))
        rank: int = int(np.sum(diag > 1e-10 * max(diag[0], 1.0))) if diag.size else 0
        keep: np.ndarray = np.sort(piv[:rank])
        if rank < A.shape[0]:
            x_ls: np.ndarray = np.linalg.lstsq(A[keep], b[keep], rcond=None)[0]
            gap: float = float(np.max(np.abs(A @ x_ls - b)))
            if gap > 1e-9 * (1.0 + float(np.max(np.abs(b)))):
                raise InfeasibleProblemError("inconsistent linearly dependent equality rows", residual=gap)
        A, b, origin = A[keep], b[keep], origin[keep]

    g_keep: np.ndarray = np.flatnonzero(np.any(program.G != 0.0, axis=1))
    g_empty: np.ndarray = np.setdiff1d(np.arange(program.G.shape[0]), g_keep)
    if np.any(program.h[g_empty] < 0):
        raise InfeasibleProblemError("inequality row 0 <= h with h < 0", residual=float(-np.min(program.h[g_empty])))

    free: np.ndarray = ~np.isin(np.arange(n), fixed)
    upper: np.ndarray = np.flatnonzero(np.isfinite(ub) & free)
    lower: np.ndarray = np.flatnonzero(np.isfinite(lb) & free)
    eye: np.ndarray = np.eye(n)
    L: np.ndarray = np.vstack([program.G[g_keep], eye[upper], -eye[lower]])
    hL: np.ndarray = np.concatenate([program.h[g_keep], ub[upper], -lb[lower]])

    return _Standard(A=A, b=b, L=L, hL=hL, eq_rows=origin, fixed=fixed, g_rows=g_keep, upper=upper, lower=lower)


def _unpack_duals(program: ConvexProgram, std: _Standard, y: np.ndarray, z: np.ndarray) -> Dict[str, np.ndarray]:
    """Map solver multipliers back onto the caller's constraint families."""
    n: int = program.n
    m_eq: int = program.A.shape[0]
    y_full: np.ndarray = np.zeros(m_eq + std.fixed.size)
    y_full[std.eq_rows] = y

    ineq: np.ndarray = np.zeros(program.G.shape[0])
    n_g: int = std.g_rows.size
    n_u: int = std.upper.size
    n_l: int = std.lower.size
    ineq[std.g_rows] = z[:n_g]

    lower: np.ndarray = np.zeros(n)
    upper: np.ndarray = np.zeros(n)
    upper[std.upper] = z[n_g:n_g + n_u]
    lower[std.lower] = z[n_g + n_u:n_g + n_u + n_l]

    y_fixed: np.ndarray = y_full[m_eq:]
    upper[std.fixed] = np.maximum(y_fixed, 0.0)
    lower[std.fixed] = np.maximum(-y_fixed, 0.0)

    return {
        'eq': y_full[:m_eq],
        'ineq': ineq,
        'qineq': np.array(z[n_g + n_u + n_l:], dtype=float),
        'lower': lower,
        'upper': upper,
    }


def verify_kkt(program: ConvexProgram, solution: KktSolution) -> KktReport:
    """
    Re-check a solution against the original program data.

    Only the reported point and multipliers are used; nothing from the solver's internal state.

    Arguments:
        program (ConvexProgram): The program as the caller built it.
        solution (KktSolution): The solution to check.

    Returns:
        KktReport: Scaled primal, stationarity, complementarity and multiplier-sign residuals.
    """
    x: np.ndarray = solution.x
    duals: Dict[str, np.ndarray] = solution.duals
    y: np.ndarray = duals['eq']
    z: np.ndarray = duals['ineq']
    zq: np.ndarray = duals['qineq']
    zl: np.ndarray = duals['lower']
    zu: np.ndarray = duals['upper']

    eq_res: np.ndarray = program.A @ x - program.b
    g_lin: np.ndarray = program.G @ x - program.h
    g_quad: np.ndarray = np.array([qc.value(x) for qc in program.qineq])
    finite_l: np.ndarray = np.isfinite(program.lb)
    finite_u: np.ndarray = np.isfinite(program.ub)
    g_lower: np.ndarray = np.where(finite_l, np.where(finite_l, program.lb, 0.0) - x, 0.0)
    g_upper: np.ndarray = np.where(finite_u, x - np.where(finite_u, program.ub, 0.0), 0.0)

    def scaled_max(values: np.ndarray, scale: float) -> float:
        return float(np.max(values)) / (1.0 + scale) if values.size else 0.0

    bound_scale: float = float(np.max(np.abs(np.concatenate([program.lb[finite_l], program.ub[finite_u], [0.0]]))))
    primal: float = max(
        scaled_max(np.abs(eq_res), float(np.max(np.abs(program.b), initial=0.0))),
        scaled_max(np.maximum(g_lin, 0.0), float(np.max(np.abs(program.h), initial=0.0))),
        max((max(qc.value(x), 0.0) / (1.0 + abs(qc.r)) for qc in program.qineq), default=0.0),
        scaled_max(np.maximum(np.concatenate([g_lower, g_upper]), 0.0), bound_scale),
    )

    terms: List[np.ndarray] = [program.Q @ x, program.c, program.A.T @ y, program.G.T @ z, zu - zl]
    terms.extend(zk * qc.gradient(x) for zk, qc in zip(zq, program.qineq))
    gradient: np.ndarray = np.sum(terms, axis=0) if terms else np.zeros(program.n)
    magnitude: float = max(float(np.max(np.abs(t), initial=0.0)) for t in terms)
    dual: float = float(np.max(np.abs(gradient), initial=0.0)) / (1.0 + magnitude)

    products: np.ndarray = np.concatenate([z * g_lin, zq * g_quad, zl * g_lower, zu * g_upper])
    objective_scale: float = abs(program.objective(x))
    complementarity: float = scaled_max(np.abs(products), objective_scale)

    multipliers: np.ndarray = np.concatenate([z, zq, zl, zu])
    sign: float = float(max(-np.min(multipliers, initial=0.0), 0.0))

    return KktReport(primal=primal, dual=dual, complementarity=complementarity, sign=sign)


def _max_step(v: np.ndarray, dv: np.ndarray) -> float:
    """Largest alpha keeping v + alpha dv >= 0 (inf when dv >= 0)."""
    negative: np.ndarray = dv < 0
    if not np.any(negative):
        return float('inf')
    return float(np.min(-v[negative] / dv[negative]))


def _certificate(std: _Standard, y: np.ndarray, z_lin: np.ndarray) -> Tuple[bool, float]:
    """Check whether the normalised multipliers form a Farkas certificate of infeasibility."""
    norm: float = float(np.sum(np.abs(y)) + np.sum(np.abs(z_lin)))
    if norm == 0.0:
        return False, float('inf')
    y_hat: np.ndarray = y / norm
    z_hat: np.ndarray = np.maximum(z_lin, 0.0) / norm
    residual: float = float(np.max(np.abs(std.A.T @ y_hat + std.L.T @ z_hat), initial=0.0))
    value: float = float(std.b @ y_hat + std.hL @ z_hat)
    return residual <= KERNEL_CERTIFICATE_TOL and value < -KERNEL_CERTIFICATE_TOL, residual


def _initial_point(program: ConvexProgram, std: _Standard) -> np.ndarray:
    """Midpoint of finite bounds (one unit inside one-sided bounds), projected onto the equalities."""
    lb: np.ndarray = program.lb
    ub: np.ndarray = program.ub
    x: np.ndarray = np.zeros(program.n)
    both: np.ndarray = np.isfinite(lb) & np.isfinite(ub)
    only_l: np.ndarray = np.isfinite(lb) & ~np.isfinite(ub)
    only_u: np.ndarray = ~np.isfinite(lb) & np.isfinite(ub)
    x[both] = 0.5 * (lb[both] + ub[both])
    x[only_l] = lb[only_l] + 1.0
    x[only_u] = ub[only_u] - 1.0
    if std.A.shape[0]:
        x = x + np.linalg.lstsq(std.A, std.b - std.A @ x, rcond=None)[0]
    return x


def _polish(  # pylint: disable=too-many-arguments,too-many-locals
    program: ConvexProgram,
    std: _Standard,
    qcs: List[QuadraticConstraint],
    x: np.ndarray,
    s: np.ndarray,
    z: np.ndarray
) -> Optional[Tuple[np.ndarray, np.ndarray, np.ndarray]]:
    """
    Hold the active rows as equalities and solve the reduced KKT system from x.

    Rows are active when their multiplier exceeds their slack. A few passes add rows the step would
    violate and drop rows whose multiplier turns negative.

    Returns:
        Optional[Tuple[np.ndarray, np.ndarray, np.ndarray]]: (x, y, z) in solver form, or None when the
        active set does not settle.
    """
    n: int = program.n
    m_eq: int = std.A.shape[0]
    m_lin: int = std.L.shape[0]

    def g_of(point: np.ndarray) -> np.ndarray:
        return np.concatenate([std.L @ point - std.hL, [qc.value(point) for qc in qcs]])

    g: np.ndarray = g_of(x)
    jac: np.ndarray = np.vstack([std.L, np.array([qc.gradient(x) for qc in qcs]).reshape(-1, n)])
    H: np.ndarray = program.Q.copy()
    for zk, qc in zip(z[m_lin:], qcs):
        H += zk * qc.P
    gradient: np.ndarray = program.Q @ x + program.c
    g_tol: float = 1e-12 * (1.0 + float(np.max(np.abs(std.hL), initial=0.0)))

    active: np.ndarray = z > s
    for _ in range(KERNEL_POLISH_PASSES):
        rows: np.ndarray = np.flatnonzero(active)
        J: np.ndarray = jac[rows]
        k: int = rows.size
        K: np.ndarray = np.block([
            [H, std.A.T, J.T],
            [std.A, np.zeros((m_eq, m_eq)), np.zeros((m_eq, k))],
            [J, np.zeros((k, m_eq)), np.zeros((k, k))],
        ])
        rhs: np.ndarray = np.concatenate([-gradient, std.b - std.A @ x, -g[rows]])
        sol: np.ndarray = la.lstsq(K, rhs, check_finite=False)[0]
        if not np.all(np.isfinite(sol)):
            return None

        x_new: np.ndarray = x + sol[:n]
        z_new: np.ndarray = np.zeros(z.size)
        z_new[rows] = sol[n + m_eq:]
        violated: np.ndarray = ~active & (g_of(x_new) > g_tol)
        dropped: np.ndarray = active & (z_new < -1e-12 * (1.0 + float(np.max(np.abs(z_new), initial=0.0))))
        if not np.any(violated) and not np.any(dropped):
            return x_new, sol[n:n + m_eq], np.maximum(z_new, 0.0)
        active = (active | violated) & ~dropped
    return None


def _ipm(program: ConvexProgram, config: Dict, quadratic: bool) -> KktSolution:  # noqa: C901  pylint: disable=too-many-statements
    """The Mehrotra predictor-corrector loop shared by solve and solve_lp."""
    tol: float = config.get('kernel_tol', DEFAULT_KERNEL_TOL)
    max_iter: int = config.get('kernel_max_iter', DEFAULT_KERNEL_MAX_ITER)

    std: _Standard = _presolve(program)
    n: int = program.n
    m_eq: int = std.A.shape[0]
    m_lin: int = std.L.shape[0]
    qcs: List[QuadraticConstraint] = program.qineq if quadratic else []
    m: int = m_lin + len(qcs)

    def g_of(x: np.ndarray) -> np.ndarray:
        return np.concatenate([std.L @ x - std.hL, [qc.value(x) for qc in qcs]])

    def jac_of(x: np.ndarray) -> np.ndarray:
        if not qcs:
            return std.L
        return np.vstack([std.L, np.array([qc.gradient(x) for qc in qcs])])

    x: np.ndarray = _initial_point(program, std)
    y: np.ndarray = np.zeros(m_eq)
    s: np.ndarray = np.maximum(-g_of(x), 1.0)
    z: np.ndarray = np.ones(m)

    b_scale: float = 1.0 + float(np.max(np.abs(std.b), initial=0.0))
    h_scale: float = 1.0 + float(np.max(np.abs(std.hL), initial=0.0)) + max((abs(qc.r) for qc in qcs), default=0.0)
    data_scale: float = 1.0 + float(np.max(np.abs(program.c), initial=0.0)) + float(np.max(np.abs(program.Q), initial=0.0))

    def fail(status: str, iterations: int, residual: float) -> KktSolution:
        return KktSolution(
            x=x, duals=_unpack_duals(program, std, y, z), status=status, kkt_residual=residual,
            iterations=iterations, objective=program.objective(x),
        )

    residual: float = float('inf')
    for iteration in range(max_iter + 1):
        g: np.ndarray = g_of(x)
        Jg: np.ndarray = jac_of(x)
        grad_terms: List[np.ndarray] = [program.Q @ x, program.c, std.A.T @ y, Jg.T @ z]
        r_d: np.ndarray = np.sum(grad_terms, axis=0)
        r_p: np.ndarray = std.A @ x - std.b
        r_g: np.ndarray = g + s
        mu: float = float(s @ z) / m if m else 0.0

        objective_scale: float = 1.0 + abs(program.objective(x))
        rd: float = float(np.max(np.abs(r_d), initial=0.0)) / (1.0 + max(float(np.max(np.abs(t), initial=0.0)) for t in grad_terms))
        rp: float = max(float(np.max(np.abs(r_p), initial=0.0)) / b_scale, float(np.max(np.abs(r_g), initial=0.0)) / h_scale)
        rc: float = float(np.max(s * z, initial=0.0)) / objective_scale
        residual = max(rd, rp, rc)

        if residual <= tol:
            candidate: KktSolution = KktSolution(
                x=x.copy(), duals=_unpack_duals(program, std, y, z), status=STATUS_OPTIMAL, kkt_residual=residual,
                iterations=iteration, objective=program.objective(x),
            )
            report: KktReport = verify_kkt(program, candidate)
            polished: Optional[Tuple[np.ndarray, np.ndarray, np.ndarray]] = _polish(program, std, qcs, x, s, z)
            if polished is not None:
                refined: KktSolution = KktSolution(
                    x=polished[0], duals=_unpack_duals(program, std, polished[1], polished[2]), status=STATUS_OPTIMAL,
                    kkt_residual=residual, iterations=iteration, objective=program.objective(polished[0]),
                )
                refined_report: KktReport = verify_kkt(program, refined)
                if refined_report.ok(tol):
                    refined.kkt_residual = refined_report.kkt_residual
                    logger.debug("Kernel converged in %d iterations, polished (residual %.2e)", iteration, refined_report.kkt_residual)
                    return refined
            if report.ok(tol):
                candidate.kkt_residual = report.kkt_residual
                logger.debug("Kernel converged in %d iterations (residual %.2e)", iteration, report.kkt_residual)
                return candidate

        if iteration == max_iter:
            break

        if float(np.max(np.abs(x), initial=0.0)) > KERNEL_UNBOUNDED_NORM:
            return fail(STATUS_UNBOUNDED, iteration, residual)

        dual_norm: float = max(float(np.max(np.abs(y), initial=0.0)), float(np.max(z, initial=0.0)))
        if dual_norm > DUAL_BLOWUP * data_scale:
            infeasible, cert = _certificate(std, y, z[:m_lin])
            if infeasible:
                return fail(STATUS_INFEASIBLE, iteration, cert)

        H: np.ndarray = program.Q.copy() if quadratic else np.zeros((n, n))
        for zk, qc in zip(z[m_lin:], qcs):
            H += zk * qc.P
        W: np.ndarray = z / s
        K: np.ndarray = np.block([
            [H + Jg.T @ (W[:, None] * Jg) + REGULARISATION * np.eye(n), std.A.T],
            [std.A, -REGULARISATION * np.eye(m_eq)],
        ])
        factor: Tuple[np.ndarray, np.ndarray] = la.lu_factor(K, check_finite=False)

        def direction(r_c: np.ndarray) -> Tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
            rhs: np.ndarray = np.concatenate([-r_d - Jg.T @ (W * r_g - r_c / s), -r_p])
            sol: np.ndarray = la.lu_solve(factor, rhs, check_finite=False)
            dx: np.ndarray = sol[:n]
            dy: np.ndarray = sol[n:]
            dz: np.ndarray = W * (Jg @ dx + r_g) - r_c / s
            ds: np.ndarray = (-r_c - s * dz) / z
            return dx, dy, dz, ds

        dx, dy, dz, ds = direction(s * z)
        if m:
            alpha_aff: float = min(1.0, _max_step(s, ds), _max_step(z, dz))
            mu_aff: float = float((s + alpha_aff * ds) @ (z + alpha_aff * dz)) / m
            sigma: float = (mu_aff / mu) ** 3 if mu > 0 else 0.0
            dx, dy, dz, ds = direction(s * z + ds * dz - sigma * mu)
            alpha: float = min(1.0, KERNEL_STEP_FRACTION * min(_max_step(s, ds), _max_step(z, dz)))
        else:
            alpha = 1.0

        step: np.ndarray = np.concatenate([dx, dy, dz, ds])
        if not np.all(np.isfinite(step)):
            raise IterationLimitError("KKT system became singular", residual=residual)

        x = x + alpha * dx
        y = y + alpha * dy
        z = z + alpha * dz
        s = s + alpha * ds

    infeasible, cert = _certificate(std, y, z[:m_lin])
    if infeasible:
        return fail(STATUS_INFEASIBLE, max_iter, cert)
    return fail(STATUS_ITERATION_LIMIT, max_iter, residual)


def _finish(solution: KktSolution, config: Dict) -> KktSolution:
    """Raise for non-optimal statuses unless the caller asked for the status instead."""
    if solution.status == STATUS_OPTIMAL or not config.get('raise_errors', True):
        return solution
    if solution.status == STATUS_INFEASIBLE:
        raise InfeasibleProblemError("Problem is infeasible (Farkas certificate found)", residual=solution.kkt_residual)
    if solution.status == STATUS_UNBOUNDED:
        raise UnboundedProblemError()
    raise IterationLimitError(f"Interior-point method stopped after {solution.iterations} iterations", residual=solution.kkt_residual)


def solve(program: ConvexProgram, config: Optional[Dict] = None) -> KktSolution:
    """
    Solve a convex program.

    Arguments:
        program (ConvexProgram): The program.
        config (Optional[Dict]): Optional keys 'kernel_tol' (default 1e-8), 'kernel_max_iter' (default 100) and
            'raise_errors' (default True; when False a non-optimal status is returned instead of raised).

    Returns:
        KktSolution: The solution; status 'optimal' implies kkt_residual <= kernel_tol.

    Raises:
        ConfigurationError: If the program is malformed or not convex.
        InfeasibleProblemError: If a certificate of infeasibility is found.
        UnboundedProblemError: If the iterates diverge.
        IterationLimitError: If the iteration limit is reached.
    """
    if config is None:
        config = {}
    check_program(program)

    try:
        solution: KktSolution = _ipm(program, config, quadratic=True)
    except InfeasibleProblemError:
        if config.get('raise_errors', True):
            raise
        return KktSolution(x=np.full(program.n, np.nan), duals={}, status=STATUS_INFEASIBLE, kkt_residual=float('nan'))

    return _finish(solution, config)


def solve_lp(program: ConvexProgram, config: Optional[Dict] = None) -> KktSolution:
    """
    Solve a linear program.

    Same contract as solve, for programs without quadratic objective terms or quadratic rows.

    Arguments:
        program (ConvexProgram): The program.
        config (Optional[Dict]): As for solve.

    Returns:
        KktSolution: The solution.

    Raises:
        ConfigurationError: If the program has quadratic terms.
    """
    if config is None:
        config = {}
    if not program.is_linear:
        raise ConfigurationError("solve_lp needs a program without quadratic terms; use solve")
    check_program(program)

    try:
        solution: KktSolution = _ipm(program, config, quadratic=False)
    except InfeasibleProblemError:
        if config.get('raise_errors', True):
            raise
        return KktSolution(x=np.full(program.n, np.nan), duals={}, status=STATUS_INFEASIBLE, kkt_residual=float('nan'))

    return _finish(solution, config)
