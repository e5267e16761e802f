"""
This module provides the Newton-Raphson AC power flow and the voltage-sensitivity matrices derived from its Jacobian.

The power flow is the exact-physics oracle of the package: losses and voltages reported to users always
come from here, never from the linearised models used for optimisation.

Conventions:
- Injections are net generation minus load per bus, in kW / kvar, in the network's bus storage order.
- Internally everything runs in per-unit on the network bases with a polar voltage state.
- Jacobian rows and columns are [angles of non-slack buses, magnitudes of non-slack buses].

Classes:
- Injections: Net active and reactive injection per bus.
- PfSolution: A converged power-flow state.
- SensitivityMatrix: dV/dP and dV/dQ of every non-slack bus with respect to the MG couplings.

Functions:
- admittance: The sparse bus admittance matrix.
- bus_injections: Assemble the injections of one hour from loads, PV and tie-line set-points.
- solve_pf: Newton-Raphson power flow from a flat start.
- jacobian: The power-flow Jacobian at a state.
- sensitivity: Analytic voltage sensitivities from one sparse LU factorisation.
- fd_sensitivity_oracle: Central finite-difference sensitivities, used to check the analytic ones.

Dependencies:
- numpy / scipy.sparse: Admittance and Jacobian assembly, sparse LU.

Example usage:
    from .powerflow import bus_injections, solve_pf

    sol = solve_pf(net, bus_injections(net, hour=19))
    print(sol.losses, sol.v.min())
"""

from dataclasses import dataclass
from typing import Dict, Mapping, Optional, Sequence, Tuple

import logging

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .constants import DEFAULT_FD_STEP, DEFAULT_PF_MAX_ITER, DEFAULT_PF_TOL
from .exceptions import ConfigurationError, PowerFlowDivergenceError, SingularJacobianError
from .network import Network
from .utils import base_kw

logger: logging.Logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class Injections:
    """
    Net injection per bus (generation minus load), in bus storage order.

    Attributes:
        p (np.ndarray): Active injection [kW].
        q (np.ndarray): Reactive injection [kvar].
    """

    p: np.ndarray
    q: np.ndarray


@dataclass(frozen=True)
class PfSolution:
    """
    A converged power-flow state.

    Attributes:
        bus_ids (Tuple[int, ...]): Bus ids in storage order.
        v (np.ndarray): Voltage magnitude per bus [p.u.].
        delta (np.ndarray): Voltage angle per bus [rad].
        branch_flows (np.ndarray): (n_branches, 2) array of P_ij, Q_ij at the from end [kW, kvar].
        losses (float): Total active loss [kW].
        mismatch (float): Maximum power-balance residual [p.u.].
        iterations (int): Newton iterations performed.
        slack_injection (complex): Power delivered by the slack bus [kW + j kvar].
    """

    bus_ids: Tuple[int, ...]
    v: np.ndarray
    delta: np.ndarray
    branch_flows: np.ndarray
    losses: float
    mismatch: float
    iterations: int
    slack_injection: complex

    @property
    def mean_voltage_deviation(self) -> float:
        """Mean of |V - 1| over all buses [p.u.]."""
        return float(np.mean(np.abs(self.v - 1.0)))

    @property
    def min_voltage(self) -> float:
        """Lowest bus voltage [p.u.]."""
        return float(np.min(self.v))

    def voltage(self, bus_id: int) -> float:
        """Return the voltage magnitude of one bus."""
        return float(self.v[self.bus_ids.index(bus_id)])


@dataclass(frozen=True)
class SensitivityMatrix:
    """
    Voltage sensitivities at a converged state.

    The slack bus has no row; its sensitivity is zero by definition.

    Attributes:
        buses (Tuple[int, ...]): Row bus ids (every non-slack bus, storage order).
        mg_buses (Tuple[int, ...]): Column bus ids (MG couplings).
        dv_dp (np.ndarray): dV_i / dP_w [p.u. voltage per p.u. active injection].
        dv_dq (np.ndarray): dV_i / dQ_w [p.u. voltage per p.u. reactive injection].
    """

    buses: Tuple[int, ...]
    mg_buses: Tuple[int, ...]
    dv_dp: np.ndarray
    dv_dq: np.ndarray

    def row(self, bus_id: int) -> np.ndarray:
        """Return the dv_dp row of a bus, zeros for a bus without a row."""
        if bus_id not in self.buses:
            return np.zeros(len(self.mg_buses))
        return self.dv_dp[self.buses.index(bus_id)]


def admittance(net: Network) -> sp.csr_matrix:
    """
    Build the bus admittance matrix in storage order.

    Arguments:
        net (Network): The network.

    Returns:
        sp.csr_matrix: The complex admittance matrix [p.u.].
    """
    n: int = len(net.buses)
    f: np.ndarray = np.array([net.index[b.from_bus] for b in net.branches], dtype=int)
    t: np.ndarray = np.array([net.index[b.to_bus] for b in net.branches], dtype=int)
    y: np.ndarray = 1.0 / np.array([complex(b.r, b.x) for b in net.branches])

    rows: np.ndarray = np.concatenate([f, t, f, t])
    cols: np.ndarray = np.concatenate([f, t, t, f])
    data: np.ndarray = np.concatenate([y, y, -y, -y])

    return sp.coo_matrix((data, (rows, cols)), shape=(n, n)).tocsr()


def bus_injections(
    net: Network,
    hour: int,
    p_pcc: Optional[Mapping[int, float]] = None,
    q_pcc: Optional[Mapping[int, float]] = None,
    q_pv: Optional[Mapping[int, float]] = None
) -> Injections:
    """
    Assemble the injections of one hour.

    Arguments:
        net (Network): The network.
        hour (int): The hour (0-based).
        p_pcc (Optional[Mapping[int, float]]): Tie-line active power per MG bus [kW], positive when the MG imports.
        q_pcc (Optional[Mapping[int, float]]): Tie-line reactive power per MG bus [kvar], positive when the MG imports.
        q_pv (Optional[Mapping[int, float]]): PV reactive set-point per PV bus [kvar]; unity power factor when absent.

    Returns:
        Injections: Loads as negative injections, PV at MPPT, tie-line imports as negative injections.
    """
    load_p, load_q = net.load_kw(hour)
    p: np.ndarray = net.pv_kw(hour) - load_p
    q: np.ndarray = -load_q

    for bus_id, value in (p_pcc or {}).items():
        p[net.index[bus_id]] -= value
    for bus_id, value in (q_pcc or {}).items():
        q[net.index[bus_id]] -= value
    for bus_id, value in (q_pv or {}).items():
        q[net.index[bus_id]] += value

    return Injections(p=p, q=q)


def _non_slack(net: Network) -> np.ndarray:
    """Positions of the non-slack buses in storage order."""
    slack: int = net.index[net.slack_bus]
    return np.array([i for i in range(len(net.buses)) if i != slack], dtype=int)


def _dS_dV(ybus: sp.csr_matrix, V: np.ndarray) -> Tuple[sp.csr_matrix, sp.csr_matrix]:
    """Partial derivatives of complex bus injections w.r.t. voltage angle and magnitude."""
    ibus: np.ndarray = ybus @ V
    diag_v: sp.csr_matrix = sp.diags(V)
    diag_i: sp.csr_matrix = sp.diags(ibus)
    diag_vnorm: sp.csr_matrix = sp.diags(V / np.abs(V))

    dS_dVm: sp.csr_matrix = diag_v @ (ybus @ diag_vnorm).conj() + diag_i.conj() @ diag_vnorm
    dS_dVa: sp.csr_matrix = 1j * diag_v @ (diag_i - ybus @ diag_v).conj()
    return dS_dVa.tocsr(), dS_dVm.tocsr()


def _assemble_jacobian(ybus: sp.csr_matrix, V: np.ndarray, pq: np.ndarray) -> sp.csc_matrix:
    """Build [[dP/dd, dP/dV], [dQ/dd, dQ/dV]] restricted to the non-slack buses."""
    dS_dVa, dS_dVm = _dS_dV(ybus, V)
    a: sp.csr_matrix = dS_dVa[pq][:, pq]
    m: sp.csr_matrix = dS_dVm[pq][:, pq]
    return sp.bmat([[a.real, m.real], [a.imag, m.imag]], format='csc')


def _factorise(J: sp.csc_matrix, iteration: Optional[int]) -> spla.SuperLU:
    """Sparse LU of the Jacobian, reporting singularity instead of regularising."""
    try:
        lu: spla.SuperLU = spla.splu(J)
    except RuntimeError as e:
        raise SingularJacobianError(iteration) from e
    diag: np.ndarray = np.abs(lu.U.diagonal())
    if not np.all(np.isfinite(diag)) or diag.min() <= 1e-14 * max(diag.max(), 1.0):
        raise SingularJacobianError(iteration)
    return lu


def jacobian(net: Network, state: PfSolution) -> sp.csc_matrix:
    """
    Return the power-flow Jacobian at a state.

    Arguments:
        net (Network): The network.
        state (PfSolution): The voltage state (normally a converged solution).

    Returns:
        sp.csc_matrix: The 2n x 2n Jacobian over the n non-slack buses, angles first.
    """
    V: np.ndarray = state.v * np.exp(1j * state.delta)
    return _assemble_jacobian(admittance(net), V, _non_slack(net))


def _solution(net: Network, ybus: sp.csr_matrix, V: np.ndarray, mismatch: float, iterations: int) -> PfSolution:
    """Package a converged voltage vector with flows and losses."""
    kw: float = base_kw(net.base_mva)
    f: np.ndarray = np.array([net.index[b.from_bus] for b in net.branches], dtype=int)
    t: np.ndarray = np.array([net.index[b.to_bus] for b in net.branches], dtype=int)
    y: np.ndarray = 1.0 / np.array([complex(b.r, b.x) for b in net.branches])

    current: np.ndarray = (V[f] - V[t]) * y
    s_from: np.ndarray = V[f] * np.conj(current)
    s_to: np.ndarray = V[t] * np.conj(-current)

    s_bus: np.ndarray = V * np.conj(ybus @ V)
    slack: int = net.index[net.slack_bus]

    return PfSolution(
        bus_ids=net.bus_ids,
        v=np.abs(V),
        delta=np.angle(V),
        branch_flows=np.column_stack([s_from.real, s_from.imag]) * kw,
        losses=float(np.sum((s_from + s_to).real) * kw),
        mismatch=mismatch,
        iterations=iterations,
        slack_injection=complex(s_bus[slack] * kw),
    )


def solve_pf(net: Network, injections: Injections, config: Optional[Dict] = None) -> PfSolution:
    """
    Solve the AC power flow with Newton-Raphson from a flat start.

    Arguments:
        net (Network): A valid network; the slack voltage is held at v_ref.
        injections (Injections): Net injection per bus [kW, kvar].
        config (Optional[Dict]): Optional keys 'pf_tol' (p.u., default 1e-8) and 'pf_max_iter' (default 30).

    Returns:
        PfSolution: The converged state.

    Raises:
        PowerFlowDivergenceError: If the mismatch is still above tolerance after the iteration limit.
        SingularJacobianError: If a Newton step cannot be factorised.
    """
    if config is None:
        config = {}
    tol: float = config.get('pf_tol', DEFAULT_PF_TOL)
    max_iter: int = config.get('pf_max_iter', DEFAULT_PF_MAX_ITER)

    kw: float = base_kw(net.base_mva)
    ybus: sp.csr_matrix = admittance(net)
    pq: np.ndarray = _non_slack(net)
    n: int = len(pq)
    s_spec: np.ndarray = (np.asarray(injections.p, dtype=float) + 1j * np.asarray(injections.q, dtype=float)) / kw

    va: np.ndarray = np.zeros(len(net.buses))
    vm: np.ndarray = np.full(len(net.buses), net.v_ref)
    V: np.ndarray = vm * np.exp(1j * va)

    def mismatch_vector(V: np.ndarray) -> np.ndarray:
        s_calc: np.ndarray = V * np.conj(ybus @ V)
        ds: np.ndarray = (s_calc - s_spec)[pq]
        return np.concatenate([ds.real, ds.imag])

    F: np.ndarray = mismatch_vector(V)
    norm: float = float(np.max(np.abs(F))) if n else 0.0
    iteration: int = 0

    while norm > tol and iteration < max_iter:
        iteration += 1
        J: sp.csc_matrix = _assemble_jacobian(ybus, V, pq)
        dx: np.ndarray = -_factorise(J, iteration).solve(F)

        va[pq] += dx[:n]
        vm[pq] += dx[n:]
        V = vm * np.exp(1j * va)

        F = mismatch_vector(V)
        norm = float(np.max(np.abs(F)))
        logger.debug("Newton iteration %d: mismatch %.3e p.u.", iteration, norm)

    if norm > tol or not np.isfinite(norm):
        raise PowerFlowDivergenceError(norm, iteration)

    return _solution(net, ybus, V, norm, iteration)


def sensitivity(net: Network, state: PfSolution, mg_buses: Optional[Sequence[int]] = None) -> SensitivityMatrix:
    """
    Compute dV/dP and dV/dQ of every non-slack bus with respect to the MG injections.

    The Jacobian is factorised once; only the MG columns of its inverse are solved for.

    Arguments:
        net (Network): The network.
        state (PfSolution): A converged state.
        mg_buses (Optional[Sequence[int]]): Column buses; defaults to the network's MG couplings.

    Returns:
        SensitivityMatrix: The sensitivities in p.u. voltage per p.u. power.

    Raises:
        ConfigurationError: If no MG bus is given or one of them is the slack.
        SingularJacobianError: If the Jacobian is singular at the state.
    """
    columns: Tuple[int, ...] = tuple(mg_buses if mg_buses is not None else net.mg_buses)
    if not columns:
        raise ConfigurationError("sensitivity needs at least one MG bus")
    if net.slack_bus in columns:
        raise ConfigurationError("the slack bus cannot be an MG coupling")

    pq: np.ndarray = _non_slack(net)
    n: int = len(pq)
    position: Dict[int, int] = {int(p): k for k, p in enumerate(pq)}
    lu: spla.SuperLU = _factorise(jacobian(net, state), None)

    rhs: np.ndarray = np.zeros((2 * n, 2 * len(columns)))
    for w, bus_id in enumerate(columns):
        k: int = position[net.index[bus_id]]
        rhs[k, w] = 1.0
        rhs[n + k, len(columns) + w] = 1.0
    cols: np.ndarray = lu.solve(rhs)

    return SensitivityMatrix(
        buses=tuple(net.bus_ids[i] for i in pq),
        mg_buses=columns,
        dv_dp=cols[n:, :len(columns)],
        dv_dq=cols[n:, len(columns):],
    )


def fd_sensitivity_oracle(
    net: Network,
    injections: Injections,
    mg_buses: Optional[Sequence[int]] = None,
    h: float = DEFAULT_FD_STEP,
    config: Optional[Dict] = None
) -> SensitivityMatrix:
    """
    Estimate voltage sensitivities with central finite differences of solve_pf.

    Arguments:
        net (Network): The network.
        injections (Injections): The operating point.
        mg_buses (Optional[Sequence[int]]): Column buses; defaults to the network's MG couplings.
        h (float): Perturbation [p.u. power], must be > 0.
        config (Optional[Dict]): Passed to solve_pf.

    Returns:
        SensitivityMatrix: The estimate.

    Raises:
        ConfigurationError: If h is not positive.
    """
    if not h > 0:
        raise ConfigurationError(f"finite-difference step must be > 0, got {h}")

    columns: Tuple[int, ...] = tuple(mg_buses if mg_buses is not None else net.mg_buses)
    pq: np.ndarray = _non_slack(net)
    step_kw: float = h * base_kw(net.base_mva)
    dv_dp: np.ndarray = np.zeros((len(pq), len(columns)))
    dv_dq: np.ndarray = np.zeros((len(pq), len(columns)))

    for w, bus_id in enumerate(columns):
        k: int = net.index[bus_id]
        for target, attr in ((dv_dp, 'p'), (dv_dq, 'q')):
            plus: np.ndarray = np.array(getattr(injections, attr), dtype=float)
            minus: np.ndarray = plus.copy()
            plus[k] += step_kw
            minus[k] -= step_kw
            if attr == 'p':
                v_plus: np.ndarray = solve_pf(net, Injections(plus, injections.q), config).v
                v_minus: np.ndarray = solve_pf(net, Injections(minus, injections.q), config).v
            else:
                v_plus = solve_pf(net, Injections(injections.p, plus), config).v
                v_minus = solve_pf(net, Injections(injections.p, minus), config).v
            target[:, w] = (v_plus[pq] - v_minus[pq]) / (2.0 * h)

    return SensitivityMatrix(buses=tuple(net.bus_ids[i] for i in pq), mg_buses=columns, dv_dp=dv_dp, dv_dq=dv_dq)
