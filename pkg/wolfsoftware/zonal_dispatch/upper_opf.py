"""
This module builds the upper-level optimisation problems: one fuzzy multi-objective LinDistFlow problem per zone.

Every zone minimises two objectives over its buses and branches (overlapping branches included):

- f1, the loss proxy: sum of r (P^2 + Q^2) over the zone's branches;
- f2, the voltage deviation: sum of |U_i - U_spec| over the zone's buses, through nonnegative slack pairs.

Each objective is mapped to a membership in [0, 1] between its payoff-table bounds, and the zone
maximises its satisfaction phi <= min(mu1, mu2). The constraints are the LinDistFlow power balance and
voltage drop (U = V^2), the voltage band, the PV inverter reactive limits and the tie-line limits at the
MG coupling bus. Powers are in per-unit on the network base inside every program.

Classes:
- ObjectiveBounds: f_min / f_max of both objectives of one zone and hour.
- LinDistFlowState: A LinDistFlow operating point (flows and squared voltages).
- ZoneSubproblem: A zone's convex program, its boundary variables and the maps needed to read a solution.
- CentralizedProblem: All zones merged into one program with overlap copies identified.
- Setpoints: Tie-line and PV reactive set-points extracted from zone solutions.

Functions:
- membership: The piecewise-linear membership of one objective value.
- lindistflow_state / lindistflow_baseline: Closed-form LinDistFlow state for given set-points.
- pcc_limits: Tie-line bounds per MG for one hour.
- compute_objective_bounds: Payoff-table bounds of a zone.
- build_zone_subproblem: The zone's fuzzy multi-objective program.
- build_centralized: The whole-network reference program.
- evaluate_objectives: f1 and f2 of a zone solution.
- voltage_relaxation: The smallest voltage-band widening that makes an hour feasible.
- voltage_violations: Buses of a zone solution outside the nominal voltage band.
- extract_setpoints: Tie-line powers and PV reactive set-points from zone solutions.

Example usage:
    from .upper_opf import build_zone_subproblem, compute_objective_bounds, pcc_limits

    limits = pcc_limits(net, scenario, hour)
    bounds = compute_objective_bounds(zone, net, zones, hour, limits)
    sub = build_zone_subproblem(zone, net, zones, hour, bounds, limits)
"""

from dataclasses import dataclass, field
from typing import TYPE_CHECKING, Dict, List, Mapping, Optional, Tuple

import logging
import math

import numpy as np

from .constants import (
    BOUNDS_GUARD, DEFAULT_FLOW_LIMIT_PU, DEFAULT_PARETO_WEIGHT, DEFAULT_PCC_BOUNDS, DEFAULT_PCC_CAP_KW, DEFAULT_PV_POWER_FACTOR,
    DEFAULT_Q_PCC_RATIO, DEFAULT_V_SPEC, DEFAULT_VOLTAGE_BOUNDS, DEFAULT_VOLTAGE_PENALTY, VOLTAGE_BOUND_MODES, VOLTAGE_RELAXATION_MARGIN,
    VOLTAGE_VIOLATION_TOL
)
from .exceptions import ConfigurationError, DegenerateBoundsError, InfeasibleProblemError
from .kernel import ConvexProgram, KktSolution, QuadraticConstraint, solve
from .network import Network, Tree, tree
from .utils import base_kw
from .zoning import OverlapBranch, ZonePartition, single_zone

if TYPE_CHECKING:
    from .scenario import ScenarioConfig

logger: logging.Logger = logging.getLogger(__name__)

U_BOX: Tuple[float, float] = (0.5, 1.5)
DEVIATION_CAP: float = 0.5
PARETO_FLOOR: float = 1e-6


@dataclass(frozen=True)
class ObjectiveBounds:
    """
    Payoff-table bounds of a zone's objectives.

    Attributes:
        zone (int): The zone.
        hour (int): The hour.
        f_min (Tuple[float, float]): Minimum of (f1, f2).
        f_max (Tuple[float, float]): Maximum of (f1, f2), strictly above f_min.
    """

    zone: int
    hour: int
    f_min: Tuple[float, float]
    f_max: Tuple[float, float]

    def span(self, s: int) -> float:
        """Return f_max - f_min of objective s (1 or 2)."""
        return self.f_max[s - 1] - self.f_min[s - 1]


@dataclass(frozen=True)
class LinDistFlowState:
    """
    A LinDistFlow operating point.

    Attributes:
        orientation (Tuple[Tuple[int, int], ...]): (upstream, downstream) of every branch.
        p (np.ndarray): Active flow per branch, upstream to downstream [p.u.].
        q (np.ndarray): Reactive flow per branch [p.u.].
        u (Dict[int, float]): Squared voltage per bus [p.u.^2].
    """

    orientation: Tuple[Tuple[int, int], ...]
    p: np.ndarray
    q: np.ndarray
    u: Dict[int, float]

    def boundary(self, overlap: OverlapBranch) -> np.ndarray:
        """Return the boundary vector (P, Q, U_i, U_j) of an overlapping branch."""
        return np.array([self.p[overlap.index], self.q[overlap.index], self.u[overlap.upstream], self.u[overlap.downstream]])


@dataclass(frozen=True)
class Setpoints:
    """
    Upper-level decisions of one hour in physical units.

    Attributes:
        p_pcc (Dict[int, float]): Tie-line active power per MG bus [kW], positive when the MG imports.
        q_pcc (Dict[int, float]): Tie-line reactive power per MG bus [kvar].
        q_pv (Dict[int, float]): PV reactive output per PV bus [kvar].
    """

    p_pcc: Dict[int, float]
    q_pcc: Dict[int, float]
    q_pv: Dict[int, float]


@dataclass
class ZoneSubproblem:  # pylint: disable=too-many-instance-attributes
    """
    One zone's convex program.

    Only `program` and `boundary` are needed by the ADMM coordinator; the remaining maps let the
    rest of the package read a solution back.

    Attributes:
        zone (int): The zone id.
        program (ConvexProgram): The zone problem (minimisation form).
        boundary (Dict[str, np.ndarray]): Overlap label -> indices of (P, Q, U_i, U_j) in x.
        hour (int): The hour.
        bounds (Optional[ObjectiveBounds]): Membership bounds used, None for single-objective variants.
        buses (Tuple[int, ...]): The zone's own buses.
        branch_vars (Dict[int, Tuple[int, int]]): Branch index -> (P, Q) variable indices.
        resistance (Dict[int, float]): Branch index -> r [p.u.].
        u_vars (Dict[int, int]): Bus -> U variable index (own buses and ghost endpoints).
        pv_vars (Dict[int, int]): PV bus -> reactive set-point variable index.
        pcc_vars (Dict[int, Tuple[int, int]]): MG bus -> (P_pcc, Q_pcc) variable indices.
        viol_vars (Dict[int, int]): Bus -> elastic voltage-band violation variable index (elastic mode only).
        u_band (Tuple[float, float]): The nominal band (u_min, u_max) on U [p.u.^2], before any widening.
        phi (Optional[int]): Satisfaction variable index.
        u_spec (float): Voltage target squared.
        kw_base (float): Power base [kW].
    """

    zone: int
    program: ConvexProgram
    boundary: Dict[str, np.ndarray]
    hour: int = 0
    bounds: Optional[ObjectiveBounds] = None
    buses: Tuple[int, ...] = ()
    branch_vars: Dict[int, Tuple[int, int]] = field(default_factory=dict)
    resistance: Dict[int, float] = field(default_factory=dict)
    u_vars: Dict[int, int] = field(default_factory=dict)
    pv_vars: Dict[int, int] = field(default_factory=dict)
    pcc_vars: Dict[int, Tuple[int, int]] = field(default_factory=dict)
    viol_vars: Dict[int, int] = field(default_factory=dict)
    u_band: Tuple[float, float] = (0.95 ** 2, 1.05 ** 2)
    phi: Optional[int] = None
    u_spec: float = DEFAULT_V_SPEC ** 2
    kw_base: float = 10000.0

    def describe(self) -> str:
        """
        Return a plain-text LP-style listing of the program.

        Returns:
            str: Objective, constraints, quadratic rows and bounds, one per line.
        """
        p: ConvexProgram = self.program
        names: List[str] = p.names or [f"x{i}" for i in range(p.n)]

        def linear(row: np.ndarray) -> str:
            terms: List[str] = [f"{'-' if v < 0 else '+'} {abs(v):.6g} {names[i]}" for i, v in enumerate(row) if v != 0.0]
            return ' '.join(terms).lstrip('+ ') or '0'

        lines: List[str] = [f"\\ zone {self.zone}, hour {self.hour}", 'minimize', f"  obj: {linear(p.c)} + {p.constant:.6g}"]
        quad: List[str] = [f"{p.Q[i, i]:.6g} {names[i]}^2" for i in range(p.n) if p.Q[i, i] != 0.0]
        if quad:
            lines.append(f"     + 1/2 [ {' + '.join(quad)} ]")
        lines.append('subject to')
        for k, (row, rhs) in enumerate(zip(p.A, p.b)):
            lines.append(f"  e{k}: {linear(row)} = {rhs:.6g}")
        for k, (row, rhs) in enumerate(zip(p.G, p.h)):
            lines.append(f"  g{k}: {linear(row)} <= {rhs:.6g}")
        for k, qc in enumerate(p.qineq):
            quad = [f"{qc.P[i, i]:.6g} {names[i]}^2" for i in range(p.n) if qc.P[i, i] != 0.0]
            lines.append(f"  {qc.name or f'q{k}'}: 1/2 [ {' + '.join(quad)} ] + {linear(qc.q)} <= {-qc.r:.6g}")
        lines.append('bounds')
        for i in range(p.n):
            lines.append(f"  {p.lb[i]:.6g} <= {names[i]} <= {p.ub[i]:.6g}")
        lines.append('end')
        return '\n'.join(lines)


@dataclass
class CentralizedProblem:
    """
    The whole-network program: every zone's problem with overlap copies identified.

    Attributes:
        program (ConvexProgram): The merged program.
        subproblems (Dict[int, ZoneSubproblem]): The zone problems it was merged from.
        columns (Dict[int, np.ndarray]): Zone -> global index of each local variable.
    """

    program: ConvexProgram
    subproblems: Dict[int, ZoneSubproblem]
    columns: Dict[int, np.ndarray]

    def zone_solution(self, x: np.ndarray, zone: int) -> np.ndarray:
        """Return the local solution vector of one zone."""
        return x[self.columns[zone]]


def membership(f: float, f_min: float, f_max: float) -> float:
    """
    Return the membership of an objective value.

    1 at or below f_min, 0 at or above f_max, linear in between.

    Arguments:
        f (float): The objective value.
        f_min (float): The best value.
        f_max (float): The worst acceptable value (> f_min).

    Returns:
        float: The membership in [0, 1].
    """
    if f <= f_min:
        return 1.0
    if f >= f_max:
        return 0.0
    return (f_max - f) / (f_max - f_min)


def lindistflow_state(
    net: Network,
    hour: int,
    p_pcc: Optional[Mapping[int, float]] = None,
    q_pcc: Optional[Mapping[int, float]] = None,
    q_pv: Optional[Mapping[int, float]] = None
) -> LinDistFlowState:
    """
    Evaluate the LinDistFlow equations for given set-points.

    Flows are the downstream sums of net demand; squared voltages follow the linear drop from the slack.

    Arguments:
        net (Network): The network.
        hour (int): The hour.
        p_pcc (Optional[Mapping[int, float]]): Tie-line imports per MG bus [kW].
        q_pcc (Optional[Mapping[int, float]]): Tie-line reactive imports per MG bus [kvar].
        q_pv (Optional[Mapping[int, float]]): PV reactive outputs [kvar].

    Returns:
        LinDistFlowState: The operating point.
    """
    kw: float = base_kw(net.base_mva)
    t: Tree = tree(net)
    load_p, load_q = net.load_kw(hour)
    demand_p: np.ndarray = load_p - net.pv_kw(hour)
    demand_q: np.ndarray = load_q.copy()
    for bus_id, value in (p_pcc or {}).items():
        demand_p[net.index[bus_id]] += value
    for bus_id, value in (q_pcc or {}).items():
        demand_q[net.index[bus_id]] += value
    for bus_id, value in (q_pv or {}).items():
        demand_q[net.index[bus_id]] -= value

    p: np.ndarray = np.zeros(len(net.branches))
    q: np.ndarray = np.zeros(len(net.branches))
    for bus_id in reversed(t.order):
        if bus_id == t.root:
            continue
        e: int = t.parent_branch[bus_id]
        p[e] += demand_p[net.index[bus_id]] / kw
        q[e] += demand_q[net.index[bus_id]] / kw
        parent: int = t.parent[bus_id]
        if parent != t.root:
            p[t.parent_branch[parent]] += p[e]
            q[t.parent_branch[parent]] += q[e]

    u: Dict[int, float] = {t.root: net.v_ref ** 2}
    for bus_id in t.order[1:]:
        e = t.parent_branch[bus_id]
        branch = net.branches[e]
        u[bus_id] = u[t.parent[bus_id]] - 2.0 * (branch.r * p[e] + branch.x * q[e])

    orientation: Tuple[Tuple[int, int], ...] = tuple(t.oriented(net, i) for i in range(len(net.branches)))
    return LinDistFlowState(orientation=orientation, p=p, q=q, u=u)


def lindistflow_baseline(net: Network, hour: int) -> LinDistFlowState:
    """
    Return the zero-control LinDistFlow state: PV at MPPT with unity power factor, no MG exchange.

    Arguments:
        net (Network): The network.
        hour (int): The hour.

    Returns:
        LinDistFlowState: The baseline operating point.
    """
    return lindistflow_state(net, hour)


def pcc_limits(net: Network, scenario: Optional['ScenarioConfig'], hour: int, config: Optional[Dict] = None) -> Dict[int, Tuple[float, float]]:
    """
    Compute tie-line active-power bounds per MG bus [kW, import positive].

    'ramp_safe' (default) keeps the MT + DE output within a band every hourly sequence can follow with
    the battery idle: from the sum of device minimums up by the sum over devices of min(range, ramp up,
    ramp down). 'capability' uses the full device envelope. Both are clipped to +-pcc_cap_kw.

    Arguments:
        net (Network): The network.
        scenario (Optional[ScenarioConfig]): MG configurations; without them every MG gets +-pcc_cap_kw.
        hour (int): The hour.
        config (Optional[Dict]): Optional keys 'pcc_bounds' and 'pcc_cap_kw'.

    Returns:
        Dict[int, Tuple[float, float]]: (lower, upper) per MG bus.

    Raises:
        ConfigurationError: If the mode is unknown or the clipped band is empty.
    """
    if config is None:
        config = {}
    mode: str = config.get('pcc_bounds', DEFAULT_PCC_BOUNDS)
    cap: float = config.get('pcc_cap_kw', DEFAULT_PCC_CAP_KW)
    if mode not in ('ramp_safe', 'capability'):
        raise ConfigurationError(f"unknown pcc_bounds mode '{mode}'")

    limits: Dict[int, Tuple[float, float]] = {}
    for bus_id in net.mg_buses:
        name: Optional[str] = net.bus(bus_id).mg
        if scenario is None or name not in scenario.mg_configs:
            limits[bus_id] = (-cap, cap)
            continue

        mg = scenario.mg_configs[name]
        demand: float = mg.load[hour] - mg.pv[hour] - mg.wind[hour]
        if mode == 'ramp_safe':
            floor: float = mg.mt.p_min + mg.de.p_min
            span: float = sum(min(d.p_max - d.p_min, d.ramp_up, d.ramp_down) for d in (mg.mt, mg.de))
            low, high = demand - (floor + span), demand - floor
        else:
            low = -(mg.mt.p_max + mg.de.p_max + mg.bess.p_max + mg.pv[hour] + mg.wind[hour] - mg.load[hour])
            high = mg.load[hour] + mg.bess.p_max

        low, high = max(low, -cap), min(high, cap)
        if low > high:
            raise ConfigurationError(f"MG {name} has an empty tie-line band at hour {hour} after clipping to +-{cap} kW")
        limits[bus_id] = (low, high)

    return limits


class _Builder:
    """Accumulates variables and rows of a program."""

    def __init__(self) -> None:
        """Start an empty model."""
        self.names: List[str] = []
        self.lb: List[float] = []
        self.ub: List[float] = []
        self.eq: List[Tuple[Dict[int, float], float]] = []
        self.ineq: List[Tuple[Dict[int, float], float]] = []
        self.quad: List[Tuple[Dict[int, float], Dict[int, float], float, str]] = []
        self.q_diag: Dict[int, float] = {}
        self.c: Dict[int, float] = {}
        self.constant: float = 0.0

    def var(self, name: str, lb: float = -np.inf, ub: float = np.inf) -> int:
        """Add a variable and return its index."""
        self.names.append(name)
        self.lb.append(lb)
        self.ub.append(ub)
        return len(self.names) - 1

    def program(self) -> ConvexProgram:
        """Assemble the dense program."""
        n: int = len(self.names)

        def rows(block: List[Tuple[Dict[int, float], float]]) -> Tuple[np.ndarray, np.ndarray]:
            M: np.ndarray = np.zeros((len(block), n))
            rhs: np.ndarray = np.zeros(len(block))
            for k, (coeffs, value) in enumerate(block):
                for i, v in coeffs.items():
                    M[k, i] += v
                rhs[k] = value
            return M, rhs

        A, b = rows(self.eq)
        G, h = rows(self.ineq)
        Q: np.ndarray = np.zeros((n, n))
        for i, v in self.q_diag.items():
            Q[i, i] += v
        c: np.ndarray = np.zeros(n)
        for i, v in self.c.items():
            c[i] += v

        qineq: List[QuadraticConstraint] = []
        for diag, lin, r, name in self.quad:
            P: np.ndarray = np.zeros((n, n))
            q: np.ndarray = np.zeros(n)
            for i, v in diag.items():
                P[i, i] += v
            for i, v in lin.items():
                q[i] += v
            qineq.append(QuadraticConstraint(P=P, q=q, r=r, name=name))

        return ConvexProgram(
            n=n, Q=Q, c=c, A=A, b=b, G=G, h=h, qineq=qineq,
            lb=np.array(self.lb), ub=np.array(self.ub), constant=self.constant, names=list(self.names),
        )


@dataclass
class _ZoneModel:  # pylint: disable=too-many-instance-attributes
    """The shared constraint set of a zone before an objective is attached."""

    builder: _Builder
    sub: ZoneSubproblem
    deviation: List[Tuple[int, int]]
    violation: List[int]
    penalty: float


def _zone_model(  # noqa: C901  pylint: disable=too-many-arguments
    zone: int,
    net: Network,
    zones: ZonePartition,
    hour: int,
    limits: Mapping[int, Tuple[float, float]],
    config: Dict,
    relaxation: Optional[Mapping[int, float]] = None
) -> _ZoneModel:
    """Variables and constraints of a zone, without any objective."""
    kw: float = base_kw(net.base_mva)
    flow_limit: float = config.get('flow_limit_pu', DEFAULT_FLOW_LIMIT_PU)
    mode: str = config.get('voltage_bounds', DEFAULT_VOLTAGE_BOUNDS)
    if mode not in VOLTAGE_BOUND_MODES:
        raise ConfigurationError(f"unknown voltage_bounds mode '{mode}'")
    u_spec: float = config.get('v_spec', DEFAULT_V_SPEC) ** 2
    u_min: float = (net.v_ref - net.eps_v) ** 2
    u_max: float = (net.v_ref + net.eps_v) ** 2
    tan_phi: float = math.tan(math.acos(config.get('pv_power_factor', DEFAULT_PV_POWER_FACTOR)))
    q_ratio: float = config.get('q_pcc_ratio', DEFAULT_Q_PCC_RATIO)
    cap: float = config.get('pcc_cap_kw', DEFAULT_PCC_CAP_KW)

    t: Tree = tree(net)
    own: List[int] = zones.zone_buses(zone)
    own_set: set = set(own)
    branch_ids: List[int] = sorted(zones.zone_branches(net, zone) + [o.index for o in zones.zone_overlaps(zone)])
    load_p, load_q = net.load_kw(hour)
    pv_p: np.ndarray = net.pv_kw(hour)
    widened: Mapping[int, float] = relaxation or {}
    margin: float = VOLTAGE_RELAXATION_MARGIN if widened else 0.0

    def band(bus_id: int) -> Tuple[float, float]:
        if mode == 'elastic' or bus_id not in own_set:
            return U_BOX
        width: float = widened.get(bus_id, 0.0) + margin if mode == 'relaxed' else 0.0
        return u_min - width, u_max + width

    m: _Builder = _Builder()
    sub: ZoneSubproblem = ZoneSubproblem(zone=zone, program=ConvexProgram(n=0), boundary={}, hour=hour, buses=tuple(own), u_spec=u_spec, kw_base=kw, u_band=(u_min, u_max))

    for e in branch_ids:
        i, j = t.oriented(net, e)
        sub.branch_vars[e] = (m.var(f"P[{i}-{j}]", -flow_limit, flow_limit), m.var(f"Q[{i}-{j}]", -flow_limit, flow_limit))
        sub.resistance[e] = net.branches[e].r
        for bus_id in (i, j):
            if bus_id not in sub.u_vars:
                sub.u_vars[bus_id] = m.var(f"U[{bus_id}]", *band(bus_id))
    for bus_id in own:
        if bus_id not in sub.u_vars:
            sub.u_vars[bus_id] = m.var(f"U[{bus_id}]", *band(bus_id))

    for bus_id in own:
        bus = net.bus(bus_id)
        k: int = net.index[bus_id]
        if bus.pv is not None:
            p_pv: float = pv_p[k] / kw
            s_pv: float = bus.pv.capacity_s / kw
            headroom: float = s_pv ** 2 - p_pv ** 2
            q_lim: float = p_pv * tan_phi if headroom > 1e-12 else 0.0
            idx: int = m.var(f"qpv[{bus_id}]", -q_lim, q_lim)
            sub.pv_vars[bus_id] = idx
            if q_lim > 0.0:
                m.quad.append(({idx: 2.0}, {}, p_pv ** 2 - s_pv ** 2, f"pvcap[{bus_id}]"))
        if bus.kind == 'mg_pcc':
            low, high = limits.get(bus_id, (-cap, cap))
            q_cap: float = q_ratio * max(abs(low), abs(high)) / kw
            sub.pcc_vars[bus_id] = (m.var(f"ppcc[{bus_id}]", low / kw, high / kw), m.var(f"qpcc[{bus_id}]", -q_cap, q_cap))

    for bus_id in own:
        if bus_id == t.root:
            m.eq.append(({sub.u_vars[bus_id]: 1.0}, net.v_ref ** 2))
            continue
        k = net.index[bus_id]
        parent_p, parent_q = sub.branch_vars[t.parent_branch[bus_id]]
        p_row: Dict[int, float] = {parent_p: 1.0}
        q_row: Dict[int, float] = {parent_q: 1.0}
        for child in t.children[bus_id]:
            child_p, child_q = sub.branch_vars[t.parent_branch[child]]
            p_row[child_p] = -1.0
            q_row[child_q] = -1.0
        if bus_id in sub.pv_vars:
            q_row[sub.pv_vars[bus_id]] = 1.0
        if bus_id in sub.pcc_vars:
            p_row[sub.pcc_vars[bus_id][0]] = -1.0
            q_row[sub.pcc_vars[bus_id][1]] = -1.0
        m.eq.append((p_row, (load_p[k] - pv_p[k]) / kw))
        m.eq.append((q_row, load_q[k] / kw))

    for e in branch_ids:
        i, j = t.oriented(net, e)
        branch = net.branches[e]
        p_idx, q_idx = sub.branch_vars[e]
        m.eq.append(({sub.u_vars[j]: 1.0, sub.u_vars[i]: -1.0, p_idx: 2.0 * branch.r, q_idx: 2.0 * branch.x}, 0.0))

    deviation: List[Tuple[int, int]] = []
    violation: List[int] = []
    for bus_id in own:
        plus: int = m.var(f"dev+[{bus_id}]", 0.0, DEVIATION_CAP)
        minus: int = m.var(f"dev-[{bus_id}]", 0.0, DEVIATION_CAP)
        deviation.append((plus, minus))
        m.eq.append(({sub.u_vars[bus_id]: 1.0, plus: -1.0, minus: 1.0}, u_spec))
        if mode == 'elastic':
            v: int = m.var(f"viol[{bus_id}]", 0.0, DEVIATION_CAP)
            violation.append(v)
            sub.viol_vars[bus_id] = v
            m.ineq.append(({sub.u_vars[bus_id]: 1.0, v: -1.0}, u_max))
            m.ineq.append(({sub.u_vars[bus_id]: -1.0, v: -1.0}, -u_min))

    for overlap in zones.zone_overlaps(zone):
        p_idx, q_idx = sub.branch_vars[overlap.index]
        sub.boundary[overlap.label] = np.array([p_idx, q_idx, sub.u_vars[overlap.upstream], sub.u_vars[overlap.downstream]], dtype=int)

    return _ZoneModel(builder=m, sub=sub, deviation=deviation, violation=violation, penalty=config.get('voltage_penalty', DEFAULT_VOLTAGE_PENALTY))


def _f1_diagonal(model: _ZoneModel, scale: float) -> Dict[int, float]:
    """Diagonal of scale * Hessian of f1."""
    diag: Dict[int, float] = {}
    for e, (p_idx, q_idx) in model.sub.branch_vars.items():
        r: float = model.sub.resistance[e]
        diag[p_idx] = diag.get(p_idx, 0.0) + 2.0 * r * scale
        diag[q_idx] = diag.get(q_idx, 0.0) + 2.0 * r * scale
    return diag


def _add_penalty(model: _ZoneModel) -> None:
    """Charge the elastic voltage violations."""
    for v in model.violation:
        model.builder.c[v] = model.builder.c.get(v, 0.0) + model.penalty


def _single_objective(model: _ZoneModel, s: int) -> ZoneSubproblem:
    """Attach min f_s (plus the violation penalty) and finish the subproblem."""
    m: _Builder = model.builder
    if s == 1:
        for i, v in _f1_diagonal(model, 1.0).items():
            m.q_diag[i] = m.q_diag.get(i, 0.0) + v
    else:
        for plus, minus in model.deviation:
            m.c[plus] = m.c.get(plus, 0.0) + 1.0
            m.c[minus] = m.c.get(minus, 0.0) + 1.0
    _add_penalty(model)
    model.sub.program = m.program()
    return model.sub


def _solve_zone(sub: ZoneSubproblem, config: Dict, what: str) -> KktSolution:
    """Solve a zone program, adding zone / hour context to infeasibility."""
    try:
        return solve(sub.program, config)
    except InfeasibleProblemError as e:
        raise InfeasibleProblemError(f"zone {sub.zone} at hour {sub.hour} is infeasible ({what}): {e}", residual=e.residual) from e


def evaluate_objectives(x: np.ndarray, sub: ZoneSubproblem) -> Tuple[float, float]:
    """
    Evaluate both objectives of a zone solution.

    Arguments:
        x (np.ndarray): A solution of the zone program.
        sub (ZoneSubproblem): The zone subproblem.

    Returns:
        Tuple[float, float]: (f1 loss proxy, f2 voltage deviation), both in p.u.^2.
    """
    f1: float = sum(sub.resistance[e] * (x[p] ** 2 + x[q] ** 2) for e, (p, q) in sub.branch_vars.items())
    f2: float = sum(abs(x[sub.u_vars[b]] - sub.u_spec) for b in sub.buses)
    return float(f1), float(f2)


def _state_objectives(state: LinDistFlowState, net: Network, zones: ZonePartition, zone: int, u_spec: float) -> Tuple[float, float]:
    """Both objectives of a zone evaluated on a LinDistFlow state."""
    branch_ids: List[int] = zones.zone_branches(net, zone) + [o.index for o in zones.zone_overlaps(zone)]
    f1: float = sum(net.branches[e].r * (state.p[e] ** 2 + state.q[e] ** 2) for e in branch_ids)
    f2: float = sum(abs(state.u[b] - u_spec) for b in zones.zone_buses(zone))
    return float(f1), float(f2)


def compute_objective_bounds(
    zone: int,
    net: Network,
    zones: ZonePartition,
    hour: int,
    limits: Optional[Mapping[int, Tuple[float, float]]] = None,
    config: Optional[Dict] = None,
    relaxation: Optional[Mapping[int, float]] = None
) -> ObjectiveBounds:
    """
    Compute the payoff-table bounds of a zone.

    f_min of each objective is its minimum over the zone constraint set (boundary variables free within
    their physical limits); f_max is the larger of its value at the other objective's minimiser and at
    the zero-control baseline. A span below 1e-9 is widened to exactly 1e-9.

    Arguments:
        zone (int): The zone.
        net (Network): The network.
        zones (ZonePartition): The partition.
        hour (int): The hour.
        limits (Optional[Mapping[int, Tuple[float, float]]]): Tie-line bounds from pcc_limits [kW].
        config (Optional[Dict]): Upper-level and kernel options.
        relaxation (Optional[Mapping[int, float]]): Band widening per bus from voltage_relaxation ('relaxed' mode).

    Returns:
        ObjectiveBounds: The bounds.

    Raises:
        InfeasibleProblemError: If the zone constraint set is empty, with zone / hour context.
    """
    if config is None:
        config = {}
    limits = limits or {}

    sub1: ZoneSubproblem = _single_objective(_zone_model(zone, net, zones, hour, limits, config, relaxation), 1)
    sub2: ZoneSubproblem = _single_objective(_zone_model(zone, net, zones, hour, limits, config, relaxation), 2)
    x1: np.ndarray = _solve_zone(sub1, config, 'loss minimisation').x
    x2: np.ndarray = _solve_zone(sub2, config, 'deviation minimisation').x

    f1_at_1, f2_at_1 = evaluate_objectives(x1, sub1)
    f1_at_2, f2_at_2 = evaluate_objectives(x2, sub2)
    f1_base, f2_base = _state_objectives(lindistflow_baseline(net, hour), net, zones, zone, sub1.u_spec)

    f_min: List[float] = [max(f1_at_1, 0.0), max(f2_at_2, 0.0)]
    f_max: List[float] = [max(f1_at_2, f1_base, f_min[0]), max(f2_at_1, f2_base, f_min[1])]
    for s in range(2):
        if f_max[s] - f_min[s] < BOUNDS_GUARD:
            f_max[s] = f_min[s] + BOUNDS_GUARD

    bounds: ObjectiveBounds = ObjectiveBounds(zone=zone, hour=hour, f_min=(f_min[0], f_min[1]), f_max=(f_max[0], f_max[1]))
    logger.debug("Zone %d hour %d bounds: f1 [%.4g, %.4g], f2 [%.4g, %.4g]", zone, hour, f_min[0], f_max[0], f_min[1], f_max[1])
    return bounds


def build_zone_subproblem(
    zone: int,
    net: Network,
    zones: ZonePartition,
    hour: int,
    bounds: ObjectiveBounds,
    limits: Optional[Mapping[int, Tuple[float, float]]] = None,
    config: Optional[Dict] = None,
    relaxation: Optional[Mapping[int, float]] = None
) -> ZoneSubproblem:
    """
    Build a zone's fuzzy multi-objective program.

    The program minimises -phi - pareto_weight * (mu1 + mu2) (+ the elastic voltage penalty) subject to
    phi * (f1_max - f1_min) + f1 <= f1_max, phi * (f2_max - f2_min) + f2 <= f2_max and phi <= 1, on top
    of the zone's LinDistFlow, voltage, PV and tie-line constraints.

    The pareto_weight term (config key, default 1e-3) picks the point with the larger memberships among
    the max-min optima, which keeps the two slack variables of each |U - U_spec| from both being
    nonzero. It is not the pure max-min objective: phi can end up lower than its max-min optimum by an
    amount of the order of pareto_weight. Set pareto_weight to 0 for the pure min -phi program.

    In 'relaxed' mode (the default) each own bus keeps its voltage band as hard bounds, widened by
    `relaxation` plus a small margin when any widening is given. 'elastic' charges voltage_penalty
    per p.u.^2 of violation instead; 'hard' never widens.

    Arguments:
        zone (int): The zone.
        net (Network): The network.
        zones (ZonePartition): The partition.
        hour (int): The hour.
        bounds (ObjectiveBounds): The zone's payoff-table bounds.
        limits (Optional[Mapping[int, Tuple[float, float]]]): Tie-line bounds [kW].
        config (Optional[Dict]): Upper-level options.
        relaxation (Optional[Mapping[int, float]]): Band widening per bus ('relaxed' mode).

    Returns:
        ZoneSubproblem: The subproblem.

    Raises:
        ConfigurationError: If pareto_weight is negative or the voltage mode is unknown.
        DegenerateBoundsError: If f_max <= f_min for either objective.
    """
    if config is None:
        config = {}
    for s in (1, 2):
        if not bounds.span(s) > 0.0:
            raise DegenerateBoundsError()

    model: _ZoneModel = _zone_model(zone, net, zones, hour, limits or {}, config, relaxation)
    m: _Builder = model.builder
    weight: float = config.get('pareto_weight', DEFAULT_PARETO_WEIGHT)
    if weight < 0:
        raise ConfigurationError(f"pareto_weight must not be negative, got {weight}")
    span1: float = bounds.span(1)
    span2: float = bounds.span(2)
    norm1: float = max(span1, PARETO_FLOOR)
    norm2: float = max(span2, PARETO_FLOOR)

    phi: int = m.var('phi', -np.inf, 1.0)
    model.sub.phi = phi
    m.c[phi] = -1.0

    m.quad.append((_f1_diagonal(model, 1.0), {phi: span1}, -bounds.f_max[0], 'mu1'))
    row: Dict[int, float] = {phi: span2}
    for plus, minus in model.deviation:
        row[plus] = 1.0
        row[minus] = 1.0
    m.ineq.append((row, bounds.f_max[1]))

    for i, v in _f1_diagonal(model, weight / norm1).items():
        m.q_diag[i] = m.q_diag.get(i, 0.0) + v
    for plus, minus in model.deviation:
        m.c[plus] = m.c.get(plus, 0.0) + weight / norm2
        m.c[minus] = m.c.get(minus, 0.0) + weight / norm2
    m.constant -= weight * (bounds.f_max[0] / norm1 + bounds.f_max[1] / norm2)
    _add_penalty(model)

    model.sub.program = m.program()
    model.sub.bounds = bounds
    return model.sub


def memberships(x: np.ndarray, sub: ZoneSubproblem) -> Tuple[float, float]:
    """
    Return the clamped memberships (mu1, mu2) of a zone solution.

    Arguments:
        x (np.ndarray): A solution of the zone program.
        sub (ZoneSubproblem): A subproblem built with bounds.

    Returns:
        Tuple[float, float]: Both memberships in [0, 1].
    """
    if sub.bounds is None:
        raise ConfigurationError("memberships need a subproblem built with objective bounds")
    f1, f2 = evaluate_objectives(x, sub)
    return (membership(f1, sub.bounds.f_min[0], sub.bounds.f_max[0]), membership(f2, sub.bounds.f_min[1], sub.bounds.f_max[1]))


def satisfaction(x: np.ndarray, sub: ZoneSubproblem) -> float:
    """Return the zone satisfaction phi clamped to [0, 1]."""
    if sub.phi is None:
        raise ConfigurationError("satisfaction needs a fuzzy multi-objective subproblem")
    return float(min(max(x[sub.phi], 0.0), 1.0))


def voltage_violations(x: np.ndarray, sub: ZoneSubproblem) -> Dict[int, float]:
    """
    Return how far each of the zone's buses lies outside the nominal voltage band.

    Arguments:
        x (np.ndarray): A solution of the zone program.
        sub (ZoneSubproblem): The zone subproblem.

    Returns:
        Dict[int, float]: Bus -> distance below u_min or above u_max [p.u.^2], entries above 1e-6 only.
    """
    u_min, u_max = sub.u_band
    violations: Dict[int, float] = {}
    for bus_id in sub.buses:
        u: float = float(x[sub.u_vars[bus_id]])
        excess: float = max(u_min - u, u - u_max)
        if excess > VOLTAGE_VIOLATION_TOL:
            violations[bus_id] = excess
    return violations


def voltage_relaxation(
    net: Network,
    hour: int,
    limits: Optional[Mapping[int, Tuple[float, float]]] = None,
    config: Optional[Dict] = None
) -> Dict[int, float]:
    """
    Find the smallest widening of the voltage band that makes an hour feasible.

    The whole network is solved once with one violation variable per bus and the total violation
    as objective. Only 'relaxed' mode widens; the other modes get an empty mapping.

    Arguments:
        net (Network): The network.
        hour (int): The hour.
        limits (Optional[Mapping[int, Tuple[float, float]]]): Tie-line bounds [kW].
        config (Optional[Dict]): Upper-level and kernel options.

    Returns:
        Dict[int, float]: Bus -> widening [p.u.^2] for every bus that needs one; empty when the band can be met.

    Raises:
        InfeasibleProblemError: If the network cannot be solved even with an unbounded band.
    """
    if config is None:
        config = {}
    if config.get('voltage_bounds', DEFAULT_VOLTAGE_BOUNDS) != 'relaxed':
        return {}

    whole: ZonePartition = single_zone(net)
    model: _ZoneModel = _zone_model(whole.zones[0], net, whole, hour, limits or {}, {**config, 'voltage_bounds': 'elastic'})
    for v in model.violation:
        model.builder.c[v] = 1.0
    model.sub.program = model.builder.program()
    x: np.ndarray = _solve_zone(model.sub, config, 'voltage band relaxation').x

    widening: Dict[int, float] = {bus_id: float(x[idx]) for bus_id, idx in model.sub.viol_vars.items() if x[idx] > VOLTAGE_VIOLATION_TOL}
    if widening:
        logger.debug("Hour %d: voltage band widened at %d bus(es), max %.3e p.u.^2", hour, len(widening), max(widening.values()))
    return dict(sorted(widening.items()))


def build_centralized(
    net: Network,
    hour: int,
    zones: ZonePartition,
    bounds: Mapping[int, ObjectiveBounds],
    limits: Optional[Mapping[int, Tuple[float, float]]] = None,
    config: Optional[Dict] = None,
    relaxation: Optional[Mapping[int, float]] = None
) -> CentralizedProblem:
    """
    Build the whole-network reference program.

    Every zone keeps its own objective; the four boundary variables of each overlapping branch are
    shared by the two zones instead of being coupled through consensus.

    Arguments:
        net (Network): The network.
        hour (int): The hour.
        zones (ZonePartition): The partition.
        bounds (Mapping[int, ObjectiveBounds]): Bounds per zone.
        limits (Optional[Mapping[int, Tuple[float, float]]]): Tie-line bounds [kW].
        config (Optional[Dict]): Upper-level options.
        relaxation (Optional[Mapping[int, float]]): Band widening per bus ('relaxed' mode).

    Returns:
        CentralizedProblem: The merged program and the maps back to zone variables.
    """
    subs: Dict[int, ZoneSubproblem] = {z: build_zone_subproblem(z, net, zones, hour, bounds[z], limits, config, relaxation) for z in zones.zones}

    shared: Dict[Tuple[str, int], int] = {}
    columns: Dict[int, np.ndarray] = {}
    names: List[str] = []
    for z in zones.zones:
        sub: ZoneSubproblem = subs[z]
        boundary_of: Dict[int, Tuple[str, int]] = {int(i): (label, k) for label, idx in sub.boundary.items() for k, i in enumerate(idx)}
        cols: np.ndarray = np.zeros(sub.program.n, dtype=int)
        for local in range(sub.program.n):
            key: Optional[Tuple[str, int]] = boundary_of.get(local)
            if key is not None and key in shared:
                cols[local] = shared[key]
                continue
            cols[local] = len(names)
            local_name: str = sub.program.names[local] if sub.program.names else f"x{local}"
            names.append(local_name if key is not None else f"z{z}.{local_name}")
            if key is not None:
                shared[key] = cols[local]
        columns[z] = cols

    n: int = len(names)
    Q: np.ndarray = np.zeros((n, n))
    c: np.ndarray = np.zeros(n)
    lb: np.ndarray = np.full(n, -np.inf)
    ub: np.ndarray = np.full(n, np.inf)
    A_blocks: List[np.ndarray] = []
    b_blocks: List[np.ndarray] = []
    G_blocks: List[np.ndarray] = []
    h_blocks: List[np.ndarray] = []
    qineq: List[QuadraticConstraint] = []
    constant: float = 0.0

    for z in zones.zones:
        p: ConvexProgram = subs[z].program
        cols = columns[z]
        Q[np.ix_(cols, cols)] += p.Q
        np.add.at(c, cols, p.c)
        lb[cols] = np.maximum(lb[cols], p.lb)
        ub[cols] = np.minimum(ub[cols], p.ub)
        A: np.ndarray = np.zeros((p.A.shape[0], n))
        A[:, cols] = p.A
        G: np.ndarray = np.zeros((p.G.shape[0], n))
        G[:, cols] = p.G
        A_blocks.append(A)
        b_blocks.append(p.b)
        G_blocks.append(G)
        h_blocks.append(p.h)
        for qc in p.qineq:
            P: np.ndarray = np.zeros((n, n))
            P[np.ix_(cols, cols)] = qc.P
            q: np.ndarray = np.zeros(n)
            q[cols] = qc.q
            qineq.append(QuadraticConstraint(P=P, q=q, r=qc.r, name=f"z{z}.{qc.name}"))
        constant += p.constant

    program: ConvexProgram = ConvexProgram(
        n=n, Q=Q, c=c, A=np.vstack(A_blocks), b=np.concatenate(b_blocks), G=np.vstack(G_blocks), h=np.concatenate(h_blocks),
        qineq=qineq, lb=lb, ub=ub, constant=constant, names=names,
    )
    return CentralizedProblem(program=program, subproblems=subs, columns=columns)


def extract_setpoints(solutions: Mapping[int, np.ndarray], subproblems: Mapping[int, ZoneSubproblem]) -> Setpoints:
    """
    Read tie-line powers and PV reactive set-points from zone solutions.

    Arguments:
        solutions (Mapping[int, np.ndarray]): Solution vector per zone.
        subproblems (Mapping[int, ZoneSubproblem]): The subproblems the solutions belong to.

    Returns:
        Setpoints: The set-points in kW / kvar.
    """
    p_pcc: Dict[int, float] = {}
    q_pcc: Dict[int, float] = {}
    q_pv: Dict[int, float] = {}
    for zone, sub in subproblems.items():
        x: np.ndarray = solutions[zone]
        for bus_id, (p_idx, q_idx) in sub.pcc_vars.items():
            p_pcc[bus_id] = float(x[p_idx] * sub.kw_base)
            q_pcc[bus_id] = float(x[q_idx] * sub.kw_base)
        for bus_id, idx in sub.pv_vars.items():
            q_pv[bus_id] = float(x[idx] * sub.kw_base)
    return Setpoints(p_pcc=dict(sorted(p_pcc.items())), q_pcc=dict(sorted(q_pcc.items())), q_pv=dict(sorted(q_pv.items())))
