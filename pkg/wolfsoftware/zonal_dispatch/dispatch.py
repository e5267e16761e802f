"""
This module schedules each microgrid over the horizon once its tie-line powers are fixed.

The microgrid minimises microturbine (MT), diesel engine (DE) and battery (BESS) cost while meeting
its net demand together with the tie-line import from the upper level:

    p_mt + p_de + p_dis - p_ch + p_pcc = load - pv - wind      every hour

with MT / DE ramp limits anchored at their initial output, the battery state-of-charge recursion
soc[t] = soc[t-1] + eta_ch * p_ch * dt / E - p_dis * dt / (eta_dis * E) and the SOC band.

Costs per hour:
- MT: k_op * p + gas_price * p / (eta * l_g) (operation plus gas).
- DE: k_op * p + k_fu * (alpha * x^2 + beta * x + gamma) with x = p / p_norm.
- BESS: zeta * (p_dis + p_ch).

Classes:
- DispatchProgram: The schedule program of one microgrid (a ConvexProgram with its context).
- CostBreakdown: Cost per component.
- MgSchedule: An optimal schedule.

Functions:
- build_dispatch: Build the program of one microgrid.
- solve_dispatch: Solve it and unpack the schedule.
- evaluate_cost: Cost of a schedule.
- diagnose_infeasible_hour: The first hour no device combination can meet.
- hourly_costs: Cost breakdown hour by hour.

Example usage:
    from .dispatch import build_dispatch, solve_dispatch

    schedule = solve_dispatch(build_dispatch(cfg, pcc_schedule, gas_price))
    print(schedule.costs.total)
"""

from dataclasses import dataclass, replace
from typing import Dict, List, Optional, Sequence, Tuple

import logging

import numpy as np

from .constants import BESS_EXCLUSIVE_TOL, DEFAULT_DELTA_T
from .exceptions import ConfigurationError, DispatchInfeasibleError, InfeasibleProblemError, IterationLimitError
from .kernel import ConvexProgram, KktSolution, solve
from .scenario import MgConfig

logger: logging.Logger = logging.getLogger(__name__)

KINDS: Tuple[str, ...] = ('p_mt', 'p_de', 'p_dis', 'p_ch', 'soc')


@dataclass
class DispatchProgram(ConvexProgram):
    """
    The schedule program of one microgrid.

    Variables are laid out kind-major: KINDS[k] at hour t sits at k * horizon + t.

    Attributes:
        mg (Optional[MgConfig]): The microgrid.
        pcc_schedule (Tuple[float, ...]): Tie-line import per hour [kW].
        gas_price (Tuple[float, ...]): Gas price per hour [$/m3].
        delta_t (float): Period length [h].
    """

    mg: Optional[MgConfig] = None
    pcc_schedule: Tuple[float, ...] = ()
    gas_price: Tuple[float, ...] = ()
    delta_t: float = DEFAULT_DELTA_T

    @property
    def horizon(self) -> int:
        """Number of hours."""
        return len(self.pcc_schedule)

    def var(self, kind: str, hour: int) -> int:
        """Return the index of one variable."""
        return KINDS.index(kind) * self.horizon + hour


@dataclass(frozen=True)
class CostBreakdown:
    """Cost per component [$]."""

    c_mt_op: float
    c_mt_fu: float
    c_de_op: float
    c_de_fu: float
    c_bess: float

    @property
    def total(self) -> float:
        """The sum of all components."""
        return self.c_mt_op + self.c_mt_fu + self.c_de_op + self.c_de_fu + self.c_bess


@dataclass
class MgSchedule:  # pylint: disable=too-many-instance-attributes
    """
    An hourly schedule of one microgrid (all powers in kW).

    Attributes:
        name (str): The microgrid.
        p_mt (np.ndarray): MT output.
        p_de (np.ndarray): DE output.
        p_bess_dis (np.ndarray): Battery discharge.
        p_bess_ch (np.ndarray): Battery charge.
        soc (np.ndarray): State of charge at the end of each hour.
        p_pcc (np.ndarray): Tie-line import.
        costs (CostBreakdown): Cost per component.
        objective (float): The solver's objective value.
    """

    name: str
    p_mt: np.ndarray
    p_de: np.ndarray
    p_bess_dis: np.ndarray
    p_bess_ch: np.ndarray
    soc: np.ndarray
    p_pcc: np.ndarray
    costs: Optional[CostBreakdown] = None
    objective: float = float('nan')

    @property
    def p_bess(self) -> np.ndarray:
        """Net battery output, positive when discharging."""
        return self.p_bess_dis - self.p_bess_ch

    def balance_residual(self, cfg: MgConfig) -> np.ndarray:
        """Return the power-balance residual per hour [kW]."""
        return self.p_mt + self.p_de + self.p_bess + self.p_pcc - cfg.net_demand()[:len(self.p_mt)]


def _check_lengths(cfg: MgConfig, pcc_schedule: Sequence[float], gas_price: Sequence[float]) -> int:
    """Return the horizon, rejecting mismatched inputs."""
    horizon: int = len(pcc_schedule)
    if horizon == 0:
        raise ConfigurationError(f"MG {cfg.name}: empty tie-line schedule")
    if len(gas_price) != horizon:
        raise ConfigurationError(f"MG {cfg.name}: {len(gas_price)} gas prices for {horizon} hours")
    if min(len(cfg.load), len(cfg.pv), len(cfg.wind)) < horizon:
        raise ConfigurationError(f"MG {cfg.name}: profiles are shorter than {horizon} hours")
    return horizon


def build_dispatch(cfg: MgConfig, pcc_schedule: Sequence[float], gas_price: Sequence[float], delta_t: float = DEFAULT_DELTA_T) -> DispatchProgram:
    """
    Build the schedule program of one microgrid.

    Arguments:
        cfg (MgConfig): The microgrid.
        pcc_schedule (Sequence[float]): Tie-line import per hour [kW], imposed exactly.
        gas_price (Sequence[float]): Gas price per hour [$/m3].
        delta_t (float): Period length [h].

    Returns:
        DispatchProgram: The program.

    Raises:
        ConfigurationError: If the inputs have mismatched lengths.
    """
    T: int = _check_lengths(cfg, pcc_schedule, gas_price)
    n: int = len(KINDS) * T
    mt, de, bess = cfg.mt, cfg.de, cfg.bess
    demand: np.ndarray = cfg.net_demand()[:T]

    def at(kind: str, hour: int) -> int:
        return KINDS.index(kind) * T + hour

    Q: np.ndarray = np.zeros((n, n))
    c: np.ndarray = np.zeros(n)
    lb: np.ndarray = np.zeros(n)
    ub: np.ndarray = np.zeros(n)
    A: np.ndarray = np.zeros((2 * T, n))
    b: np.ndarray = np.zeros(2 * T)
    G: np.ndarray = np.zeros((4 * T, n))
    h: np.ndarray = np.zeros(4 * T)
    constant: float = 0.0

    for t in range(T):
        c[at('p_mt', t)] = (mt.k_op + gas_price[t] / (mt.eta * mt.l_g)) * delta_t
        c[at('p_de', t)] = (de.k_op + de.k_fu * de.beta / de.norm) * delta_t
        Q[at('p_de', t), at('p_de', t)] = 2.0 * de.k_fu * de.alpha * delta_t / de.norm ** 2
        constant += de.k_fu * de.gamma * delta_t
        c[at('p_dis', t)] = bess.zeta * delta_t
        c[at('p_ch', t)] = bess.zeta * delta_t

        lb[at('p_mt', t)], ub[at('p_mt', t)] = mt.p_min, mt.p_max
        lb[at('p_de', t)], ub[at('p_de', t)] = de.p_min, de.p_max
        ub[at('p_dis', t)] = bess.p_max
        ub[at('p_ch', t)] = bess.p_max
        lb[at('soc', t)], ub[at('soc', t)] = bess.soc_min, bess.soc_max

        A[t, at('p_mt', t)] = 1.0
        A[t, at('p_de', t)] = 1.0
        A[t, at('p_dis', t)] = 1.0
        A[t, at('p_ch', t)] = -1.0
        b[t] = demand[t] - pcc_schedule[t]

        row: int = T + t
        A[row, at('soc', t)] = 1.0
        A[row, at('p_ch', t)] = -bess.eta_ch * delta_t / bess.capacity
        A[row, at('p_dis', t)] = delta_t / (bess.eta_dis * bess.capacity)
        if t == 0:
            b[row] = bess.soc0
        else:
            A[row, at('soc', t - 1)] = -1.0

        for k, (kind, dev) in enumerate((('p_mt', mt), ('p_de', de))):
            up: int = 4 * t + 2 * k
            G[up, at(kind, t)] = 1.0
            G[up + 1, at(kind, t)] = -1.0
            if t == 0:
                h[up] = dev.p_init + dev.ramp_up * delta_t
                h[up + 1] = dev.ramp_down * delta_t - dev.p_init
            else:
                G[up, at(kind, t - 1)] = -1.0
                G[up + 1, at(kind, t - 1)] = 1.0
                h[up] = dev.ramp_up * delta_t
                h[up + 1] = dev.ramp_down * delta_t

    names = [f"{kind}[{t}]" for kind in KINDS for t in range(T)]
    return DispatchProgram(
        n=n, Q=Q, c=c, A=A, b=b, G=G, h=h, lb=lb, ub=ub, constant=constant, names=names,
        mg=cfg, pcc_schedule=tuple(float(v) for v in pcc_schedule), gas_price=tuple(float(v) for v in gas_price), delta_t=delta_t,
    )


def evaluate_cost(schedule: MgSchedule, cfg: MgConfig, gas_price: Sequence[float], delta_t: float = DEFAULT_DELTA_T) -> CostBreakdown:
    """
    Evaluate the cost of a schedule.

    Arguments:
        schedule (MgSchedule): The schedule.
        cfg (MgConfig): The microgrid.
        gas_price (Sequence[float]): Gas price per hour [$/m3].
        delta_t (float): Period length [h].

    Returns:
        CostBreakdown: Cost per component [$].
    """
    mt, de = cfg.mt, cfg.de
    gas: np.ndarray = np.asarray(gas_price, dtype=float)[:len(schedule.p_mt)]
    x: np.ndarray = schedule.p_de / de.norm
    return CostBreakdown(
        c_mt_op=float(mt.k_op * np.sum(schedule.p_mt) * delta_t),
        c_mt_fu=float(np.sum(gas * schedule.p_mt) * delta_t / (mt.eta * mt.l_g)),
        c_de_op=float(de.k_op * np.sum(schedule.p_de) * delta_t),
        c_de_fu=float(de.k_fu * np.sum(de.alpha * x ** 2 + de.beta * x + de.gamma) * delta_t),
        c_bess=float(cfg.bess.zeta * np.sum(schedule.p_bess_dis + schedule.p_bess_ch) * delta_t),
    )


def diagnose_infeasible_hour(cfg: MgConfig, pcc_schedule: Sequence[float], delta_t: float = DEFAULT_DELTA_T) -> Optional[Tuple[int, str]]:
    """
    Find the first hour whose generation requirement falls outside what the devices can reach.

    Reachable MT / DE outputs and battery SOC are propagated forward from their initial values, each
    device on its own, so a schedule passing every hour may still be infeasible through coupling.

    Arguments:
        cfg (MgConfig): The microgrid.
        pcc_schedule (Sequence[float]): Tie-line import per hour [kW].
        delta_t (float): Period length [h].

    Returns:
        Optional[Tuple[int, str]]: (hour, reason) or None when every hour passes.
    """
    demand: np.ndarray = cfg.net_demand()
    bess = cfg.bess
    ranges: Dict[str, Tuple[float, float]] = {'MT': (cfg.mt.p_init, cfg.mt.p_init), 'DE': (cfg.de.p_init, cfg.de.p_init)}
    soc_lo: float = bess.soc0
    soc_hi: float = bess.soc0

    for t, pcc in enumerate(pcc_schedule):
        for label, dev in (('MT', cfg.mt), ('DE', cfg.de)):
            lo, hi = ranges[label]
            ranges[label] = (max(dev.p_min, lo - dev.ramp_down * delta_t), min(dev.p_max, hi + dev.ramp_up * delta_t))
        dis_max: float = min(bess.p_max, max(soc_hi - bess.soc_min, 0.0) * bess.eta_dis * bess.capacity / delta_t)
        ch_max: float = min(bess.p_max, max(bess.soc_max - soc_lo, 0.0) * bess.capacity / (bess.eta_ch * delta_t))

        required: float = demand[t] - pcc
        low: float = ranges['MT'][0] + ranges['DE'][0] - ch_max
        high: float = ranges['MT'][1] + ranges['DE'][1] + dis_max
        if required > high + 1e-6:
            return t, f"needs {required:.3f} kW from the devices but at most {high:.3f} kW is reachable"
        if required < low - 1e-6:
            return t, f"needs {required:.3f} kW from the devices but at least {low:.3f} kW is unavoidable"

        soc_hi = min(bess.soc_max, soc_hi + ch_max * bess.eta_ch * delta_t / bess.capacity)
        soc_lo = max(bess.soc_min, soc_lo - dis_max * delta_t / (bess.eta_dis * bess.capacity))

    return None


def _exclusive_hours(program: DispatchProgram, x: np.ndarray) -> np.ndarray:
    """Hours in which the battery both charges and discharges."""
    T: int = program.horizon
    dis: np.ndarray = x[program.var('p_dis', 0):program.var('p_dis', 0) + T]
    ch: np.ndarray = x[program.var('p_ch', 0):program.var('p_ch', 0) + T]
    return np.flatnonzero(np.minimum(dis, ch) > BESS_EXCLUSIVE_TOL)


def _pin_smaller_flow(program: DispatchProgram, x: np.ndarray, hours: np.ndarray) -> DispatchProgram:
    """Return a copy whose smaller battery flow is fixed at zero in each of the given hours."""
    ub: np.ndarray = program.ub.copy()
    for t in hours:
        dis: int = program.var('p_dis', int(t))
        ch: int = program.var('p_ch', int(t))
        ub[ch if x[ch] <= x[dis] else dis] = 0.0
    return replace(program, ub=ub)


def _solve_exclusive(program: DispatchProgram, cfg: MgConfig, config: Optional[Dict]) -> KktSolution:
    """Solve, then fix the smaller battery flow to zero wherever both are used and solve again."""
    current: DispatchProgram = program
    pinned: List[int] = []
    for _ in range(program.horizon + 1):
        try:
            solution: KktSolution = solve(current, config)
        except (InfeasibleProblemError, IterationLimitError) as e:
            if not pinned:
                if isinstance(e, IterationLimitError):
                    raise
                found: Optional[Tuple[int, str]] = diagnose_infeasible_hour(cfg, program.pcc_schedule, program.delta_t)
                if found is None:
                    raise DispatchInfeasibleError(cfg.name, None, "ramp and SOC limits cannot follow the tie-line schedule") from e
                raise DispatchInfeasibleError(cfg.name, found[0], found[1]) from e
            raise DispatchInfeasibleError(cfg.name, pinned[0], "the schedule needs the battery to charge and discharge at once") from e

        hours: np.ndarray = _exclusive_hours(current, solution.x)
        if not hours.size:
            return solution
        logger.debug("MG %s: battery charges and discharges at once in hour(s) %s, fixing the smaller flow", cfg.name, hours.tolist())
        pinned.extend(int(t) for t in hours if int(t) not in pinned)
        current = _pin_smaller_flow(current, solution.x, hours)

    raise DispatchInfeasibleError(cfg.name, pinned[0] if pinned else None, "battery charge and discharge could not be separated")


def solve_dispatch(program: DispatchProgram, config: Optional[Dict] = None) -> MgSchedule:
    """
    Solve a microgrid schedule program.

    The battery never charges and discharges in the same hour: wherever an optimum uses both flows,
    the smaller one is fixed at zero and the program is solved again. A schedule that can only be met
    with both flows at once is infeasible.

    Arguments:
        program (DispatchProgram): A program from build_dispatch.
        config (Optional[Dict]): Kernel options.

    Returns:
        MgSchedule: The optimal schedule with its cost breakdown.

    Raises:
        ConfigurationError: If the program was not built by build_dispatch.
        DispatchInfeasibleError: If the tie-line schedule cannot be met, naming the hour when one binds.
    """
    cfg: Optional[MgConfig] = program.mg
    if cfg is None:
        raise ConfigurationError("solve_dispatch needs a program built by build_dispatch")

    solution: KktSolution = _solve_exclusive(program, cfg, config)

    T: int = program.horizon
    x: np.ndarray = solution.x

    def series(kind: str) -> np.ndarray:
        start: int = program.var(kind, 0)
        return x[start:start + T].copy()

    schedule: MgSchedule = MgSchedule(
        name=cfg.name,
        p_mt=series('p_mt'),
        p_de=series('p_de'),
        p_bess_dis=series('p_dis'),
        p_bess_ch=series('p_ch'),
        soc=series('soc'),
        p_pcc=np.asarray(program.pcc_schedule, dtype=float),
        objective=solution.objective,
    )
    schedule.costs = evaluate_cost(schedule, cfg, program.gas_price, program.delta_t)
    logger.info("MG %s dispatched: cost %.2f $", cfg.name, schedule.costs.total)
    return schedule


def hourly_costs(schedule: MgSchedule, cfg: MgConfig, gas_price: Sequence[float], delta_t: float = DEFAULT_DELTA_T) -> List[CostBreakdown]:
    """
    Return the cost breakdown of every hour of a schedule.

    Arguments:
        schedule (MgSchedule): The schedule.
        cfg (MgConfig): The microgrid.
        gas_price (Sequence[float]): Gas price per hour [$/m3].
        delta_t (float): Period length [h].

    Returns:
        List[CostBreakdown]: One entry per hour; they sum to evaluate_cost of the whole schedule.
    """
    costs: List[CostBreakdown] = []
    for t in range(len(schedule.p_mt)):
        hour: slice = slice(t, t + 1)
        single: MgSchedule = MgSchedule(
            name=schedule.name,
            p_mt=schedule.p_mt[hour],
            p_de=schedule.p_de[hour],
            p_bess_dis=schedule.p_bess_dis[hour],
            p_bess_ch=schedule.p_bess_ch[hour],
            soc=schedule.soc[hour],
            p_pcc=schedule.p_pcc[hour],
        )
        costs.append(evaluate_cost(single, cfg, gas_price[t:t + 1], delta_t))
    return costs
