"""
This module runs the bi-level optimisation end to end.

For every hour: base-case power flow, sensitivities, partition, objective bounds, ADMM over the zones,
set-point extraction and an AC power flow of the optimised operating point. Once every hour has its
tie-line powers, each microgrid is dispatched over the whole horizon.

Classes:
- HourResult: Everything produced for one hour.
- RunReport: The hours, the microgrid schedules and the aggregate figures.
- ComparisonReport: Distributed versus centralized for one hour.
- BenchmarkReport: ADMM iteration counts per penalty strategy.

Functions:
- settings: Merge scenario options with caller overrides.
- solve_hour: The upper level of one hour.
- run: The whole pipeline.
- compare_centralized: Solve one hour both ways and compare.
- benchmark_penalty: Run every penalty strategy from identical starting points.

Example usage:
    from .cases import ieee33_scenario
    from .pipeline import run

    net, scenario = ieee33_scenario()
    report = run(net, scenario, {'strategy': 'improved'})
    print(report.loss_reduction_pct)
"""

from contextlib import contextmanager
from dataclasses import asdict, dataclass, field, replace
from typing import Any, Dict, Iterator, List, Optional, Sequence, Tuple

import concurrent.futures
import logging
import statistics
import time

import numpy as np

from .admm import AdmmConfig, AdmmResult, run as run_admm
from .constants import DEFAULT_THREADS, PENALTY_STRATEGIES
from .dispatch import MgSchedule, build_dispatch, solve_dispatch
from .exceptions import ConfigurationError, PipelineError, ZonalDispatchError
from .kernel import KktSolution, solve
from .network import Network
from .powerflow import PfSolution, SensitivityMatrix, bus_injections, sensitivity, solve_pf
from .scenario import ScenarioConfig
from .upper_opf import (
    CentralizedProblem, ObjectiveBounds, Setpoints, ZoneSubproblem, build_centralized, build_zone_subproblem, compute_objective_bounds,
    extract_setpoints, lindistflow_baseline, memberships, pcc_limits, satisfaction, voltage_relaxation, voltage_violations
)
from .zoning import ZonePartition, partition, single_zone

logger: logging.Logger = logging.getLogger(__name__)

ADMM_KEYS: Tuple[str, ...] = ('rho0', 'eps', 'max_iter', 'strategy', 'sigma', 'mu_ratio')


@dataclass
class HourResult:  # pylint: disable=too-many-instance-attributes
    """
    The upper-level outcome of one hour.

    Attributes:
        hour (int): The hour.
        zones (ZonePartition): The partition used.
        sensitivity (Optional[SensitivityMatrix]): Base-case sensitivities (None without MGs).
        bounds (Dict[int, ObjectiveBounds]): Payoff-table bounds per zone.
        admm (AdmmResult): The ADMM run.
        setpoints (Setpoints): Tie-line and PV reactive set-points.
        base_pf (PfSolution): Power flow before optimisation.
        opt_pf (PfSolution): Power flow at the optimised set-points.
        satisfaction (Dict[int, float]): phi per zone.
        memberships (Dict[int, Tuple[float, float]]): (mu1, mu2) per zone.
        voltage_relaxation (Dict[int, float]): Widening of the voltage band per bus [p.u.^2]; empty when the band could be met.
        voltage_violations (Dict[int, float]): Distance outside the nominal band per bus in the solution [p.u.^2], above 1e-6 only.
    """

    hour: int
    zones: ZonePartition
    sensitivity: Optional[SensitivityMatrix]
    bounds: Dict[int, ObjectiveBounds]
    admm: AdmmResult
    setpoints: Setpoints
    base_pf: PfSolution
    opt_pf: PfSolution
    satisfaction: Dict[int, float] = field(default_factory=dict)
    memberships: Dict[int, Tuple[float, float]] = field(default_factory=dict)
    voltage_relaxation: Dict[int, float] = field(default_factory=dict)
    voltage_violations: Dict[int, float] = field(default_factory=dict)

    @property
    def partition_id(self) -> str:
        """A readable partition signature: zone members joined per zone."""
        return '|'.join(','.join(str(b) for b in self.zones.zone_buses(z)) for z in self.zones.zones)

    @property
    def max_voltage_violation(self) -> float:
        """The largest distance outside the nominal voltage band [p.u.^2], 0 when every bus is inside."""
        return max(self.voltage_violations.values(), default=0.0)


@dataclass
class RunReport:
    """
    The outcome of a run.

    Attributes:
        hours (List[HourResult]): Per-hour results in hour order.
        schedules (Dict[str, MgSchedule]): Microgrid schedules (empty when only some hours ran).
        settings (Dict[str, Any]): The effective options.
        wall_time (float): Seconds spent.
        mg_names (Dict[int, str]): Microgrid name per PCC bus.
        scenario (Optional[ScenarioConfig]): The scenario that was run.
    """

    hours: List[HourResult]
    schedules: Dict[str, MgSchedule]
    settings: Dict[str, Any]
    wall_time: float = 0.0
    mg_names: Dict[int, str] = field(default_factory=dict)
    scenario: Optional[ScenarioConfig] = None

    @property
    def converged(self) -> bool:
        """True when ADMM converged in every hour."""
        return all(h.admm.converged for h in self.hours)

    @property
    def losses_before(self) -> float:
        """Total active loss before optimisation [kWh]."""
        return float(sum(h.base_pf.losses for h in self.hours))

    @property
    def losses_after(self) -> float:
        """Total active loss after optimisation [kWh]."""
        return float(sum(h.opt_pf.losses for h in self.hours))

    @property
    def loss_reduction_pct(self) -> float:
        """Relative loss reduction [%]."""
        return _reduction(self.losses_before, self.losses_after)

    @property
    def deviation_before(self) -> float:
        """Mean |V - 1| before optimisation, averaged over hours."""
        return float(np.mean([h.base_pf.mean_voltage_deviation for h in self.hours])) if self.hours else 0.0

    @property
    def deviation_after(self) -> float:
        """Mean |V - 1| after optimisation, averaged over hours."""
        return float(np.mean([h.opt_pf.mean_voltage_deviation for h in self.hours])) if self.hours else 0.0

    @property
    def total_cost(self) -> float:
        """Sum of all microgrid costs [$]."""
        return float(sum(s.costs.total for s in self.schedules.values() if s.costs is not None))

    @property
    def distinct_partitions(self) -> List[ZonePartition]:
        """Hourly partitions with repeats removed, in order of first appearance."""
        seen: Dict[Tuple[Tuple[int, int], ...], ZonePartition] = {}
        for h in self.hours:
            seen.setdefault(h.zones.key(), h.zones)
        return list(seen.values())

    def peak_hour(self) -> Optional[HourResult]:
        """Return the hour with the highest base-case loss."""
        return max(self.hours, key=lambda h: h.base_pf.losses) if self.hours else None


@dataclass(frozen=True)
class ComparisonReport:
    """
    Distributed versus centralized solution of one hour.

    Attributes:
        hour (int): The hour.
        distributed_objective (float): Sum of zone objectives at the ADMM solution.
        centralized_objective (float): Objective of the centralized program.
        relative_gap (float): |distributed - centralized| / max(|centralized|, 1e-12).
        max_voltage_deviation (float): Largest per-bus AC voltage difference [p.u.].
        converged (bool): Whether ADMM converged.
    """

    hour: int
    distributed_objective: float
    centralized_objective: float
    relative_gap: float
    max_voltage_deviation: float
    converged: bool


@dataclass
class BenchmarkReport:
    """
    Iteration counts per penalty strategy.

    Attributes:
        runs (Dict[str, Dict[int, AdmmResult]]): strategy -> hour -> ADMM result.
    """

    runs: Dict[str, Dict[int, AdmmResult]] = field(default_factory=dict)

    def iterations(self, strategy: str) -> List[int]:
        """Return the iteration counts of a strategy in hour order."""
        return [r.iterations for _, r in sorted(self.runs.get(strategy, {}).items())]

    def median(self, strategy: str) -> float:
        """Median iteration count of a strategy."""
        counts: List[int] = self.iterations(strategy)
        return float(statistics.median(counts)) if counts else 0.0

    def total(self, strategy: str) -> int:
        """Total iteration count of a strategy."""
        return sum(self.iterations(strategy))

    def reduction_pct(self, baseline: str = 'adaptive', improved: str = 'improved') -> float:
        """Relative reduction in total iterations of one strategy against another [%]."""
        return _reduction(float(self.total(baseline)), float(self.total(improved)))


def _reduction(before: float, after: float) -> float:
    """Percentage reduction, 0 when there is nothing to reduce."""
    return 0.0 if before == 0.0 else 100.0 * (before - after) / before


@contextmanager
def _stage(name: str, hour: Optional[int] = None) -> Iterator[None]:
    """Wrap package errors raised inside a stage with its context."""
    try:
        yield
    except PipelineError:
        raise
    except ZonalDispatchError as e:
        raise PipelineError(name, hour, e) from e


def settings(scenario: ScenarioConfig, config: Optional[Dict] = None) -> Dict[str, Any]:
    """
    Merge options: caller overrides win over the scenario file, which wins over the defaults.

    Arguments:
        scenario (ScenarioConfig): The scenario.
        config (Optional[Dict]): Caller overrides (None values are ignored).

    Returns:
        Dict[str, Any]: Upper-level, kernel and ADMM options in one mapping.
    """
    merged: Dict[str, Any] = {**asdict(scenario.admm), **scenario.upper}
    merged.update({k: v for k, v in (config or {}).items() if v is not None})
    return merged


def admm_config(options: Dict[str, Any]) -> AdmmConfig:
    """Return the AdmmConfig held in a merged option mapping."""
    return AdmmConfig.from_dict({k: options[k] for k in ADMM_KEYS if k in options})


@dataclass
class _HourSetup:
    """The zone problems of one hour, ready for ADMM."""

    zones: ZonePartition
    sens: Optional[SensitivityMatrix]
    base_pf: PfSolution
    bounds: Dict[int, ObjectiveBounds]
    limits: Dict[int, Tuple[float, float]]
    subproblems: Dict[int, ZoneSubproblem]
    x_ref: Dict[str, np.ndarray]
    relaxation: Dict[int, float] = field(default_factory=dict)


def _setup_hour(net: Network, scenario: ScenarioConfig, hour: int, options: Dict[str, Any]) -> _HourSetup:
    """Base case, partition, bounds and zone problems of one hour."""
    with _stage('base_pf', hour):
        base_pf: PfSolution = solve_pf(net, bus_injections(net, hour), options)

    sens: Optional[SensitivityMatrix] = None
    with _stage('partition', hour):
        if net.mg_buses:
            sens = sensitivity(net, base_pf)
            zones: ZonePartition = partition(sens, net)
        else:
            zones = single_zone(net)

    with _stage('bounds', hour):
        limits: Dict[int, Tuple[float, float]] = pcc_limits(net, scenario, hour, options)
        relaxation: Dict[int, float] = voltage_relaxation(net, hour, limits, options)
        if relaxation:
            logger.info(
                "Hour %d: the voltage band cannot be met; widened at bus(es) %s (max %.2e p.u.^2)", hour, sorted(relaxation), max(relaxation.values())
            )
        bounds: Dict[int, ObjectiveBounds] = {z: compute_objective_bounds(z, net, zones, hour, limits, options, relaxation) for z in zones.zones}
        subs: Dict[int, ZoneSubproblem] = {z: build_zone_subproblem(z, net, zones, hour, bounds[z], limits, options, relaxation) for z in zones.zones}

    baseline = lindistflow_baseline(net, hour)
    x_ref: Dict[str, np.ndarray] = {o.label: baseline.boundary(o) for o in zones.overlaps}
    return _HourSetup(zones=zones, sens=sens, base_pf=base_pf, bounds=bounds, limits=limits, subproblems=subs, x_ref=x_ref, relaxation=relaxation)


def _verify(net: Network, hour: int, setpoints: Setpoints, options: Dict[str, Any]) -> PfSolution:
    """AC power flow at the optimised set-points."""
    with _stage('verify_pf', hour):
        return solve_pf(net, bus_injections(net, hour, setpoints.p_pcc, setpoints.q_pcc, setpoints.q_pv), options)


def solve_hour(net: Network, scenario: ScenarioConfig, hour: int, config: Optional[Dict] = None) -> HourResult:
    """
    Run the upper level of one hour.

    Arguments:
        net (Network): The network.
        scenario (ScenarioConfig): The scenario.
        hour (int): The hour.
        config (Optional[Dict]): Overrides of scenario options.

    Returns:
        HourResult: The hour's results.

    Raises:
        PipelineError: If a stage fails, carrying the stage, hour and cause.
    """
    options: Dict[str, Any] = settings(scenario, config)
    setup: _HourSetup = _setup_hour(net, scenario, hour, options)

    with _stage('admm', hour):
        result: AdmmResult = run_admm(setup.subproblems, admm_config(options), setup.x_ref, options)

    setpoints: Setpoints = extract_setpoints(result.solutions, setup.subproblems)
    opt_pf: PfSolution = _verify(net, hour, setpoints, options)
    violations: Dict[int, float] = {}
    for zone, sub in setup.subproblems.items():
        violations.update(voltage_violations(result.solutions[zone], sub))
    if violations:
        logger.warning(
            "Hour %d: voltage outside the nominal band at bus(es) %s (max %.2e p.u.^2)", hour, sorted(violations), max(violations.values())
        )

    logger.info(
        "Hour %d: %d zone(s), ADMM %d iteration(s) converged=%s, losses %.2f -> %.2f kW",
        hour, len(setup.zones.zones), result.iterations, result.converged, setup.base_pf.losses, opt_pf.losses
    )
    return HourResult(
        hour=hour,
        zones=setup.zones,
        sensitivity=setup.sens,
        bounds=setup.bounds,
        admm=result,
        setpoints=setpoints,
        base_pf=setup.base_pf,
        opt_pf=opt_pf,
        satisfaction={z: satisfaction(result.solutions[z], s) for z, s in setup.subproblems.items()},
        memberships={z: memberships(result.solutions[z], s) for z, s in setup.subproblems.items()},
        voltage_relaxation=setup.relaxation,
        voltage_violations=dict(sorted(violations.items())),
    )


def _hours(net: Network, hours: Optional[Sequence[int]]) -> List[int]:
    """Validate requested hours."""
    selected: List[int] = list(range(net.horizon)) if hours is None else sorted(set(hours))
    for hour in selected:
        if not 0 <= hour < net.horizon:
            raise ConfigurationError(f"hour {hour} is outside 0..{net.horizon - 1}")
    return selected


def _dispatch(net: Network, scenario: ScenarioConfig, results: List[HourResult], options: Dict[str, Any]) -> Dict[str, MgSchedule]:
    """Dispatch every microgrid over the horizon with the tie-line powers found hour by hour."""
    schedules: Dict[str, MgSchedule] = {}
    threads: List[concurrent.futures.Future] = []

    def one(bus_id: int) -> MgSchedule:
        name: str = net.bus(bus_id).mg  # type: ignore[assignment]
        pcc: List[float] = [h.setpoints.p_pcc[bus_id] for h in results]
        with _stage('dispatch'):
            return solve_dispatch(build_dispatch(scenario.mg_configs[name], pcc, scenario.gas_price[:len(pcc)], scenario.delta_t), options)

    with concurrent.futures.ThreadPoolExecutor(max_workers=options.get('threads', DEFAULT_THREADS)) as executor:
        for bus_id in net.mg_buses:
            threads.append(executor.submit(one, bus_id))

        for task in concurrent.futures.as_completed(threads):
            schedule: MgSchedule = task.result()
            schedules[schedule.name] = schedule

    return dict(sorted(schedules.items()))


def run(net: Network, scenario: ScenarioConfig, config: Optional[Dict] = None, hours: Optional[Sequence[int]] = None) -> RunReport:
    """
    Run the whole pipeline.

    Hours run concurrently when 'threads' > 1 and are reassembled in hour order. The microgrid
    dispatch only runs when every hour of the horizon was solved.

    Arguments:
        net (Network): The network.
        scenario (ScenarioConfig): The scenario.
        config (Optional[Dict]): Overrides of scenario options.
        hours (Optional[Sequence[int]]): Hours to solve; all when None.

    Returns:
        RunReport: The report.

    Raises:
        ConfigurationError: If an hour is out of range.
        PipelineError: If a stage fails.
    """
    started: float = time.perf_counter()
    options: Dict[str, Any] = settings(scenario, config)
    selected: List[int] = _hours(net, hours)
    max_workers: int = options.get('threads', DEFAULT_THREADS)

    results: Dict[int, HourResult] = {}
    if max_workers > 1 and len(selected) > 1:
        threads: Dict[concurrent.futures.Future, int] = {}
        with concurrent.futures.ThreadPoolExecutor(max_workers=max_workers) as executor:
            for hour in selected:
                threads[executor.submit(solve_hour, net, scenario, hour, config)] = hour
            for task in concurrent.futures.as_completed(threads):
                results[threads[task]] = task.result()
    else:
        for hour in selected:
            results[hour] = solve_hour(net, scenario, hour, config)

    ordered: List[HourResult] = [results[h] for h in selected]
    schedules: Dict[str, MgSchedule] = {}
    if len(selected) == net.horizon and net.mg_buses:
        schedules = _dispatch(net, scenario, ordered, options)

    report: RunReport = RunReport(
        hours=ordered,
        schedules=schedules,
        settings=options,
        wall_time=time.perf_counter() - started,
        mg_names={b: net.bus(b).mg or str(b) for b in net.mg_buses},
        scenario=scenario,
    )
    logger.info(
        "Run finished: %d hour(s), %d distinct partition(s), losses %.1f -> %.1f kWh (%.2f%%), converged=%s",
        len(ordered), len(report.distinct_partitions), report.losses_before, report.losses_after, report.loss_reduction_pct, report.converged
    )
    return report


def compare_centralized(net: Network, scenario: ScenarioConfig, hour: int, config: Optional[Dict] = None) -> ComparisonReport:
    """
    Solve one hour with ADMM and with the centralized program, and compare.

    Arguments:
        net (Network): The network.
        scenario (ScenarioConfig): The scenario.
        hour (int): The hour.
        config (Optional[Dict]): Overrides of scenario options.

    Returns:
        ComparisonReport: Objective gap and largest voltage difference.
    """
    _hours(net, [hour])
    options: Dict[str, Any] = settings(scenario, config)
    setup: _HourSetup = _setup_hour(net, scenario, hour, options)

    with _stage('admm', hour):
        distributed: AdmmResult = run_admm(setup.subproblems, admm_config(options), setup.x_ref, options)
    with _stage('centralized', hour):
        central: CentralizedProblem = build_centralized(net, hour, setup.zones, setup.bounds, setup.limits, options, setup.relaxation)
        solution: KktSolution = solve(central.program, options)

    central_x: Dict[int, np.ndarray] = {z: central.zone_solution(solution.x, z) for z in setup.zones.zones}
    pf_d: PfSolution = _verify(net, hour, extract_setpoints(distributed.solutions, setup.subproblems), options)
    pf_c: PfSolution = _verify(net, hour, extract_setpoints(central_x, central.subproblems), options)

    c_obj: float = solution.objective
    gap: float = abs(distributed.objective - c_obj) / max(abs(c_obj), 1e-12)
    report: ComparisonReport = ComparisonReport(
        hour=hour,
        distributed_objective=distributed.objective,
        centralized_objective=c_obj,
        relative_gap=gap,
        max_voltage_deviation=float(np.max(np.abs(pf_d.v - pf_c.v))),
        converged=distributed.converged,
    )
    logger.info("Hour %d: distributed %.6f vs centralized %.6f (gap %.3e)", hour, distributed.objective, c_obj, gap)
    return report


def benchmark_penalty(
    net: Network,
    scenario: ScenarioConfig,
    config: Optional[Dict] = None,
    hours: Optional[Sequence[int]] = None,
    strategies: Sequence[str] = PENALTY_STRATEGIES
) -> BenchmarkReport:
    """
    Run every penalty strategy on the same zone problems of each hour.

    Every run starts from rho0 and u = 0 with the LinDistFlow baseline as reference.

    Arguments:
        net (Network): The network.
        scenario (ScenarioConfig): The scenario.
        config (Optional[Dict]): Overrides of scenario options.
        hours (Optional[Sequence[int]]): Hours to benchmark; all when None.
        strategies (Sequence[str]): Strategies to compare.

    Returns:
        BenchmarkReport: ADMM results per strategy and hour.
    """
    options: Dict[str, Any] = settings(scenario, config)
    base_cfg: AdmmConfig = admm_config(options)
    report: BenchmarkReport = BenchmarkReport(runs={s: {} for s in strategies})

    for hour in _hours(net, hours):
        setup: _HourSetup = _setup_hour(net, scenario, hour, options)
        for strategy in strategies:
            with _stage(f"admm[{strategy}]", hour):
                report.runs[strategy][hour] = run_admm(setup.subproblems, replace(base_cfg, strategy=strategy), setup.x_ref, options)
        logger.info("Hour %d iterations: %s", hour, {s: report.runs[s][hour].iterations for s in strategies})

    return report
