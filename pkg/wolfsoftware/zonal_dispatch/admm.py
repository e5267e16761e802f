"""
This module coordinates the zone subproblems with scaled-form consensus ADMM.

Every overlapping branch is shared by two zones; each zone keeps a local copy of the branch's
boundary vector. Per iteration the zones solve their augmented problems concurrently, the copies are
averaged into a reference, residuals are measured and the penalty strategy decides whether to change
rho. The scaled duals are then rescaled by omega = rho_old / rho_new so the unscaled multiplier
lambda = rho * u carries over unchanged.

Each overlapping branch carries its own rho, scaled duals and judgment counters.

Classes:
- AdmmConfig: ADMM settings.
- ConsensusState: The per-branch consensus state the loop mutates.
- TraceRow / AdmmTrace: Residual history.
- AdmmResult: The outcome of a run.

Functions:
- run: Scaled ADMM over a set of zone subproblems.
- unscaled_reference_run: The same iteration carried out on unscaled multipliers.
- residuals: Primal and dual residual of one branch.
- update_penalty_adaptive: Residual-balancing penalty update.
- update_penalty_improved: The counter-gated variant of the adaptive update, applying the compounded streak.
- rescale_dual: The scaled dual update with penalty correction.

Dependencies:
- concurrent.futures: Used for concurrent zone solves.
- kernel: Solves each augmented zone problem.

Example usage:
    from .admm import AdmmConfig, run

    result = run(subproblems, AdmmConfig(strategy='improved'), x_ref=baseline)
    print(result.iterations, result.converged)
"""

from dataclasses import dataclass, field, fields, replace
from typing import TYPE_CHECKING, Any, Dict, List, Mapping, Optional, Tuple

import concurrent.futures
import logging
import math
import time

import numpy as np

from .constants import (
    DEFAULT_EPS, DEFAULT_MAX_ITER, DEFAULT_MU_RATIO, DEFAULT_RHO0, DEFAULT_SIGMA, DEFAULT_STRATEGY, DEFAULT_THREADS, PENALTY_STRATEGIES
)
from .exceptions import ConfigurationError, SubproblemError, ZonalDispatchError
from .kernel import ConvexProgram, KktSolution, solve

if TYPE_CHECKING:
    from .upper_opf import ZoneSubproblem

logger: logging.Logger = logging.getLogger(__name__)

INCREASE: str = 'increase'
DECREASE: str = 'decrease'
HOLD: str = 'hold'


@dataclass(frozen=True)
class AdmmConfig:
    """
    ADMM settings.

    Attributes:
        rho0 (float): Initial penalty (> 0).
        eps (float): Convergence accuracy on both residuals (> 0).
        max_iter (int): Iteration cap.
        strategy (str): 'fixed', 'adaptive' or 'improved'.
        sigma (int): Consecutive identical judgments needed before the improved strategy acts (>= 1).
        mu_ratio (float): Residual ratio that triggers a penalty change (> 1).
    """

    rho0: float = DEFAULT_RHO0
    eps: float = DEFAULT_EPS
    max_iter: int = DEFAULT_MAX_ITER
    strategy: str = DEFAULT_STRATEGY
    sigma: int = DEFAULT_SIGMA
    mu_ratio: float = DEFAULT_MU_RATIO

    def __post_init__(self) -> None:
        """
        Check the invariants.

        Raises:
            ConfigurationError: If a field is out of range.
        """
        if not self.rho0 > 0:
            raise ConfigurationError(f"rho0 must be positive, got {self.rho0}")
        if not self.eps > 0:
            raise ConfigurationError(f"eps must be positive, got {self.eps}")
        if self.max_iter < 1:
            raise ConfigurationError(f"max_iter must be at least 1, got {self.max_iter}")
        if self.strategy not in PENALTY_STRATEGIES:
            raise ConfigurationError(f"strategy must be one of {', '.join(PENALTY_STRATEGIES)}, got '{self.strategy}'")
        if self.sigma < 1:
            raise ConfigurationError(f"sigma must be at least 1, got {self.sigma}")
        if not self.mu_ratio > 1:
            raise ConfigurationError(f"mu_ratio must exceed 1, got {self.mu_ratio}")

    @classmethod
    def from_dict(cls, doc: Optional[Mapping[str, Any]] = None) -> 'AdmmConfig':
        """
        Build a configuration from a mapping, ignoring keys that are not ADMM settings.

        Arguments:
            doc (Optional[Mapping[str, Any]]): Settings; missing keys use the defaults.

        Returns:
            AdmmConfig: The validated configuration.

        Raises:
            ConfigurationError: If a value has the wrong type or violates an invariant.
        """
        doc = doc or {}
        kwargs: Dict[str, Any] = {}
        for f in fields(cls):
            if f.name not in doc or doc[f.name] is None:
                continue
            value: Any = doc[f.name]
            try:
                kwargs[f.name] = str(value) if f.name == 'strategy' else (int(value) if f.name in ('max_iter', 'sigma') else float(value))
            except (TypeError, ValueError) as e:
                raise ConfigurationError(f"admm setting '{f.name}' has an invalid value {value!r}") from e
        return cls(**kwargs)


@dataclass
class ConsensusState:  # pylint: disable=too-many-instance-attributes
    """
    Consensus state of one overlapping branch.

    Attributes:
        label (str): The branch label (boundary key).
        zones (Tuple[int, int]): The two zones sharing it.
        x_ref (np.ndarray): Averaged reference X_K.
        rho (float): Penalty.
        x (Dict[int, np.ndarray]): Latest local copy per zone.
        x_prev (Dict[int, np.ndarray]): Previous local copy per zone.
        u (Dict[int, np.ndarray]): Scaled dual per zone.
        omega (float): rho_old / rho_new of the latest update, 1 when rho did not change.
        tau1 (int): Consecutive 'increase' judgments.
        tau2 (int): Consecutive 'decrease' judgments.
        streak (float): Product of the residual-balancing factors over the current run of equal judgments.
        r_hist (List[float]): Primal residual per iteration.
        d_hist (List[float]): Dual residual per iteration.
    """

    label: str
    zones: Tuple[int, int]
    x_ref: np.ndarray
    rho: float
    x: Dict[int, np.ndarray] = field(default_factory=dict)
    x_prev: Dict[int, np.ndarray] = field(default_factory=dict)
    u: Dict[int, np.ndarray] = field(default_factory=dict)
    omega: float = 1.0
    tau1: int = 0
    tau2: int = 0
    streak: float = 1.0
    r_hist: List[float] = field(default_factory=list)
    d_hist: List[float] = field(default_factory=list)

    @property
    def multipliers(self) -> Dict[int, np.ndarray]:
        """The unscaled multiplier rho * u per zone."""
        return {z: self.rho * u for z, u in self.u.items()}


@dataclass(frozen=True)
class TraceRow:
    """One residual record: a branch seen from one zone at one iteration."""

    iteration: int
    zone: int
    branch: str
    r: float
    d: float
    rho: float


@dataclass
class AdmmTrace:
    """
    Residual history of a run.

    Attributes:
        rows (List[TraceRow]): One row per iteration, zone and branch.
    """

    rows: List[TraceRow] = field(default_factory=list)

    def zone_residuals(self) -> List[Tuple[int, int, float, float]]:
        """
        Return (iteration, zone, r, d) with Euclidean norms over each zone's branches.

        Returns:
            List[Tuple[int, int, float, float]]: Ordered by iteration then zone.
        """
        sums: Dict[Tuple[int, int], List[float]] = {}
        for row in self.rows:
            acc: List[float] = sums.setdefault((row.iteration, row.zone), [0.0, 0.0])
            acc[0] += row.r ** 2
            acc[1] += row.d ** 2
        return [(it, z, math.sqrt(r2), math.sqrt(d2)) for (it, z), (r2, d2) in sorted(sums.items())]

    def max_residuals(self) -> List[Tuple[int, float, float]]:
        """Return (iteration, max r, max d) over all branches."""
        worst: Dict[int, List[float]] = {}
        for row in self.rows:
            acc: List[float] = worst.setdefault(row.iteration, [0.0, 0.0])
            acc[0] = max(acc[0], row.r)
            acc[1] = max(acc[1], row.d)
        return [(it, r, d) for it, (r, d) in sorted(worst.items())]


@dataclass
class AdmmResult:  # pylint: disable=too-many-instance-attributes
    """
    The outcome of an ADMM run.

    Attributes:
        solutions (Dict[int, np.ndarray]): Final solution vector per zone.
        trace (AdmmTrace): Residual history.
        iterations (int): Iterations performed.
        converged (bool): Whether both residuals reached eps on every branch.
        wall_time (float): Seconds spent.
        states (Dict[str, ConsensusState]): Final consensus state per branch.
        strategy (str): The penalty strategy used.
        objective (float): Sum of the zone objectives at the final solutions (augmentation excluded).
        multipliers (List[Dict[Tuple[str, int], np.ndarray]]): Unscaled multipliers per (branch, zone) after each iteration.
    """

    solutions: Dict[int, np.ndarray]
    trace: AdmmTrace
    iterations: int
    converged: bool
    wall_time: float
    states: Dict[str, ConsensusState]
    strategy: str
    objective: float = float('nan')
    multipliers: List[Dict[Tuple[str, int], np.ndarray]] = field(default_factory=list)


def residuals(state: ConsensusState) -> Tuple[float, float]:
    """
    Return the residuals of one branch.

    Arguments:
        state (ConsensusState): A state whose copies have been updated at least once.

    Returns:
        Tuple[float, float]: r = ||X_a - X_b|| and d = the larger change of either copy since the previous iteration.
    """
    a, b = state.zones
    r: float = float(np.linalg.norm(state.x[a] - state.x[b]))
    d: float = max(float(np.linalg.norm(state.x[z] - state.x_prev.get(z, state.x[z]))) for z in state.zones)
    return r, d


def _judge(r: float, d: float, mu_ratio: float) -> str:
    """Classify a residual pair."""
    if r == 0.0 or d == 0.0:
        return HOLD
    if d < r / mu_ratio:
        return INCREASE
    if d > mu_ratio * r:
        return DECREASE
    return HOLD


def _balance_factor(r: float, d: float, mu_ratio: float) -> float:
    """The multiplicative change of rho for one residual pair, 1 on a hold."""
    judgment: str = _judge(r, d, mu_ratio)
    if judgment == INCREASE:
        return 1.0 + math.log10(r / d)
    if judgment == DECREASE:
        return 1.0 / (1.0 + math.log10(d / r))
    return 1.0


def update_penalty_adaptive(rho: float, r: float, d: float, mu_ratio: float = DEFAULT_MU_RATIO) -> float:
    """
    Balance the residuals by scaling rho.

    rho grows by 1 + log10(r/d) when d < r/mu_ratio and shrinks by 1 + log10(d/r) when d > mu_ratio * r;
    otherwise, or when either residual is zero, it is unchanged.

    Arguments:
        rho (float): The current penalty (> 0).
        r (float): Primal residual.
        d (float): Dual residual.
        mu_ratio (float): Trigger ratio (> 1).

    Returns:
        float: The new penalty (> 0).
    """
    return rho * _balance_factor(r, d, mu_ratio)


def update_penalty_improved(state: ConsensusState, r: float, d: float, cfg: AdmmConfig) -> ConsensusState:
    """
    Change rho only after sigma consecutive identical judgments.

    Each judgment in a run contributes its residual-balancing factor to the streak; when the run reaches
    sigma, rho is scaled by the whole streak at once and the counters restart. A change of judgment or
    a hold discards the streak, so alternating judgments never move rho. With sigma = 1 this is the
    adaptive rule.

    Arguments:
        state (ConsensusState): The branch state.
        r (float): Primal residual.
        d (float): Dual residual.
        cfg (AdmmConfig): Supplies sigma and mu_ratio.

    Returns:
        ConsensusState: A copy with rho, omega, the counters and the streak updated.
    """
    judgment: str = _judge(r, d, cfg.mu_ratio)
    tau1: int = state.tau1 + 1 if judgment == INCREASE else 0
    tau2: int = state.tau2 + 1 if judgment == DECREASE else 0
    if judgment == HOLD:
        return replace(state, omega=1.0, tau1=0, tau2=0, streak=1.0)

    continuing: bool = (judgment == INCREASE and state.tau1 > 0) or (judgment == DECREASE and state.tau2 > 0)
    streak: float = (state.streak if continuing else 1.0) * _balance_factor(r, d, cfg.mu_ratio)

    if tau1 >= cfg.sigma or tau2 >= cfg.sigma:
        rho: float = state.rho * streak
        return replace(state, rho=rho, omega=state.rho / rho, tau1=0, tau2=0, streak=1.0)
    return replace(state, omega=1.0, tau1=tau1, tau2=tau2, streak=streak)


def rescale_dual(u: np.ndarray, omega: float, x_a: np.ndarray, x_ref: np.ndarray) -> np.ndarray:
    """
    Return the scaled dual update omega * (u + x_a - x_ref).

    Arguments:
        u (np.ndarray): Current scaled dual.
        omega (float): rho_old / rho_new (> 0).
        x_a (np.ndarray): The zone's new local copy.
        x_ref (np.ndarray): The new reference.

    Returns:
        np.ndarray: The new scaled dual.

    Raises:
        ConfigurationError: If omega is not positive.
    """
    if not omega > 0:
        raise ConfigurationError(f"omega must be positive, got {omega}")
    return omega * (u + x_a - x_ref)


def _consensus_states(subproblems: Mapping[int, 'ZoneSubproblem'], rho0: float, x_ref: Optional[Mapping[str, np.ndarray]]) -> Dict[str, ConsensusState]:
    """Pair up boundary keys shared by exactly two zones."""
    owners: Dict[str, List[int]] = {}
    for zone in sorted(subproblems):
        for label in subproblems[zone].boundary:
            owners.setdefault(label, []).append(zone)

    states: Dict[str, ConsensusState] = {}
    for label, zones in owners.items():
        if len(zones) != 2:
            raise ConfigurationError(f"boundary '{label}' must be shared by exactly two zones, found {zones}")
        size: int = len(subproblems[zones[0]].boundary[label])
        if len(subproblems[zones[1]].boundary[label]) != size:
            raise ConfigurationError(f"boundary '{label}' has different lengths in zones {zones}")
        start: np.ndarray = np.zeros(size) if x_ref is None or label not in x_ref else np.asarray(x_ref[label], dtype=float).copy()
        states[label] = ConsensusState(
            label=label,
            zones=(zones[0], zones[1]),
            x_ref=start,
            rho=rho0,
            x={z: start.copy() for z in zones},
            x_prev={z: start.copy() for z in zones},
            u={z: np.zeros(size) for z in zones},
        )
    return states


def _augment(program: ConvexProgram, terms: List[Tuple[np.ndarray, float, np.ndarray, np.ndarray]]) -> ConvexProgram:
    """
    Add sum of lambda'(x[idx] - ref) + rho/2 ||x[idx] - ref||^2 to the objective.

    Each term is (idx, rho, ref, lambda).
    """
    Q: np.ndarray = program.Q.copy()
    c: np.ndarray = program.c.copy()
    constant: float = program.constant
    for idx, rho, ref, lam in terms:
        Q[idx, idx] += rho
        c[idx] += lam - rho * ref
        constant += 0.5 * rho * float(ref @ ref) - float(lam @ ref)
    return replace(program, Q=Q, c=c, constant=constant)


def _solve_zone(zone: int, program: ConvexProgram, iteration: int, config: Dict) -> KktSolution:
    """Solve one augmented zone problem with context on failure."""
    try:
        return solve(program, config)
    except ZonalDispatchError as e:
        raise SubproblemError(zone, iteration, e) from e


def _iterate(  # noqa: C901
    subproblems: Mapping[int, 'ZoneSubproblem'],
    cfg: AdmmConfig,
    x_ref: Optional[Mapping[str, np.ndarray]],
    config: Optional[Dict],
    scaled: bool
) -> AdmmResult:
    """The consensus loop shared by the scaled run and the unscaled reference."""
    if config is None:
        config = {}
    if not subproblems:
        raise ConfigurationError("ADMM needs at least one zone subproblem")

    started: float = time.perf_counter()
    states: Dict[str, ConsensusState] = _consensus_states(subproblems, cfg.rho0, x_ref)
    lam: Dict[Tuple[str, int], np.ndarray] = {(s.label, z): np.zeros_like(s.x_ref) for s in states.values() for z in s.zones}
    trace: AdmmTrace = AdmmTrace()
    history: List[Dict[Tuple[str, int], np.ndarray]] = []
    solutions: Dict[int, np.ndarray] = {}
    max_workers: int = config.get('threads', DEFAULT_THREADS)
    converged: bool = False
    iteration: int = 0

    with concurrent.futures.ThreadPoolExecutor(max_workers=max_workers) as executor:
        while iteration < cfg.max_iter:
            iteration += 1
            programs: Dict[int, ConvexProgram] = {}
            for zone, sub in subproblems.items():
                terms: List[Tuple[np.ndarray, float, np.ndarray, np.ndarray]] = []
                for label, idx in sub.boundary.items():
                    state: ConsensusState = states[label]
                    if scaled:
                        terms.append((idx, state.rho, state.x_ref - state.u[zone], np.zeros_like(state.x_ref)))
                    else:
                        terms.append((idx, state.rho, state.x_ref, lam[(label, zone)]))
                programs[zone] = _augment(sub.program, terms)

            tasks: Dict[concurrent.futures.Future, int] = {
                executor.submit(_solve_zone, zone, program, iteration, config): zone for zone, program in programs.items()
            }
            for task in concurrent.futures.as_completed(tasks):
                solutions[tasks[task]] = task.result().x

            all_done: bool = True
            for label, state in states.items():
                for zone in state.zones:
                    state.x_prev[zone] = state.x[zone]
                    state.x[zone] = solutions[zone][subproblems[zone].boundary[label]]
                new_ref: np.ndarray = sum(state.x[z] for z in state.zones) / 2.0
                r, d = residuals(state)
                state.r_hist.append(r)
                state.d_hist.append(d)
                for zone in state.zones:
                    trace.rows.append(TraceRow(iteration=iteration, zone=zone, branch=label, r=r, d=d, rho=state.rho))
                all_done = all_done and r <= cfg.eps and d <= cfg.eps

                rho_old: float = state.rho
                if cfg.strategy == 'adaptive':
                    rho_new: float = update_penalty_adaptive(rho_old, r, d, cfg.mu_ratio)
                    state.rho, state.omega = rho_new, rho_old / rho_new
                elif cfg.strategy == 'improved':
                    updated: ConsensusState = update_penalty_improved(state, r, d, cfg)
                    state.rho, state.omega = updated.rho, updated.omega
                    state.tau1, state.tau2, state.streak = updated.tau1, updated.tau2, updated.streak
                else:
                    state.omega = 1.0
                if state.rho != rho_old:
                    logger.debug("Branch %s iteration %d: rho %.6g -> %.6g", label, iteration, rho_old, state.rho)

                for zone in state.zones:
                    if scaled:
                        state.u[zone] = rescale_dual(state.u[zone], state.omega, state.x[zone], new_ref)
                    else:
                        lam[(label, zone)] = lam[(label, zone)] + rho_old * (state.x[zone] - new_ref)
                        state.u[zone] = lam[(label, zone)] / state.rho
                state.x_ref = new_ref

            history.append({(label, z): (s.rho * s.u[z] if scaled else lam[(label, z)].copy()) for label, s in states.items() for z in s.zones})
            if states:
                worst: Tuple[int, float, float] = trace.max_residuals()[-1]
                logger.debug("ADMM iteration %d: max r %.3e, max d %.3e", iteration, worst[1], worst[2])
            if all_done:
                converged = True
                break

    if not converged:
        logger.warning("ADMM stopped at max_iter=%d without reaching eps=%g", cfg.max_iter, cfg.eps)

    objective: float = float(sum(subproblems[z].program.objective(x) for z, x in sorted(solutions.items())))
    return AdmmResult(
        solutions=dict(sorted(solutions.items())),
        trace=trace,
        iterations=iteration,
        converged=converged,
        wall_time=time.perf_counter() - started,
        states=states,
        strategy=cfg.strategy,
        objective=objective,
        multipliers=history,
    )


def run(
    subproblems: Mapping[int, 'ZoneSubproblem'],
    cfg: Optional[AdmmConfig] = None,
    x_ref: Optional[Mapping[str, np.ndarray]] = None,
    config: Optional[Dict] = None
) -> AdmmResult:
    """
    Run scaled consensus ADMM over a set of zone subproblems.

    Per iteration: every zone minimises its objective plus rho/2 ||X_a - X_K + u_a||^2 (thread pool),
    the copies are averaged into X_K, residuals are measured, the penalty strategy updates rho and
    omega, and each scaled dual becomes omega * (u + X_a - X_K). The run stops when r <= eps and
    d <= eps on every branch, or after max_iter iterations (converged = False).

    Arguments:
        subproblems (Mapping[int, ZoneSubproblem]): Anything with `program` and `boundary` per zone.
        cfg (Optional[AdmmConfig]): ADMM settings.
        x_ref (Optional[Mapping[str, np.ndarray]]): Initial reference per boundary key (zeros when missing).
        config (Optional[Dict]): 'threads' plus kernel options.

    Returns:
        AdmmResult: Solutions, trace and final states.

    Raises:
        ConfigurationError: If a boundary key is not shared by exactly two zones.
        SubproblemError: If a zone solve fails, with zone and iteration context.
    """
    cfg = cfg or AdmmConfig()
    logger.debug("ADMM start: %d zone(s), strategy %s, rho0 %g", len(subproblems), cfg.strategy, cfg.rho0)
    result: AdmmResult = _iterate(subproblems, cfg, x_ref, config, scaled=True)
    logger.debug("ADMM finished after %d iteration(s), converged=%s", result.iterations, result.converged)
    return result


def unscaled_reference_run(
    subproblems: Mapping[int, 'ZoneSubproblem'],
    cfg: Optional[AdmmConfig] = None,
    x_ref: Optional[Mapping[str, np.ndarray]] = None,
    config: Optional[Dict] = None
) -> AdmmResult:
    """
    Run the same iteration on unscaled multipliers.

    Each zone minimises its objective plus lambda'(X_a - X_K) + rho/2 ||X_a - X_K||^2 and the multiplier
    update is lambda + rho (X_a - X_K) with the rho in force during the iteration. Used to check that
    the scaled run carries rho * u continuously across penalty changes.

    Arguments:
        subproblems (Mapping[int, ZoneSubproblem]): Zone subproblems.
        cfg (Optional[AdmmConfig]): ADMM settings.
        x_ref (Optional[Mapping[str, np.ndarray]]): Initial reference per boundary key.
        config (Optional[Dict]): 'threads' plus kernel options.

    Returns:
        AdmmResult: As for run, with multipliers holding lambda directly.
    """
    return _iterate(subproblems, cfg or AdmmConfig(), x_ref, config, scaled=False)
