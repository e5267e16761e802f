"""
This module provides the zonal-dispatch command line interface.

Verbs:
- run: The full pipeline; writes the results CSVs and summary.json.
- partition: Hourly partitions only; writes partitions.csv.
- pf: The base-case AC power flow of one hour; writes pf_buses.csv and pf_branches.csv.
- compare-centralized: ADMM against the centralized program for one hour.
- benchmark-penalty: ADMM iteration counts of every penalty strategy; writes benchmark.csv.
- emit-plots: The full pipeline plus the benchmark; writes results and plot-data files.

Exit codes: 0 success, 2 invalid input or configuration, 3 infeasible problem, 4 non-convergence.

Example usage:
    zonal-dispatch run --out results --strategy improved
    zonal-dispatch pf --hour 12 -v
"""

from pathlib import Path
from typing import Any, Callable, Dict, List, Optional, Sequence, Tuple

import argparse
import logging
import sys

import numpy as np
import pandas as pd

from .cases import ieee33_scenario
from .constants import EXIT_NON_CONVERGENCE, EXIT_OK, PENALTY_STRATEGIES
from .exceptions import ConfigurationError, ZonalDispatchError
from .network import Network
from .outputs import emit_plots, save_partition_csv, save_pf_csv, write_results
from .pipeline import BenchmarkReport, ComparisonReport, RunReport, benchmark_penalty, compare_centralized, run, settings
from .powerflow import PfSolution, bus_injections, sensitivity, solve_pf
from .scenario import ScenarioConfig, load_scenario
from .zoning import ZonePartition, partition, single_zone

logger: logging.Logger = logging.getLogger(__name__)


def build_parser() -> argparse.ArgumentParser:
    """
    Build the argument parser.

    Returns:
        argparse.ArgumentParser: The parser with one sub-command per verb.
    """
    common: argparse.ArgumentParser = argparse.ArgumentParser(add_help=False)
    common.add_argument('--scenario', help='Scenario JSON file (default: the bundled IEEE 33-bus case)')
    common.add_argument('--out', default='results', help='Output directory (default: results)')
    common.add_argument('--hour', type=int, action='append', help='Hour to process (repeatable; default: all, or the peak-load hour for single-hour verbs)')
    common.add_argument('--strategy', choices=PENALTY_STRATEGIES, help='ADMM penalty strategy')
    common.add_argument('--sigma', type=int, help='Consecutive judgments before the improved strategy changes rho')
    common.add_argument('--rho0', type=float, help='Initial ADMM penalty')
    common.add_argument('--eps', type=float, help='ADMM convergence accuracy')
    common.add_argument('--max-iter', dest='max_iter', type=int, help='ADMM iteration cap')
    common.add_argument('--threads', type=int, help='Worker threads')
    common.add_argument('-v', '--verbose', action='count', default=0, help='INFO with -v, DEBUG with -vv')

    parser: argparse.ArgumentParser = argparse.ArgumentParser(
        prog='zonal-dispatch',
        description='Bi-level zonal optimisation of a distribution network with microgrids.',
    )
    verbs = parser.add_subparsers(dest='verb', required=True)
    verbs.add_parser('run', parents=[common], help='Run the full pipeline')
    verbs.add_parser('partition', parents=[common], help='Compute hourly partitions')
    verbs.add_parser('pf', parents=[common], help='Base-case AC power flow')
    verbs.add_parser('compare-centralized', parents=[common], help='Compare ADMM with the centralized solution')
    verbs.add_parser('benchmark-penalty', parents=[common], help='Compare penalty strategies')
    plots = verbs.add_parser('emit-plots', parents=[common], help='Run, benchmark and write plot data')
    plots.add_argument('--no-benchmark', dest='benchmark', action='store_false', help='Skip the penalty benchmark')
    return parser


def _configure_logging(verbosity: int) -> None:
    """Set the root log level from the -v count."""
    level: int = logging.WARNING if verbosity <= 0 else (logging.INFO if verbosity == 1 else logging.DEBUG)
    logging.basicConfig(level=level, format='%(asctime)s %(levelname)s %(name)s: %(message)s')


def _overrides(args: argparse.Namespace) -> Dict[str, Any]:
    """Collect the option flags that were given."""
    keys: Tuple[str, ...] = ('strategy', 'sigma', 'rho0', 'eps', 'max_iter', 'threads')
    return {k: getattr(args, k) for k in keys if getattr(args, k, None) is not None}


def _load(args: argparse.Namespace) -> Tuple[Network, ScenarioConfig]:
    """Load the requested scenario or the bundled case."""
    if args.scenario:
        return load_scenario(args.scenario)
    return ieee33_scenario()


def _peak_hour(net: Network) -> int:
    """The hour with the largest total active load."""
    return int(np.argmax([float(np.sum(net.load_kw(t)[0])) for t in range(net.horizon)]))


def _requested_hours(args: argparse.Namespace, net: Network) -> List[int]:
    """The --hour values, checked against the horizon; every hour when none was given."""
    hours: List[int] = list(args.hour) if args.hour else list(range(net.horizon))
    for hour in hours:
        if not 0 <= hour < net.horizon:
            raise ConfigurationError(f"hour {hour} is outside 0..{net.horizon - 1}")
    return hours


def _single_hour(args: argparse.Namespace, net: Network) -> int:
    """The one hour a single-hour verb works on."""
    return _requested_hours(args, net)[0] if args.hour else _peak_hour(net)


def _cmd_run(args: argparse.Namespace, net: Network, scenario: ScenarioConfig) -> int:
    report: RunReport = run(net, scenario, _overrides(args), args.hour)
    write_results(report, args.out)
    print(f"losses {report.losses_before:.1f} -> {report.losses_after:.1f} kWh ({report.loss_reduction_pct:.2f}% reduction)")
    print(f"mean |dV| {report.deviation_before:.5f} -> {report.deviation_after:.5f} p.u.; MG cost {report.total_cost:.2f} $")
    return EXIT_OK if report.converged else EXIT_NON_CONVERGENCE


def _cmd_partition(args: argparse.Namespace, net: Network, scenario: ScenarioConfig) -> int:
    options: Dict[str, Any] = settings(scenario, _overrides(args))
    partitions: Dict[int, ZonePartition] = {}
    for hour in _requested_hours(args, net):
        if net.mg_buses:
            partitions[hour] = partition(sensitivity(net, solve_pf(net, bus_injections(net, hour), options)), net)
        else:
            partitions[hour] = single_zone(net)
        zones: ZonePartition = partitions[hour]
        print(f"hour {hour:2d}: " + '  '.join(f"zone {z}: {zones.zone_buses(z)}" for z in zones.zones))
    save_partition_csv(partitions, args.out)
    return EXIT_OK


def _cmd_pf(args: argparse.Namespace, net: Network, scenario: ScenarioConfig) -> int:
    hour: int = _single_hour(args, net)
    solution: PfSolution = solve_pf(net, bus_injections(net, hour), settings(scenario, _overrides(args)))
    save_pf_csv(solution, net, args.out)
    print(f"hour {hour}: losses {solution.losses:.2f} kW, min V {solution.min_voltage:.4f} p.u. after {solution.iterations} iteration(s)")
    return EXIT_OK


def _cmd_compare(args: argparse.Namespace, net: Network, scenario: ScenarioConfig) -> int:
    report: ComparisonReport = compare_centralized(net, scenario, _single_hour(args, net), _overrides(args))
    print(f"hour {report.hour}: distributed {report.distributed_objective:.6f}, centralized {report.centralized_objective:.6f}")
    print(f"relative gap {report.relative_gap:.3e}, max voltage difference {report.max_voltage_deviation:.3e} p.u.")
    return EXIT_OK if report.converged else EXIT_NON_CONVERGENCE


def _benchmark_frame(bench: BenchmarkReport) -> pd.DataFrame:
    """One row per strategy and hour."""
    return pd.DataFrame(
        [
            {'strategy': s, 'hour': h, 'iterations': r.iterations, 'converged': r.converged, 'wall_time_s': r.wall_time}
            for s, by_hour in bench.runs.items() for h, r in sorted(by_hour.items())
        ],
        columns=['strategy', 'hour', 'iterations', 'converged', 'wall_time_s'],
    )


def _cmd_benchmark(args: argparse.Namespace, net: Network, scenario: ScenarioConfig) -> int:
    bench: BenchmarkReport = benchmark_penalty(net, scenario, _overrides(args), args.hour)
    frame: pd.DataFrame = _benchmark_frame(bench)
    Path(args.out).mkdir(parents=True, exist_ok=True)
    frame.to_csv(Path(args.out) / 'benchmark.csv', index=False)
    for strategy in bench.runs:
        print(f"{strategy:9s} median {bench.median(strategy):6.1f}  total {bench.total(strategy):6d}")
    if 'adaptive' in bench.runs and 'improved' in bench.runs:
        print(f"improved vs adaptive: {bench.reduction_pct():.1f}% fewer iterations")
    return EXIT_OK if bool(frame['converged'].all()) else EXIT_NON_CONVERGENCE


def _cmd_emit_plots(args: argparse.Namespace, net: Network, scenario: ScenarioConfig) -> int:
    overrides: Dict[str, Any] = _overrides(args)
    report: RunReport = run(net, scenario, overrides, args.hour)
    bench: Optional[BenchmarkReport] = benchmark_penalty(net, scenario, overrides, args.hour) if args.benchmark else None
    write_results(report, args.out)
    emit_plots(report, args.out, bench)
    return EXIT_OK if report.converged else EXIT_NON_CONVERGENCE


COMMANDS: Dict[str, Callable[[argparse.Namespace, Network, ScenarioConfig], int]] = {
    'run': _cmd_run,
    'partition': _cmd_partition,
    'pf': _cmd_pf,
    'compare-centralized': _cmd_compare,
    'benchmark-penalty': _cmd_benchmark,
    'emit-plots': _cmd_emit_plots,
}


def main(argv: Optional[Sequence[str]] = None) -> int:
    """
    Run the command line interface.

    Arguments:
        argv (Optional[Sequence[str]]): Arguments without the program name; sys.argv when None.

    Returns:
        int: The exit code.
    """
    args: argparse.Namespace = build_parser().parse_args(argv)
    _configure_logging(args.verbose)
    try:
        net, scenario = _load(args)
        return COMMANDS[args.verb](args, net, scenario)
    except ZonalDispatchError as e:
        logger.error("%s", e)
        print(f"error: {e}", file=sys.stderr)
        return e.exit_code


if __name__ == '__main__':
    sys.exit(main())
