"""
This module writes results to disk.

Every table is a pandas DataFrame written as CSV with a header row; the run summary is JSON.

Functions:
- hourly_frame / partitions_frame / tie_lines_frame / pv_reactive_frame / schedule_frame / trace_frame: Result tables.
- pf_frames: Per-bus and per-branch tables of a power-flow solution.
- write_results: Every results CSV of a run plus summary.json.
- summary: The summary document of a run.
- save_pf_csv: A power-flow solution as two CSV files.
- save_partition_csv: Partitions as a CSV file.
- emit_plots: The plot-data files.

Example usage:
    from .outputs import emit_plots, write_results

    write_results(report, 'results')
    emit_plots(report, 'results', benchmark)
"""

from pathlib import Path
from typing import Any, Dict, List, Mapping, Optional, Sequence, Tuple, Union

import json
import logging
import os

import pandas as pd

from .admm import AdmmResult
from .constants import LOG_FLOOR, RESULTS_SCHEMA_VERSION
from .dispatch import MgSchedule, hourly_costs
from .network import Network
from .pipeline import BenchmarkReport, RunReport
from .powerflow import PfSolution
from .zoning import ZonePartition

logger: logging.Logger = logging.getLogger(__name__)

PathLike = Union[str, os.PathLike]

PLOT_FILES: Tuple[str, ...] = (
    'plot_sensitivity.csv',
    'plot_losses_voltage.csv',
    'plot_pv_reactive.csv',
    'plot_tie_lines.csv',
    'plot_mg_schedules.csv',
    'plot_iterations.csv',
    'plot_residuals.csv',
)

TRACE_COLUMNS: List[str] = ['hour', 'iteration', 'zone', 'branch', 'r', 'd', 'rho']
SCHEDULE_COLUMNS: List[str] = [
    'hour', 'p_mt', 'p_de', 'p_bess', 'p_bess_dis', 'p_bess_ch', 'soc', 'p_pcc', 'c_mt_op', 'c_mt_fu', 'c_de_op', 'c_de_fu', 'c_bess', 'cost'
]


def _write(frame: pd.DataFrame, path: Path) -> Path:
    """Write one CSV file."""
    path.parent.mkdir(parents=True, exist_ok=True)
    frame.to_csv(path, index=False)
    logger.debug("Wrote %s (%d row(s))", path, len(frame))
    return path


def hourly_frame(report: RunReport) -> pd.DataFrame:
    """One row per hour: partition, ADMM outcome and before / after network figures."""
    return pd.DataFrame(
        [
            {
                'hour': h.hour,
                'partition': h.partition_id,
                'zones': len(h.zones.zones),
                'iterations': h.admm.iterations,
                'converged': h.admm.converged,
                'losses_before_kw': h.base_pf.losses,
                'losses_after_kw': h.opt_pf.losses,
                'mean_dv_before': h.base_pf.mean_voltage_deviation,
                'mean_dv_after': h.opt_pf.mean_voltage_deviation,
                'min_v_before': h.base_pf.min_voltage,
                'min_v_after': h.opt_pf.min_voltage,
                'min_satisfaction': min(h.satisfaction.values()) if h.satisfaction else float('nan'),
                'max_voltage_violation': h.max_voltage_violation,
            }
            for h in report.hours
        ],
        columns=[
            'hour', 'partition', 'zones', 'iterations', 'converged', 'losses_before_kw', 'losses_after_kw',
            'mean_dv_before', 'mean_dv_after', 'min_v_before', 'min_v_after', 'min_satisfaction', 'max_voltage_violation'
        ],
    )


def partitions_frame(partitions: Mapping[int, ZonePartition]) -> pd.DataFrame:
    """One row per hour and bus with its zone."""
    rows: List[Dict[str, Any]] = [
        {'hour': hour, 'bus': bus_id, 'zone': zone}
        for hour, zones in sorted(partitions.items())
        for bus_id, zone in sorted(zones.assignment.items())
    ]
    return pd.DataFrame(rows, columns=['hour', 'bus', 'zone'])


def tie_lines_frame(report: RunReport) -> pd.DataFrame:
    """One row per hour and microgrid with its tie-line powers (positive = MG imports)."""
    rows: List[Dict[str, Any]] = [
        {'hour': h.hour, 'mg': report.mg_names.get(bus_id, str(bus_id)), 'bus': bus_id, 'p_pcc_kw': p, 'q_pcc_kvar': h.setpoints.q_pcc.get(bus_id, 0.0)}
        for h in report.hours
        for bus_id, p in h.setpoints.p_pcc.items()
    ]
    return pd.DataFrame(rows, columns=['hour', 'mg', 'bus', 'p_pcc_kw', 'q_pcc_kvar'])


def pv_reactive_frame(report: RunReport) -> pd.DataFrame:
    """One row per hour and PV unit with its reactive set-point."""
    rows: List[Dict[str, Any]] = [
        {'hour': h.hour, 'bus': bus_id, 'q_pv_kvar': q}
        for h in report.hours
        for bus_id, q in h.setpoints.q_pv.items()
    ]
    return pd.DataFrame(rows, columns=['hour', 'bus', 'q_pv_kvar'])


def schedule_frame(schedule: MgSchedule, report: RunReport) -> pd.DataFrame:
    """One row per hour of a microgrid schedule with its hourly costs."""
    scenario = report.scenario
    costs = hourly_costs(schedule, scenario.mg_configs[schedule.name], scenario.gas_price, scenario.delta_t) if scenario is not None else []
    rows: List[Dict[str, Any]] = []
    for t in range(len(schedule.p_mt)):
        row: Dict[str, Any] = {
            'hour': t,
            'p_mt': schedule.p_mt[t],
            'p_de': schedule.p_de[t],
            'p_bess': schedule.p_bess[t],
            'p_bess_dis': schedule.p_bess_dis[t],
            'p_bess_ch': schedule.p_bess_ch[t],
            'soc': schedule.soc[t],
            'p_pcc': schedule.p_pcc[t],
        }
        if costs:
            row.update({'c_mt_op': costs[t].c_mt_op, 'c_mt_fu': costs[t].c_mt_fu, 'c_de_op': costs[t].c_de_op,
                        'c_de_fu': costs[t].c_de_fu, 'c_bess': costs[t].c_bess, 'cost': costs[t].total})
        rows.append(row)
    return pd.DataFrame(rows, columns=SCHEDULE_COLUMNS)


def trace_frame(results: Mapping[int, AdmmResult]) -> pd.DataFrame:
    """One row per hour, iteration, zone and branch of ADMM residuals."""
    rows: List[Dict[str, Any]] = [
        {'hour': hour, 'iteration': row.iteration, 'zone': row.zone, 'branch': row.branch, 'r': row.r, 'd': row.d, 'rho': row.rho}
        for hour, result in sorted(results.items())
        for row in result.trace.rows
    ]
    return pd.DataFrame(rows, columns=TRACE_COLUMNS)


def pf_frames(solution: PfSolution, net: Network) -> Tuple[pd.DataFrame, pd.DataFrame]:
    """
    Return the per-bus and per-branch tables of a power-flow solution.

    Arguments:
        solution (PfSolution): The solution.
        net (Network): The network it belongs to.

    Returns:
        Tuple[pd.DataFrame, pd.DataFrame]: Buses (bus, v, delta) and branches (from, to, p_kw, q_kvar).
    """
    buses: pd.DataFrame = pd.DataFrame({'bus': list(solution.bus_ids), 'v': solution.v, 'delta': solution.delta})
    branches: pd.DataFrame = pd.DataFrame({
        'from': [b.from_bus for b in net.branches],
        'to': [b.to_bus for b in net.branches],
        'p_kw': solution.branch_flows[:, 0],
        'q_kvar': solution.branch_flows[:, 1],
    })
    return buses, branches


def save_pf_csv(solution: PfSolution, net: Network, out_dir: PathLike, stem: str = 'pf') -> List[Path]:
    """
    Write a power-flow solution as <stem>_buses.csv and <stem>_branches.csv.

    Arguments:
        solution (PfSolution): The solution.
        net (Network): The network.
        out_dir (PathLike): Output directory.
        stem (str): File name prefix.

    Returns:
        List[Path]: The files written.
    """
    buses, branches = pf_frames(solution, net)
    return [_write(buses, Path(out_dir) / f"{stem}_buses.csv"), _write(branches, Path(out_dir) / f"{stem}_branches.csv")]


def save_partition_csv(partitions: Mapping[int, ZonePartition], out_dir: PathLike) -> Path:
    """Write partitions.csv."""
    return _write(partitions_frame(partitions), Path(out_dir) / 'partitions.csv')


def summary(report: RunReport) -> Dict[str, Any]:
    """
    Build the summary document of a run.

    Arguments:
        report (RunReport): The report.

    Returns:
        Dict[str, Any]: Schema version, settings, totals and peak-hour figures.
    """
    peak = report.peak_hour()
    doc: Dict[str, Any] = {
        'schema_version': RESULTS_SCHEMA_VERSION,
        'settings': {k: v for k, v in report.settings.items() if isinstance(v, (str, int, float, bool))},
        'hours': len(report.hours),
        'converged': report.converged,
        'converged_hours': sum(1 for h in report.hours if h.admm.converged),
        'admm_iterations': sum(h.admm.iterations for h in report.hours),
        'distinct_partitions': len(report.distinct_partitions),
        'max_voltage_violation': max((h.max_voltage_violation for h in report.hours), default=0.0),
        'voltage_violation_hours': [h.hour for h in report.hours if h.voltage_violations],
        'losses_before_kwh': report.losses_before,
        'losses_after_kwh': report.losses_after,
        'loss_reduction_pct': report.loss_reduction_pct,
        'mean_dv_before': report.deviation_before,
        'mean_dv_after': report.deviation_after,
        'deviation_reduction_pct': 0.0 if report.deviation_before == 0 else 100.0 * (report.deviation_before - report.deviation_after) / report.deviation_before,
        'mg_costs': {name: s.costs.total for name, s in report.schedules.items() if s.costs is not None},
        'total_mg_cost': report.total_cost,
        'wall_time_s': report.wall_time,
    }
    if peak is not None:
        doc['peak_hour'] = {
            'hour': peak.hour,
            'losses_before_kw': peak.base_pf.losses,
            'losses_after_kw': peak.opt_pf.losses,
            'min_v_before': peak.base_pf.min_voltage,
            'min_v_after': peak.opt_pf.min_voltage,
        }
    return doc


def write_results(report: RunReport, out_dir: PathLike) -> List[Path]:
    """
    Write every results file of a run.

    Files: hourly.csv, partitions.csv, tie_lines.csv, pv_reactive.csv, admm_trace.csv, one mg_<name>.csv
    per scheduled microgrid and summary.json.

    Arguments:
        report (RunReport): The report.
        out_dir (PathLike): Output directory (created when missing).

    Returns:
        List[Path]: The files written.
    """
    out: Path = Path(out_dir)
    written: List[Path] = [
        _write(hourly_frame(report), out / 'hourly.csv'),
        save_partition_csv({h.hour: h.zones for h in report.hours}, out),
        _write(tie_lines_frame(report), out / 'tie_lines.csv'),
        _write(pv_reactive_frame(report), out / 'pv_reactive.csv'),
        _write(trace_frame({h.hour: h.admm for h in report.hours}), out / 'admm_trace.csv'),
    ]
    for name, schedule in report.schedules.items():
        written.append(_write(schedule_frame(schedule, report), out / f"mg_{name}.csv"))

    path: Path = out / 'summary.json'
    path.write_text(json.dumps(summary(report), indent=2, sort_keys=True), encoding='UTF-8')
    written.append(path)
    logger.info("Wrote %d result file(s) to %s", len(written), out)
    return written


def _floored(frame: pd.DataFrame, columns: Sequence[str]) -> pd.DataFrame:
    """Floor nonpositive residuals for log plotting and flag them."""
    frame = frame.copy()
    total: int = 0
    for column in columns:
        low = frame[column] < LOG_FLOOR
        frame[f"{column}_floored"] = low
        frame.loc[low, column] = LOG_FLOOR
        total += int(low.sum())
    if total:
        logger.warning("Floored %d residual value(s) at %g for log plotting", total, LOG_FLOOR)
    return frame


def emit_plots(report: RunReport, out_dir: PathLike, benchmark: Optional[BenchmarkReport] = None) -> List[Path]:
    """
    Write the plot-data files.

    Files are always written; a file with nothing to show holds only its header row. Residuals are
    floored at 1e-16 so they can be drawn on a log scale, with a flag column per floored value.

    Arguments:
        report (RunReport): The run.
        out_dir (PathLike): Output directory.
        benchmark (Optional[BenchmarkReport]): Penalty-strategy runs; the run's own ADMM results are used when None.

    Returns:
        List[Path]: The files written, in PLOT_FILES order.
    """
    out: Path = Path(out_dir)

    sens_rows: List[Dict[str, Any]] = [
        {'hour': h.hour, 'bus': bus_id, 'mg_bus': mg_bus, 'dv_dp': h.sensitivity.dv_dp[i, j], 'dv_dq': h.sensitivity.dv_dq[i, j]}
        for h in report.hours if h.sensitivity is not None
        for i, bus_id in enumerate(h.sensitivity.buses)
        for j, mg_bus in enumerate(h.sensitivity.mg_buses)
    ]
    sensitivity: pd.DataFrame = pd.DataFrame(sens_rows, columns=['hour', 'bus', 'mg_bus', 'dv_dp', 'dv_dq'])

    losses: pd.DataFrame = hourly_frame(report)[['hour', 'losses_before_kw', 'losses_after_kw', 'mean_dv_before', 'mean_dv_after']]

    schedules: List[pd.DataFrame] = [schedule_frame(s, report).assign(mg=name) for name, s in report.schedules.items()]
    mg_columns: List[str] = ['mg', 'hour', 'p_mt', 'p_de', 'p_bess', 'soc', 'p_pcc']
    mg_schedules: pd.DataFrame = pd.concat(schedules, ignore_index=True)[mg_columns] if schedules else pd.DataFrame(columns=mg_columns)

    runs: Dict[str, Dict[int, AdmmResult]] = benchmark.runs if benchmark is not None else {
        str(report.settings.get('strategy', 'run')): {h.hour: h.admm for h in report.hours}
    }
    iterations: pd.DataFrame = pd.DataFrame(
        [
            {'strategy': strategy, 'hour': hour, 'iterations': r.iterations, 'converged': r.converged}
            for strategy, by_hour in runs.items()
            for hour, r in sorted(by_hour.items())
        ],
        columns=['strategy', 'hour', 'iterations', 'converged'],
    )
    residual_rows: List[Dict[str, Any]] = [
        {'strategy': strategy, 'hour': hour, 'iteration': it, 'r': r, 'd': d}
        for strategy, by_hour in runs.items()
        for hour, result in sorted(by_hour.items())
        for it, r, d in result.trace.max_residuals()
    ]
    residuals: pd.DataFrame = _floored(pd.DataFrame(residual_rows, columns=['strategy', 'hour', 'iteration', 'r', 'd']), ['r', 'd'])

    frames: Tuple[pd.DataFrame, ...] = (
        sensitivity, losses, pv_reactive_frame(report), tie_lines_frame(report), mg_schedules, iterations, residuals
    )
    return [_write(frame, out / name) for frame, name in zip(frames, PLOT_FILES)]
