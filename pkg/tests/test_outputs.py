"""
This test module covers the results and plot-data files.

Functions:
- test_write_results: Every results file of a run is written with the expected shape.
- test_summary_totals: The summary repeats the report totals.
- test_emit_plots: All plot-data files exist, residuals included.
- test_floored_residuals: Non-positive residuals are floored and flagged.
- test_save_pf_csv: A power-flow solution becomes two tables.
- test_results_are_reproducible: Two runs of the same scenario write byte-identical CSV files.
- test_voltage_violations_in_outputs: The largest voltage band violation reaches hourly.csv and summary.json.

Dependencies:
- pytest: Used for writing and running tests.
- pandas: Used to read the written files back.
- wolfsoftware.zonal_dispatch.outputs: The module being tested.
"""

from pathlib import Path
from typing import Any, Dict, List, Tuple

import copy
import json

import pandas as pd
import pytest

from wolfsoftware.zonal_dispatch import Network, RunReport, ScenarioConfig, emit_plots, run, write_results
from wolfsoftware.zonal_dispatch.outputs import PLOT_FILES, _floored, save_pf_csv, summary
from wolfsoftware.zonal_dispatch.powerflow import bus_injections, solve_pf
from wolfsoftware.zonal_dispatch.scenario import parse_scenario


def test_write_results(tmp_path: Path, feeder_report: RunReport) -> None:
    """hourly.csv has a row per hour, mg_<name>.csv per microgrid and summary.json a schema version."""
    written: List[Path] = write_results(feeder_report, tmp_path / 'out')

    names = {p.name for p in written}
    assert names == {  # nosec: B101
        'hourly.csv', 'partitions.csv', 'tie_lines.csv', 'pv_reactive.csv', 'admm_trace.csv', 'mg_MGA.csv', 'mg_MGB.csv', 'summary.json'
    }

    hourly: pd.DataFrame = pd.read_csv(tmp_path / 'out' / 'hourly.csv')
    assert list(hourly['hour']) == [0, 1]  # nosec: B101
    assert hourly['converged'].all()  # nosec: B101

    partitions: pd.DataFrame = pd.read_csv(tmp_path / 'out' / 'partitions.csv')
    assert len(partitions) == 2 * 7  # nosec: B101

    tie_lines: pd.DataFrame = pd.read_csv(tmp_path / 'out' / 'tie_lines.csv')
    assert sorted(tie_lines['mg'].unique()) == ['MGA', 'MGB']  # nosec: B101

    schedule: pd.DataFrame = pd.read_csv(tmp_path / 'out' / 'mg_MGA.csv')
    assert len(schedule) == 2 and 'soc' in schedule.columns  # nosec: B101

    doc = json.loads((tmp_path / 'out' / 'summary.json').read_text(encoding='UTF-8'))
    assert doc['schema_version'] == 1  # nosec: B101
    assert doc['hours'] == 2 and doc['converged'] is True  # nosec: B101
    assert set(doc['mg_costs']) == {'MGA', 'MGB'}  # nosec: B101
    assert doc['peak_hour']['hour'] in (0, 1)  # nosec: B101


def test_summary_totals(feeder_report: RunReport) -> None:
    """The summary repeats the report's totals."""
    doc = summary(feeder_report)

    assert doc['losses_before_kwh'] == pytest.approx(feeder_report.losses_before)  # nosec: B101
    assert doc['total_mg_cost'] == pytest.approx(feeder_report.total_cost)  # nosec: B101
    assert doc['admm_iterations'] == sum(h.admm.iterations for h in feeder_report.hours)  # nosec: B101
    assert doc['distinct_partitions'] == len(feeder_report.distinct_partitions)  # nosec: B101


def test_emit_plots(tmp_path: Path, feeder_report: RunReport) -> None:
    """Every plot file is written, in a fixed order."""
    written: List[Path] = emit_plots(feeder_report, tmp_path)

    assert [p.name for p in written] == list(PLOT_FILES)  # nosec: B101
    sensitivity: pd.DataFrame = pd.read_csv(tmp_path / 'plot_sensitivity.csv')
    assert set(sensitivity['mg_bus']) == {5, 7}  # nosec: B101
    residuals: pd.DataFrame = pd.read_csv(tmp_path / 'plot_residuals.csv')
    assert {'r_floored', 'd_floored'} <= set(residuals.columns)  # nosec: B101
    assert (residuals['r'] > 0).all()  # nosec: B101


def test_floored_residuals() -> None:
    """Zero is raised to 1e-16 and flagged; positive values pass through."""
    frame: pd.DataFrame = pd.DataFrame({'r': [0.0, 1e-3], 'd': [2e-4, -1.0]})

    floored: pd.DataFrame = _floored(frame, ['r', 'd'])

    assert list(floored['r']) == [1e-16, 1e-3]  # nosec: B101
    assert list(floored['r_floored']) == [True, False]  # nosec: B101
    assert list(floored['d_floored']) == [False, True]  # nosec: B101
    assert frame['r'][0] == 0.0  # nosec: B101


def test_save_pf_csv(tmp_path: Path, feeder: Tuple[Network, ScenarioConfig]) -> None:
    """The bus table has a row per bus, the branch table a row per branch."""
    net, _ = feeder
    solution = solve_pf(net, bus_injections(net, 0))

    written: List[Path] = save_pf_csv(solution, net, tmp_path, stem='base')

    assert [p.name for p in written] == ['base_buses.csv', 'base_branches.csv']  # nosec: B101
    buses: pd.DataFrame = pd.read_csv(written[0])
    branches: pd.DataFrame = pd.read_csv(written[1])
    assert list(buses['bus']) == [1, 2, 3, 4, 5, 6, 7]  # nosec: B101
    assert buses['v'].iloc[0] == pytest.approx(1.0)  # nosec: B101
    assert len(branches) == 6  # nosec: B101
    assert branches['p_kw'].iloc[0] == pytest.approx(640.0 + solution.losses, abs=1e-2)  # nosec: B101


def test_results_are_reproducible(tmp_path: Path, feeder_doc: Dict[str, Any]) -> None:
    """Everything but the timing in summary.json is a pure function of the scenario."""
    written: List[List[Path]] = []
    for name in ('first', 'second'):
        net, scenario = parse_scenario(copy.deepcopy(feeder_doc))
        written.append(write_results(run(net, scenario, {'threads': 4}), tmp_path / name))

    for first, second in zip(*written):
        assert first.name == second.name  # nosec: B101
        if first.suffix == '.csv':
            assert first.read_bytes() == second.read_bytes(), first.name  # nosec: B101


def test_voltage_violations_in_outputs(tmp_path: Path, feeder_report: RunReport) -> None:
    """hourly.csv carries the per-hour maximum and summary.json the day's maximum and affected hours."""
    write_results(feeder_report, tmp_path)

    hourly: pd.DataFrame = pd.read_csv(tmp_path / 'hourly.csv')
    assert list(hourly['max_voltage_violation']) == pytest.approx([h.max_voltage_violation for h in feeder_report.hours])  # nosec: B101

    doc = json.loads((tmp_path / 'summary.json').read_text(encoding='UTF-8'))
    assert doc['max_voltage_violation'] == pytest.approx(max(h.max_voltage_violation for h in feeder_report.hours))  # nosec: B101
    assert doc['voltage_violation_hours'] == [h.hour for h in feeder_report.hours if h.voltage_violations]  # nosec: B101
