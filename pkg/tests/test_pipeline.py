"""
This test module covers the end-to-end pipeline.

Functions:
- test_settings_precedence: Caller overrides win over the scenario, which wins over the defaults.
- test_full_run: Both feeder hours converge, losses fall and both microgrids are dispatched.
- test_hour_results: Per-hour partitions, bounds and satisfaction.
- test_partial_run_skips_dispatch: The dispatch needs the whole horizon.
- test_bad_hour: Hours outside the horizon are rejected.
- test_compare_centralized: ADMM matches the centralized program.
- test_benchmark_penalty: Every strategy is run on the same zone problems.
- test_network_without_microgrids: A network with no MG is a single zone.
- test_bundled_penalty_ordering: On the 33-bus case the improved strategy needs the fewest iterations and at least 40 % fewer than adaptive.
- test_bundled_fixed_penalty_converges: The fixed penalty reaches eps on every benchmarked hour.
- test_voltage_violations_reported: Each hour records its voltage band widening and violations.

Dependencies:
- pytest: Used for writing and running tests.
- numpy: Used for array checks.
- wolfsoftware.zonal_dispatch.pipeline: The module being tested.
"""

from dataclasses import replace
from typing import Any, Dict, Tuple

import numpy as np
import pytest

from wolfsoftware.zonal_dispatch import ConfigurationError, Network, RunReport, ScenarioConfig, benchmark_penalty, compare_centralized, run
from wolfsoftware.zonal_dispatch.pipeline import BenchmarkReport, ComparisonReport, HourResult, settings


def test_settings_precedence(feeder: Tuple[Network, ScenarioConfig]) -> None:
    """eps comes from the override, max_iter from the file and rho0 from the defaults."""
    _, scenario = feeder

    options: Dict[str, Any] = settings(scenario, {'eps': 1e-3, 'rho0': None})

    assert options['eps'] == 1e-3  # nosec: B101
    assert options['max_iter'] == 1000  # nosec: B101
    assert options['rho0'] == 250.0  # nosec: B101
    assert settings(scenario)['eps'] == 1e-5  # nosec: B101


def test_full_run(feeder_report: RunReport) -> None:
    """The two-hour feeder run converges, cuts losses and dispatches MGA and MGB."""
    report: RunReport = feeder_report

    assert [h.hour for h in report.hours] == [0, 1]  # nosec: B101
    assert report.converged  # nosec: B101
    assert report.losses_after < report.losses_before  # nosec: B101
    assert report.loss_reduction_pct > 0.0  # nosec: B101
    assert list(report.schedules) == ['MGA', 'MGB']  # nosec: B101
    assert report.mg_names == {5: 'MGA', 7: 'MGB'}  # nosec: B101
    assert report.total_cost > 0.0  # nosec: B101

    schedule = report.schedules['MGA']
    assert list(schedule.p_pcc) == pytest.approx([h.setpoints.p_pcc[5] for h in report.hours])  # nosec: B101
    assert np.max(np.abs(schedule.balance_residual(report.scenario.mg_configs['MGA']))) < 1e-3  # nosec: B101


def test_hour_results(feeder_report: RunReport) -> None:
    """Each hour keeps its partition, bounds and a satisfaction in [0, 1] per zone."""
    hour: HourResult = feeder_report.hours[0]

    assert hour.zones.zones == (1, 2)  # nosec: B101
    assert set(hour.bounds) == {1, 2}  # nosec: B101
    assert all(0.0 <= phi <= 1.0 for phi in hour.satisfaction.values())  # nosec: B101
    assert hour.partition_id.count('|') == 1  # nosec: B101
    assert hour.opt_pf.mismatch <= 1e-8  # nosec: B101
    assert feeder_report.peak_hour() is not None  # nosec: B101
    keys = [p.key() for p in feeder_report.distinct_partitions]
    assert 1 <= len(keys) <= 2 and len(set(keys)) == len(keys)  # nosec: B101


def test_partial_run_skips_dispatch(feeder: Tuple[Network, ScenarioConfig]) -> None:
    """Solving one hour of two leaves the schedules empty."""
    net, scenario = feeder

    report: RunReport = run(net, scenario, {'threads': 1}, hours=[1])

    assert [h.hour for h in report.hours] == [1]  # nosec: B101
    assert report.schedules == {}  # nosec: B101


@pytest.mark.parametrize('hours', [[2], [-1], [0, 5]])
def test_bad_hour(feeder: Tuple[Network, ScenarioConfig], hours: list) -> None:
    """Hours must lie within the horizon."""
    net, scenario = feeder

    with pytest.raises(ConfigurationError):
        run(net, scenario, hours=hours)


def test_compare_centralized(feeder: Tuple[Network, ScenarioConfig]) -> None:
    """The distributed objective is within 1 % of the centralized optimum."""
    net, scenario = feeder

    comparison: ComparisonReport = compare_centralized(net, scenario, 0)

    assert comparison.converged  # nosec: B101
    assert comparison.relative_gap < 1e-2  # nosec: B101
    assert comparison.max_voltage_deviation < 1e-2  # nosec: B101


def test_benchmark_penalty(feeder: Tuple[Network, ScenarioConfig]) -> None:
    """All three strategies solve hour 0 and report their iteration counts."""
    net, scenario = feeder

    report: BenchmarkReport = benchmark_penalty(net, scenario, {'threads': 2}, hours=[0])

    assert set(report.runs) == {'fixed', 'adaptive', 'improved'}  # nosec: B101
    for strategy in report.runs:
        assert report.runs[strategy][0].converged  # nosec: B101
        assert report.runs[strategy][0].strategy == strategy  # nosec: B101
        assert report.total(strategy) == report.iterations(strategy)[0] >= 1  # nosec: B101
    assert isinstance(report.reduction_pct(), float)  # nosec: B101


def test_bundled_penalty_ordering(bundled_benchmark: BenchmarkReport) -> None:
    """median(improved) <= median(adaptive) <= median(fixed), and improved saves at least 40 % of adaptive's iterations."""
    report: BenchmarkReport = bundled_benchmark

    assert report.median('improved') <= report.median('adaptive') <= report.median('fixed')  # nosec: B101
    assert report.reduction_pct() >= 40.0  # nosec: B101


def test_bundled_fixed_penalty_converges(bundled_benchmark: BenchmarkReport) -> None:
    """rho0 = 250 without adaptation brings both residuals under 1e-6 at every hour."""
    for hour, result in bundled_benchmark.runs['fixed'].items():
        assert result.converged, f"hour {hour} stopped after {result.iterations} iterations"  # nosec: B101
        _, r, d = result.trace.max_residuals()[-1]
        assert r <= 1e-6 and d <= 1e-6  # nosec: B101


def test_voltage_violations_reported(feeder_report: RunReport) -> None:
    """The relaxation and the remaining violations are part of every hour's result."""
    for hour in feeder_report.hours:
        assert isinstance(hour.voltage_relaxation, dict)  # nosec: B101
        assert all(value > 0.0 for value in hour.voltage_violations.values())  # nosec: B101
        assert hour.max_voltage_violation == max(hour.voltage_violations.values(), default=0.0)  # nosec: B101


def test_network_without_microgrids(feeder: Tuple[Network, ScenarioConfig]) -> None:
    """Without microgrids only PV reactive power is optimised, in a single zone."""
    net, scenario = feeder
    plain: Network = replace(net, buses=tuple(replace(b, kind='pq', mg=None) if b.kind == 'mg_pcc' else b for b in net.buses))

    report: RunReport = run(plain, scenario, {'threads': 1})

    assert report.converged  # nosec: B101
    assert all(h.zones.zones == (1,) for h in report.hours)  # nosec: B101
    assert report.schedules == {}  # nosec: B101
    assert all(h.setpoints.p_pcc == {} for h in report.hours)  # nosec: B101
