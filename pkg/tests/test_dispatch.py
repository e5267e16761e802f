"""
This test module covers the microgrid schedule program.

Functions:
- test_two_hour_schedule: The microturbine ramps as fast as allowed and the battery fills the gap.
- test_soc_update: A full-power discharge lowers the SOC by P dt / (eta E).
- test_evaluate_cost: Component costs of a hand-made schedule.
- test_infeasible_schedule: An unreachable tie-line schedule names the hour.
- test_length_mismatch: Price series must cover the schedule.
- test_hourly_costs_add_up: Per-hour breakdowns sum to the total.
- test_battery_never_charges_and_discharges_at_once: Burning surplus by cycling the battery is refused.
- test_schedules_balance: Feasible tie-line schedules balance and respect SOC, ramps and one-way battery flow.

Dependencies:
- pytest / hypothesis: Used for writing and running tests.
- numpy: Used for array comparisons.
- wolfsoftware.zonal_dispatch.dispatch: The module being tested.
"""

from typing import List, Sequence

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from wolfsoftware.zonal_dispatch import ConfigurationError, DispatchInfeasibleError
from wolfsoftware.zonal_dispatch.dispatch import CostBreakdown, DispatchProgram, MgSchedule, build_dispatch, evaluate_cost, hourly_costs, solve_dispatch
from wolfsoftware.zonal_dispatch.scenario import BessConfig, DeConfig, MgConfig, MtConfig

NO_DE: DeConfig = DeConfig(p_min=0.0, p_max=0.0, p_init=0.0, gamma=0.0, p_norm=300.0)


def _mg(load: Sequence[float], **devices) -> MgConfig:
    """A microgrid with a flat load and no renewables."""
    zeros = tuple(0.0 for _ in load)
    return MgConfig(name='MG1', load=tuple(load), pv=zeros, wind=zeros, **devices)


def test_two_hour_schedule() -> None:
    """MT rises 10 -> 130 -> 200 while the battery covers 70 kW in the first hour."""
    cfg: MgConfig = _mg([200.0, 200.0], mt=MtConfig(p_init=10.0, ramp_up=120.0), de=NO_DE)

    schedule: MgSchedule = solve_dispatch(build_dispatch(cfg, [0.0, 0.0], [0.01, 0.01]))

    np.testing.assert_allclose(schedule.p_mt, [130.0, 200.0], atol=1e-3)
    np.testing.assert_allclose(schedule.p_bess_dis, [70.0, 0.0], atol=1e-3)
    np.testing.assert_allclose(schedule.p_bess_ch, [0.0, 0.0], atol=1e-3)
    np.testing.assert_allclose(schedule.p_de, [0.0, 0.0], atol=1e-9)
    assert schedule.costs is not None  # nosec: B101
    assert schedule.costs.total == pytest.approx(0.0160364 * 330.0 + 0.123 * 70.0, abs=1e-3)  # nosec: B101
    assert schedule.objective == pytest.approx(schedule.costs.total, abs=1e-3)  # nosec: B101


def test_soc_update() -> None:
    """Discharging 120 kW for an hour from a half-full 800 kWh battery leaves 0.336957."""
    cfg: MgConfig = _mg(
        [120.0],
        mt=MtConfig(p_min=0.0, p_max=0.0, p_init=0.0),
        de=NO_DE,
        bess=BessConfig(capacity=800.0, p_max=120.0),
    )

    schedule: MgSchedule = solve_dispatch(build_dispatch(cfg, [0.0], [0.3]))

    assert schedule.p_bess_dis[0] == pytest.approx(120.0, abs=1e-4)  # nosec: B101
    assert schedule.soc[0] == pytest.approx(0.336957, abs=1e-6)  # nosec: B101


def test_evaluate_cost() -> None:
    """100 kW of MT costs 1.26 $ to operate; 100 kW of battery throughput costs 12.3 $."""
    cfg: MgConfig = _mg([200.0], de=NO_DE)
    schedule: MgSchedule = MgSchedule(
        name='MG1',
        p_mt=np.array([100.0]),
        p_de=np.array([0.0]),
        p_bess_dis=np.array([100.0]),
        p_bess_ch=np.array([0.0]),
        soc=np.array([0.28]),
        p_pcc=np.array([0.0]),
    )

    costs: CostBreakdown = evaluate_cost(schedule, cfg, [0.0])

    assert costs.c_mt_op == pytest.approx(1.26)  # nosec: B101
    assert costs.c_mt_fu == pytest.approx(0.0)  # nosec: B101
    assert costs.c_bess == pytest.approx(12.3)  # nosec: B101
    assert np.all(schedule.balance_residual(cfg) == 0.0)  # nosec: B101


def test_infeasible_schedule() -> None:
    """With every device held at zero a 200 kW demand cannot be met in hour 0."""
    cfg: MgConfig = _mg(
        [200.0, 200.0],
        mt=MtConfig(p_min=0.0, p_max=0.0, p_init=0.0),
        de=NO_DE,
        bess=BessConfig(p_max=0.0),
    )

    with pytest.raises(DispatchInfeasibleError) as info:
        solve_dispatch(build_dispatch(cfg, [0.0, 0.0], [0.3, 0.3]))

    assert info.value.hour == 0  # nosec: B101
    assert info.value.exit_code == 3  # nosec: B101


def test_length_mismatch() -> None:
    """Gas prices must cover the tie-line schedule."""
    with pytest.raises(ConfigurationError):
        build_dispatch(_mg([200.0, 200.0]), [0.0, 0.0], [0.3])


def test_hourly_costs_add_up() -> None:
    """The per-hour breakdowns add up to the schedule's total."""
    cfg: MgConfig = _mg([150.0, 250.0, 180.0])
    gas: List[float] = [0.3, 0.35, 0.3]
    schedule: MgSchedule = solve_dispatch(build_dispatch(cfg, [0.0, 20.0, -10.0], gas))

    per_hour: List[CostBreakdown] = hourly_costs(schedule, cfg, gas)

    assert len(per_hour) == 3  # nosec: B101
    assert sum(c.total for c in per_hour) == pytest.approx(schedule.costs.total)  # nosec: B101


def test_battery_never_charges_and_discharges_at_once() -> None:
    """A small battery that can only absorb surplus by cycling makes the schedule infeasible."""
    cfg: MgConfig = _mg([50.0] * 24, bess=BessConfig(capacity=100.0))

    with pytest.raises(DispatchInfeasibleError) as info:
        solve_dispatch(build_dispatch(cfg, [37.0] * 24, [0.3] * 24))

    assert info.value.hour is not None  # nosec: B101
    assert info.value.exit_code == 3  # nosec: B101


@settings(max_examples=200, deadline=None)
@given(
    load=st.lists(st.floats(min_value=100.0, max_value=250.0), min_size=4, max_size=4),
    required=st.lists(st.floats(min_value=15.0, max_value=250.0), min_size=4, max_size=4),
    gas=st.floats(min_value=0.1, max_value=0.5),
)
def test_schedules_balance(load: List[float], required: List[float], gas: float) -> None:
    """Every hour balances, the SOC band and ramps hold, the battery flows one way and the objective is the cost."""
    cfg: MgConfig = _mg(load)
    pcc: List[float] = [p - r for p, r in zip(load, required)]
    program: DispatchProgram = build_dispatch(cfg, pcc, [gas] * 4)

    schedule: MgSchedule = solve_dispatch(program)

    assert np.max(np.abs(schedule.balance_residual(cfg))) <= 1e-6  # nosec: B101
    assert np.all(schedule.soc >= cfg.bess.soc_min - 1e-9)  # nosec: B101
    assert np.all(schedule.soc <= cfg.bess.soc_max + 1e-9)  # nosec: B101
    for device, output in ((cfg.mt, schedule.p_mt), (cfg.de, schedule.p_de)):
        steps: np.ndarray = np.diff(np.concatenate([[device.p_init], output]))
        assert np.all(steps <= device.ramp_up + 1e-6)  # nosec: B101
        assert np.all(-steps <= device.ramp_down + 1e-6)  # nosec: B101
    assert np.all(np.minimum(schedule.p_bess_ch, schedule.p_bess_dis) <= 1e-6)  # nosec: B101
    assert schedule.objective == pytest.approx(evaluate_cost(schedule, cfg, [gas] * 4).total, abs=1e-6)  # nosec: B101
