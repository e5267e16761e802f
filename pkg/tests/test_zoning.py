"""
This test module covers the sensitivity partition and its connectivity repair.

Functions:
- test_argmax_partition: Buses join the microgrid they are most sensitive to.
- test_repair_reattaches_cut_off_buses: A zone split in two is repaired through the tree.
- test_partition_is_connected: Every zone of any partition is a connected subnetwork.
- test_partition_ignores_scale: Zones depend on the ranking of sensitivities, not their size.
- test_bundled_partition: The bundled feeder splits into three zones.
- test_single_and_no_mg: Degenerate microgrid counts.
- test_bundled_partitions_change_over_the_day: The 33-bus zones differ between at least two hours of the day.

Dependencies:
- pytest / hypothesis: Used for writing and running tests.
- numpy / networkx: Used for building sensitivities and checking connectivity.
- wolfsoftware.zonal_dispatch.zoning: The module being tested.
"""

from dataclasses import replace
from typing import Dict, List, Tuple

import networkx as nx
import numpy as np
import pytest
from hypothesis import HealthCheck, given, settings, strategies as st
from hypothesis.extra.numpy import arrays

from wolfsoftware.zonal_dispatch import ConfigurationError, Network, ScenarioConfig
from wolfsoftware.zonal_dispatch.network import graph
from wolfsoftware.zonal_dispatch.powerflow import SensitivityMatrix, bus_injections, sensitivity, solve_pf
from wolfsoftware.zonal_dispatch.zoning import ZonePartition, partition

FEEDER_ROWS: Tuple[int, ...] = (2, 3, 4, 5, 6, 7)


def _sens(rows: Dict[int, List[float]]) -> SensitivityMatrix:
    """Build a sensitivity matrix for the feeder's MGA (bus 5) and MGB (bus 7) columns."""
    dv_dp: np.ndarray = np.array([rows[b] for b in FEEDER_ROWS], dtype=float)
    return SensitivityMatrix(buses=FEEDER_ROWS, mg_buses=(5, 7), dv_dp=dv_dp, dv_dq=dv_dp.copy())


def _assert_connected(zones: ZonePartition, net: Network) -> None:
    """Each zone is connected, holds its coupling bus, and the cut is a spanning set of overlaps."""
    g: nx.Graph = graph(net)
    for zone in zones.zones:
        members: List[int] = zones.zone_buses(zone)
        assert nx.is_connected(g.subgraph(members))  # nosec: B101
        assert zones.pcc[zone] in members  # nosec: B101
    assert len(zones.overlaps) == len(zones.zones) - 1  # nosec: B101


def test_argmax_partition(feeder: Tuple[Network, ScenarioConfig]) -> None:
    """Ties go to zone 1 and the slack follows bus 2."""
    net, _ = feeder
    sens: SensitivityMatrix = _sens({2: [1, 1], 3: [2, 1], 4: [3, 1], 5: [5, 1], 6: [1, 2], 7: [1, 5]})

    zones: ZonePartition = partition(sens, net)

    assert zones.assignment == {1: 1, 2: 1, 3: 1, 4: 1, 5: 1, 6: 2, 7: 2}  # nosec: B101
    assert zones.zones == (1, 2)  # nosec: B101
    assert zones.pcc == {1: 5, 2: 7}  # nosec: B101
    assert [o.label for o in zones.overlaps] == ['2-6']  # nosec: B101
    assert (zones.overlaps[0].zone_a, zones.overlaps[0].zone_b) == (1, 2)  # nosec: B101
    assert zones.zone_branches(net, 2) == [5]  # nosec: B101


def test_repair_reattaches_cut_off_buses(feeder: Tuple[Network, ScenarioConfig]) -> None:
    """Bus 3 is cut off from MGB, so bus 2 and then the slack are pulled into zone 2."""
    net, _ = feeder
    sens: SensitivityMatrix = _sens({2: [1, 1], 3: [1, 2], 4: [3, 1], 5: [5, 1], 6: [1, 2], 7: [1, 5]})

    zones: ZonePartition = partition(sens, net)

    assert zones.assignment == {1: 2, 2: 2, 3: 2, 4: 1, 5: 1, 6: 2, 7: 2}  # nosec: B101
    assert len(zones.overlaps) == 1  # nosec: B101
    overlap = zones.overlaps[0]
    assert (overlap.upstream, overlap.downstream) == (3, 4)  # nosec: B101
    assert (overlap.zone_a, overlap.zone_b) == (2, 1)  # nosec: B101
    _assert_connected(zones, net)


@settings(max_examples=50, deadline=None, suppress_health_check=[HealthCheck.function_scoped_fixture])
@given(dv_dp=arrays(np.float64, (6, 2), elements=st.floats(min_value=0.0, max_value=1.0)))
def test_partition_is_connected(feeder: Tuple[Network, ScenarioConfig], dv_dp: np.ndarray) -> None:
    """Whatever the sensitivities, the repaired zones are connected and anchored."""
    net, _ = feeder
    sens: SensitivityMatrix = SensitivityMatrix(buses=FEEDER_ROWS, mg_buses=(5, 7), dv_dp=dv_dp, dv_dq=dv_dp)

    _assert_connected(partition(sens, net), net)


@settings(max_examples=50, deadline=None, suppress_health_check=[HealthCheck.function_scoped_fixture])
@given(
    dv_dp=arrays(np.float64, (6, 2), elements=st.floats(min_value=0.0, max_value=1.0)),
    scale=st.sampled_from([2.0, 8.0, 1024.0]),
)
def test_partition_ignores_scale(feeder: Tuple[Network, ScenarioConfig], dv_dp: np.ndarray, scale: float) -> None:
    """Scaling every sensitivity by the same positive factor leaves the zones unchanged."""
    net, _ = feeder
    original: SensitivityMatrix = SensitivityMatrix(buses=FEEDER_ROWS, mg_buses=(5, 7), dv_dp=dv_dp, dv_dq=dv_dp)
    scaled: SensitivityMatrix = SensitivityMatrix(buses=FEEDER_ROWS, mg_buses=(5, 7), dv_dp=dv_dp * scale, dv_dq=dv_dp * scale)

    assert partition(scaled, net).assignment == partition(original, net).assignment  # nosec: B101


def test_bundled_partition(bundled: Tuple[Network, ScenarioConfig]) -> None:
    """The real sensitivities of the bundled case give three connected zones."""
    net, _ = bundled
    sens: SensitivityMatrix = sensitivity(net, solve_pf(net, bus_injections(net, 19)))

    zones: ZonePartition = partition(sens, net)

    assert zones.zones == (1, 2, 3)  # nosec: B101
    assert zones.pcc == {1: 12, 2: 22, 3: 29}  # nosec: B101
    assert sum(len(zones.zone_buses(z)) for z in zones.zones) == 33  # nosec: B101
    _assert_connected(zones, net)


def test_bundled_partitions_change_over_the_day(bundled: Tuple[Network, ScenarioConfig]) -> None:
    """Hourly PV and load profiles move at least one bus between zones during the day."""
    net, _ = bundled
    keys = set()
    for hour in range(net.horizon):
        zones: ZonePartition = partition(sensitivity(net, solve_pf(net, bus_injections(net, hour))), net)
        _assert_connected(zones, net)
        keys.add(zones.key())

    assert len(keys) >= 2  # nosec: B101


def test_single_and_no_mg(feeder: Tuple[Network, ScenarioConfig]) -> None:
    """One microgrid gives a single zone; none is a configuration error."""
    net, _ = feeder
    buses = tuple(replace(b, kind='pq', mg=None) if b.id == 7 else b for b in net.buses)
    one_mg: Network = replace(net, buses=buses)
    sens: SensitivityMatrix = sensitivity(one_mg, solve_pf(one_mg, bus_injections(one_mg, 0)))

    zones: ZonePartition = partition(sens, one_mg)

    assert zones.zones == (1,) and zones.overlaps == ()  # nosec: B101
    assert zones.pcc == {1: 5}  # nosec: B101

    empty: SensitivityMatrix = SensitivityMatrix(buses=FEEDER_ROWS, mg_buses=(), dv_dp=np.zeros((6, 0)), dv_dq=np.zeros((6, 0)))
    with pytest.raises(ConfigurationError):
        partition(empty, net)
