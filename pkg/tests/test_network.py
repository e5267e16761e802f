"""
This test module covers the network model: validation, orientation and unit conversion.

Functions:
- test_bundled_case_is_valid: The bundled case has no violations.
- test_validate_reports_each_violation: Broken networks report one message per problem.
- test_validate_rejects_loops: A meshed network is not radial.
- test_tree_orientation: Branches are oriented away from the slack.
- test_physical_units: Ohm conversion inverts per-unit conversion.
- test_validate_rejects_unknown_bus: A branch to a bus that does not exist is reported.

Dependencies:
- pytest: Used for writing and running tests.
- wolfsoftware.zonal_dispatch.network: The module being tested.
"""

from dataclasses import replace
from typing import List, Tuple

import pytest

from wolfsoftware.zonal_dispatch import Network, ScenarioConfig
from wolfsoftware.zonal_dispatch.network import Branch, Bus, Tree, from_physical, to_physical, tree, validate


def test_bundled_case_is_valid(bundled: Tuple[Network, ScenarioConfig]) -> None:
    """The IEEE 33-bus case has 33 buses, 32 branches, 4 PV units and 3 MG couplings."""
    net, _ = bundled

    assert validate(net) == []  # nosec: B101
    assert len(net.buses) == 33 and len(net.branches) == 32  # nosec: B101
    assert net.pv_buses == (7, 14, 24, 30)  # nosec: B101
    assert net.mg_buses == (12, 22, 29)  # nosec: B101


def test_validate_reports_each_violation(two_bus_net: Network) -> None:
    """Each broken invariant yields its own message and validate never raises."""
    broken: Network = replace(
        two_bus_net,
        buses=(
            Bus(id=1, kind='pq', load_p=(0.0,), load_q=(0.0,)),
            Bus(id=2, kind='mg_pcc', load_p=(0.0, 1.0), load_q=(0.0,)),
        ),
        branches=(Branch(from_bus=1, to_bus=2, r=-0.01, x=0.01),),
    )

    violations: List[str] = validate(broken)

    assert "no slack bus" in violations  # nosec: B101
    assert any("load_p has 2 entries" in v for v in violations)  # nosec: B101
    assert any("must reference an MG config" in v for v in violations)  # nosec: B101
    assert any("r must be > 0" in v for v in violations)  # nosec: B101


def test_validate_rejects_loops(feeder: Tuple[Network, ScenarioConfig]) -> None:
    """An extra branch closing a loop breaks radiality."""
    net, _ = feeder
    meshed: Network = replace(net, branches=net.branches + (Branch(from_bus=4, to_bus=6, r=0.01, x=0.01),))

    assert any(v.startswith("not radial") for v in validate(meshed))  # nosec: B101


@pytest.mark.parametrize('missing', [2, 5])
def test_validate_rejects_unknown_bus(feeder: Tuple[Network, ScenarioConfig], missing: int) -> None:
    """A branch to a bus that does not exist is reported."""
    net, _ = feeder
    branches = tuple(replace(b, to_bus=99) if i == missing else b for i, b in enumerate(net.branches))

    assert any("unknown bus 99" in v for v in validate(replace(net, branches=branches)))  # nosec: B101


def test_tree_orientation(feeder: Tuple[Network, ScenarioConfig]) -> None:
    """The feeder tree is rooted at bus 1 with bus 2 as the only child of the root."""
    net, _ = feeder
    t: Tree = tree(net)

    assert t.root == 1  # nosec: B101
    assert t.children[1] == (2,)  # nosec: B101
    assert t.children[2] == (3, 6)  # nosec: B101
    assert t.parent[7] == 6  # nosec: B101
    assert t.oriented(net, 4) == (2, 6)  # nosec: B101
    assert sorted(t.depth_first_subtree(6)) == [6, 7]  # nosec: B101


def test_physical_units(bundled: Tuple[Network, ScenarioConfig]) -> None:
    """The first Baran-Wu branch is 0.0922 + j0.0470 ohm."""
    net, _ = bundled
    impedances = to_physical(net)

    assert impedances[0][0] == pytest.approx(0.0922)  # nosec: B101
    assert impedances[0][1] == pytest.approx(0.0470)  # nosec: B101
    assert from_physical(net, impedances).branches[5].r == pytest.approx(net.branches[5].r)  # nosec: B101
