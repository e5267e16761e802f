"""
This module partitions the network into one zone per microgrid from voltage sensitivities.

Each non-slack bus joins the microgrid to whose active-power injection its voltage is most sensitive
(ties go to the lowest zone id), every MG coupling bus anchors its own zone, and the slack bus joins the
zone of its lowest-numbered neighbour. A repair pass then makes every zone a connected subnetwork, and the
branches cut by the partition become the overlapping (consensus) branches.

Zone ids start at 1; zone a contains the a-th MG coupling bus in ascending bus order.

Classes:
- OverlapBranch: A branch shared by two adjacent zones.
- ZonePartition: Bus-to-zone assignment plus the overlapping branches.

Functions:
- partition: Sensitivity argmax partition with connectivity repair.
- overlap_branches: The cut edges of an assignment.
- repair_connectivity: Reassign buses cut off from their zone's MG coupling.
- single_zone: The one-zone partition used when a network has no microgrid.

Example usage:
    from .zoning import partition

    zones = partition(sensitivity(net, base_state), net)
    for overlap in zones.overlaps:
        print(overlap.branch.label, overlap.zone_a, overlap.zone_b)
"""

from dataclasses import dataclass
from typing import Dict, List, Mapping, Optional, Set, Tuple

import logging

import networkx as nx
import numpy as np

from .exceptions import ConfigurationError
from .network import Branch, Network, Tree, graph, tree
from .powerflow import SensitivityMatrix

logger: logging.Logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class OverlapBranch:
    """
    A branch whose endpoints lie in different zones.

    Both zones keep a copy of its boundary vector X = (P_ij, Q_ij, U_i, U_j), oriented from the slack side.

    Attributes:
        index (int): Position of the branch in Network.branches.
        branch (Branch): The branch.
        upstream (int): The endpoint nearer the slack (i).
        downstream (int): The other endpoint (j).
        zone_a (int): Zone of the upstream endpoint.
        zone_b (int): Zone of the downstream endpoint.
    """

    index: int
    branch: Branch
    upstream: int
    downstream: int
    zone_a: int
    zone_b: int

    @property
    def label(self) -> str:
        """The oriented branch label, e.g. '3-4'."""
        return f"{self.upstream}-{self.downstream}"


@dataclass(frozen=True)
class ZonePartition:
    """
    A partition of the network into zones.

    Attributes:
        assignment (Dict[int, int]): Zone id of every bus.
        zones (Tuple[int, ...]): Zone ids, ascending.
        overlaps (Tuple[OverlapBranch, ...]): The branches shared by adjacent zones, in branch order.
        pcc (Dict[int, Optional[int]]): The MG coupling bus of every zone (None for an MG-less single zone).
    """

    assignment: Dict[int, int]
    zones: Tuple[int, ...]
    overlaps: Tuple[OverlapBranch, ...]
    pcc: Dict[int, Optional[int]]

    def key(self) -> Tuple[Tuple[int, int], ...]:
        """Return a hashable signature of the assignment."""
        return tuple(sorted(self.assignment.items()))

    def zone_of(self, bus_id: int) -> int:
        """Return the zone of a bus."""
        return self.assignment[bus_id]

    def zone_buses(self, zone: int) -> List[int]:
        """Return the buses of a zone, ascending."""
        return sorted(b for b, z in self.assignment.items() if z == zone)

    def zone_branches(self, net: Network, zone: int) -> List[int]:
        """Return indices of the branches with both endpoints in a zone."""
        return [
            i for i, b in enumerate(net.branches)
            if self.assignment[b.from_bus] == zone and self.assignment[b.to_bus] == zone
        ]

    def zone_overlaps(self, zone: int) -> List[OverlapBranch]:
        """Return the overlapping branches a zone takes part in."""
        return [o for o in self.overlaps if zone in (o.zone_a, o.zone_b)]


def _anchors(net: Network) -> Dict[int, int]:
    """Map zone id to the bus that anchors it."""
    if not net.mg_buses:
        return {1: net.slack_bus}
    return {z + 1: bus_id for z, bus_id in enumerate(net.mg_buses)}


def _anchored(g: nx.Graph, assignment: Mapping[int, int], anchors: Mapping[int, int]) -> Set[int]:
    """Return every bus connected to its zone's anchor through buses of the same zone."""
    anchored: Set[int] = set()
    for zone, root in anchors.items():
        if assignment.get(root) != zone:
            continue
        members: List[int] = [b for b, z in assignment.items() if z == zone]
        anchored.update(nx.node_connected_component(g.subgraph(members), root))
    return anchored


def repair_connectivity(assignment: Mapping[int, int], net: Network) -> Dict[int, int]:
    """
    Make every zone a connected subnetwork containing its MG coupling bus.

    Each coupling bus is first forced into its own zone. A bus that cannot reach its zone's coupling bus
    through same-zone buses joins the zone of its parent (toward the slack) once that parent is anchored,
    processed in breadth-first order. When no such bus has an anchored parent, the first one adjacent to an
    anchored child joins that child's zone (lowest zone on ties). Every pass anchors at least one bus.

    Arguments:
        assignment (Mapping[int, int]): A zone id for every bus.
        net (Network): The network.

    Returns:
        Dict[int, int]: The repaired assignment; unchanged when already connected.
    """
    g: nx.Graph = graph(net)
    t: Tree = tree(net)
    anchors: Dict[int, int] = _anchors(net)
    repaired: Dict[int, int] = dict(assignment)
    for zone, root in anchors.items():
        repaired[root] = zone

    moved: int = 0
    while True:
        anchored: Set[int] = _anchored(g, repaired, anchors)
        orphans: List[int] = [b for b in t.order if b not in anchored]
        if not orphans:
            break

        progressed: bool = False
        for bus_id in orphans:
            parent: Optional[int] = t.parent.get(bus_id)
            if parent is not None and parent in anchored:
                repaired[bus_id] = repaired[parent]
                anchored.add(bus_id)
                moved += 1
                progressed = True

        if not progressed:
            for bus_id in orphans:
                zones: List[int] = [repaired[c] for c in t.children[bus_id] if c in anchored]
                if zones:
                    repaired[bus_id] = min(zones)
                    moved += 1
                    break

    if moved:
        logger.debug("Connectivity repair reassigned %d bus(es)", moved)
    return repaired


def overlap_branches(assignment: Mapping[int, int], net: Network) -> List[OverlapBranch]:
    """
    Return the branches whose endpoints lie in different zones.

    Arguments:
        assignment (Mapping[int, int]): A zone id for every bus.
        net (Network): The network.

    Returns:
        List[OverlapBranch]: One entry per cut branch, in branch order, oriented from the slack side.
    """
    t: Tree = tree(net)
    overlaps: List[OverlapBranch] = []
    for i, branch in enumerate(net.branches):
        if assignment[branch.from_bus] == assignment[branch.to_bus]:
            continue
        upstream, downstream = t.oriented(net, i)
        overlaps.append(OverlapBranch(
            index=i,
            branch=branch,
            upstream=upstream,
            downstream=downstream,
            zone_a=assignment[upstream],
            zone_b=assignment[downstream],
        ))
    return overlaps


def _build(net: Network, assignment: Dict[int, int]) -> ZonePartition:
    """Assemble a ZonePartition from a final assignment."""
    anchors: Dict[int, int] = _anchors(net)
    pcc: Dict[int, Optional[int]] = {z: (b if net.mg_buses else None) for z, b in anchors.items()}
    return ZonePartition(
        assignment=assignment,
        zones=tuple(sorted(anchors)),
        overlaps=tuple(overlap_branches(assignment, net)),
        pcc=pcc,
    )


def single_zone(net: Network) -> ZonePartition:
    """
    Return the partition with every bus in zone 1.

    Arguments:
        net (Network): The network.

    Returns:
        ZonePartition: One zone, no overlaps.
    """
    assignment: Dict[int, int] = {bus_id: 1 for bus_id in net.bus_ids}
    pcc: Dict[int, Optional[int]] = {1: net.mg_buses[0] if len(net.mg_buses) == 1 else None}
    return ZonePartition(assignment=assignment, zones=(1,), overlaps=(), pcc=pcc)


def partition(sens: SensitivityMatrix, net: Network) -> ZonePartition:
    """
    Partition the network by voltage-active-power sensitivity.

    Arguments:
        sens (SensitivityMatrix): Sensitivities with a row for every non-slack bus.
        net (Network): The network.

    Returns:
        ZonePartition: The repaired partition with its overlapping branches.

    Raises:
        ConfigurationError: If there is no MG or a non-slack bus has no sensitivity row.
    """
    if not sens.mg_buses or not net.mg_buses:
        raise ConfigurationError("partition needs at least one MG")
    if len(net.mg_buses) == 1:
        return single_zone(net)

    # columns in zone order so argmax ties resolve to the lowest zone id
    order: List[int] = [sens.mg_buses.index(b) for b in net.mg_buses]
    dv_dp: np.ndarray = sens.dv_dp[:, order]
    rows: Dict[int, int] = {b: i for i, b in enumerate(sens.buses)}

    assignment: Dict[int, int] = {}
    for bus_id in net.bus_ids:
        if bus_id == net.slack_bus:
            continue
        if bus_id not in rows:
            raise ConfigurationError(f"no sensitivity row for bus {bus_id}")
        assignment[bus_id] = int(np.argmax(dv_dp[rows[bus_id]])) + 1

    for zone, bus_id in _anchors(net).items():
        assignment[bus_id] = zone

    g: nx.Graph = graph(net)
    assignment[net.slack_bus] = assignment[min(g.neighbors(net.slack_bus))]

    result: ZonePartition = _build(net, repair_connectivity(assignment, net))
    logger.debug("Partition: %s", {z: len(result.zone_buses(z)) for z in result.zones})
    return result
