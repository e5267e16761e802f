"""
This module defines the radial distribution network data model and its validation.

The network is the single source of topology truth for every other stage: power flow, zoning and the
zone optimisation problems all read buses and branches from here and never mutate them.

Classes:
- PvUnit: A PV inverter attached to a bus.
- Bus: A network node with hourly load and optional PV / microgrid attachments.
- Branch: A series branch between two buses.
- Network: The immutable radial network.
- Tree: The network oriented away from the slack bus.

Functions:
- validate: Check every model invariant and return one message per violation.
- graph: Build an undirected networkx graph of the network.
- tree: Orient the network as a tree rooted at the slack bus.
- to_physical / from_physical: Convert branch impedances between per-unit and ohms.

Example usage:
    from .network import validate

    violations = validate(net)
    if violations:
        raise NetworkValidationError(violations)
"""

from dataclasses import dataclass, field, replace
from functools import cached_property
from typing import Dict, List, Optional, Sequence, Set, Tuple

import networkx as nx
import numpy as np

from .constants import BUS_KINDS, DEFAULT_BASE_KV, DEFAULT_BASE_MVA, DEFAULT_EPS_V, DEFAULT_HORIZON, DEFAULT_V_REF
from .utils import branch_label, ohm_to_pu, pu_to_ohm


@dataclass(frozen=True)
class PvUnit:
    """
    A PV inverter.

    Attributes:
        capacity_s (float): Inverter apparent-power rating [kVA].
        p_mppt (Tuple[float, ...]): MPPT active power per hour [kW].
    """

    capacity_s: float
    p_mppt: Tuple[float, ...]


@dataclass(frozen=True)
class Bus:
    """
    A network node.

    Attributes:
        id (int): The bus id.
        kind (str): One of 'slack', 'pq' or 'mg_pcc'.
        load_p (Tuple[float, ...]): Active demand per hour [kW].
        load_q (Tuple[float, ...]): Reactive demand per hour [kvar].
        pv (Optional[PvUnit]): The attached PV unit, if any.
        mg (Optional[str]): The name of the microgrid coupled at this bus (mg_pcc buses only).
    """

    id: int
    kind: str
    load_p: Tuple[float, ...]
    load_q: Tuple[float, ...]
    pv: Optional[PvUnit] = None
    mg: Optional[str] = None


@dataclass(frozen=True)
class Branch:
    """
    A series branch, impedance in per-unit on the network bases.

    Attributes:
        from_bus (int): The first bus id.
        to_bus (int): The second bus id.
        r (float): Resistance [p.u.].
        x (float): Reactance [p.u.].
    """

    from_bus: int
    to_bus: int
    r: float
    x: float

    @property
    def label(self) -> str:
        """Return the branch label, e.g. '3-4'."""
        return branch_label(self.from_bus, self.to_bus)


@dataclass(frozen=True)
class Tree:
    """
    The network oriented away from the slack bus.

    Attributes:
        root (int): The slack bus id.
        order (Tuple[int, ...]): Bus ids in breadth-first order from the root.
        parent (Dict[int, int]): Parent bus of every non-root bus.
        parent_branch (Dict[int, int]): Index (into Network.branches) of the branch to the parent.
        children (Dict[int, Tuple[int, ...]]): Children of every bus, ascending.
    """

    root: int
    order: Tuple[int, ...]
    parent: Dict[int, int]
    parent_branch: Dict[int, int]
    children: Dict[int, Tuple[int, ...]]

    def oriented(self, net: 'Network', branch_index: int) -> Tuple[int, int]:
        """
        Return (upstream, downstream) bus ids of a branch.

        Arguments:
            net (Network): The network the tree was built from.
            branch_index (int): Index into net.branches.

        Returns:
            Tuple[int, int]: The branch endpoints ordered from the slack side.
        """
        branch: Branch = net.branches[branch_index]
        if self.parent.get(branch.to_bus) == branch.from_bus:
            return branch.from_bus, branch.to_bus
        return branch.to_bus, branch.from_bus

    def depth_first_subtree(self, bus: int) -> List[int]:
        """Return bus and every bus downstream of it."""
        out: List[int] = []
        stack: List[int] = [bus]
        while stack:
            node: int = stack.pop()
            out.append(node)
            stack.extend(reversed(self.children.get(node, ())))
        return out


@dataclass(frozen=True)
class Network:
    """
    A radial distribution network.

    Attributes:
        buses (Tuple[Bus, ...]): The buses.
        branches (Tuple[Branch, ...]): The branches.
        v_ref (float): Slack voltage reference [p.u.].
        base_mva (float): Power base [MVA].
        base_kv (float): Voltage base [kV].
        eps_v (float): Allowable voltage deviation [p.u.].
        horizon (int): Number of hourly periods every profile carries.
    """

    buses: Tuple[Bus, ...]
    branches: Tuple[Branch, ...]
    v_ref: float = DEFAULT_V_REF
    base_mva: float = DEFAULT_BASE_MVA
    base_kv: float = DEFAULT_BASE_KV
    eps_v: float = DEFAULT_EPS_V
    horizon: int = DEFAULT_HORIZON
    name: str = field(default='network', compare=True)

    @cached_property
    def index(self) -> Dict[int, int]:
        """Map bus id to position in buses."""
        return {bus.id: i for i, bus in enumerate(self.buses)}

    @cached_property
    def bus_ids(self) -> Tuple[int, ...]:
        """Bus ids in storage order."""
        return tuple(bus.id for bus in self.buses)

    @property
    def slack_bus(self) -> int:
        """Return the id of the (first) slack bus."""
        for bus in self.buses:
            if bus.kind == 'slack':
                return bus.id
        raise ValueError("network has no slack bus")

    @cached_property
    def mg_buses(self) -> Tuple[int, ...]:
        """MG PCC bus ids in ascending order; zone a contains mg_buses[a]."""
        return tuple(sorted(bus.id for bus in self.buses if bus.kind == 'mg_pcc'))

    @cached_property
    def pv_buses(self) -> Tuple[int, ...]:
        """Bus ids carrying a PV unit, ascending."""
        return tuple(sorted(bus.id for bus in self.buses if bus.pv is not None))

    def bus(self, bus_id: int) -> Bus:
        """Return the bus with the given id."""
        return self.buses[self.index[bus_id]]

    def load_kw(self, hour: int) -> Tuple[np.ndarray, np.ndarray]:
        """Return active and reactive load of every bus at an hour [kW, kvar]."""
        p: np.ndarray = np.array([bus.load_p[hour] for bus in self.buses], dtype=float)
        q: np.ndarray = np.array([bus.load_q[hour] for bus in self.buses], dtype=float)
        return p, q

    def pv_kw(self, hour: int) -> np.ndarray:
        """Return MPPT active power of every bus at an hour [kW] (zero where no PV)."""
        return np.array([bus.pv.p_mppt[hour] if bus.pv is not None else 0.0 for bus in self.buses], dtype=float)

    def has_load(self, hour: int) -> bool:
        """Return True when any bus has nonzero demand at the hour."""
        p, q = self.load_kw(hour)
        return bool(np.any(p != 0.0) or np.any(q != 0.0))


def _validate_buses(net: Network) -> List[str]:
    """Check bus-level invariants."""
    violations: List[str] = []
    seen: Set[int] = set()
    slack: List[int] = []

    for bus in net.buses:
        if bus.id in seen:
            violations.append(f"bus {bus.id}: duplicate bus id")
        seen.add(bus.id)

        if bus.kind not in BUS_KINDS:
            violations.append(f"bus {bus.id}: unknown kind '{bus.kind}'")
        if bus.kind == 'slack':
            slack.append(bus.id)

        for name, values in (('load_p', bus.load_p), ('load_q', bus.load_q)):
            if len(values) != net.horizon:
                violations.append(f"bus {bus.id}: {name} has {len(values)} entries, expected {net.horizon}")
            elif not np.all(np.isfinite(values)):
                violations.append(f"bus {bus.id}: {name} must be finite")

        if bus.kind == 'mg_pcc' and not bus.mg:
            violations.append(f"bus {bus.id}: mg_pcc bus must reference an MG config")
        if bus.kind != 'mg_pcc' and bus.mg:
            violations.append(f"bus {bus.id}: only mg_pcc buses may reference an MG config")

        if bus.pv is not None:
            if bus.pv.capacity_s <= 0:
                violations.append(f"bus {bus.id}: PV capacity_s must be > 0")
            if len(bus.pv.p_mppt) != net.horizon:
                violations.append(f"bus {bus.id}: PV p_mppt has {len(bus.pv.p_mppt)} entries, expected {net.horizon}")
            elif any(p < 0 or p > bus.pv.capacity_s for p in bus.pv.p_mppt):
                violations.append(f"bus {bus.id}: PV p_mppt must lie in [0, capacity_s]")

    if not slack:
        violations.append("no slack bus")
    elif len(slack) > 1:
        violations.append(f"multiple slack buses: {', '.join(str(b) for b in slack)}")

    return violations


def _validate_branches(net: Network) -> List[str]:
    """Check branch-level invariants."""
    violations: List[str] = []
    ids: Set[int] = set(net.bus_ids)
    edges: Dict[frozenset, str] = {}

    for branch in net.branches:
        label: str = branch.label
        if branch.r <= 0:
            violations.append(f"branch {label}: r must be > 0")
        if branch.x <= 0:
            violations.append(f"branch {label}: x must be > 0")
        for end in (branch.from_bus, branch.to_bus):
            if end not in ids:
                violations.append(f"branch {label}: unknown bus {end}")
        if branch.from_bus == branch.to_bus:
            violations.append(f"branch {label}: self-loop")
            continue
        key: frozenset = frozenset((branch.from_bus, branch.to_bus))
        if key in edges:
            violations.append(f"branch {label}: duplicates branch {edges[key]}")
        else:
            edges[key] = label

    return violations


def _validate_topology(net: Network) -> List[str]:
    """Check radiality and connectivity."""
    violations: List[str] = []

    if len(net.branches) != len(net.buses) - 1:
        violations.append(f"not radial: {len(net.branches)} branches for {len(net.buses)} buses")

    slack: List[int] = [bus.id for bus in net.buses if bus.kind == 'slack']
    if slack:
        reachable: Set[int] = set(nx.node_connected_component(graph(net), slack[0]))
        unreachable: List[int] = [bus_id for bus_id in net.bus_ids if bus_id not in reachable]
        if unreachable:
            violations.append(f"not connected: buses {', '.join(str(b) for b in unreachable)} unreachable from slack")

    return violations


def validate(net: Network) -> List[str]:
    """
    Check every network invariant.

    Violations are data: the function never raises for an invalid network.

    Arguments:
        net (Network): The network to check.

    Returns:
        List[str]: One message per violation, empty when the network is valid.
    """
    violations: List[str] = []

    if not net.buses:
        return ["network has no buses"]
    if net.horizon < 1:
        violations.append("horizon must be >= 1")
    if net.v_ref <= 0:
        violations.append("v_ref must be > 0")
    if net.base_mva <= 0 or net.base_kv <= 0:
        violations.append("base_mva and base_kv must be > 0")
    if not 0 < net.eps_v < 1:
        violations.append("eps_v must lie in (0, 1)")

    violations.extend(_validate_buses(net))
    violations.extend(_validate_branches(net))
    violations.extend(_validate_topology(net))

    return violations


def graph(net: Network) -> nx.Graph:
    """
    Build an undirected graph of the network.

    Arguments:
        net (Network): The network.

    Returns:
        nx.Graph: Nodes are bus ids; every edge carries its branch position as attribute 'index'.
    """
    g: nx.Graph = nx.Graph()
    g.add_nodes_from(net.bus_ids)
    for i, branch in enumerate(net.branches):
        g.add_edge(branch.from_bus, branch.to_bus, index=i)
    return g


def tree(net: Network) -> Tree:
    """
    Orient a radial network as a tree rooted at the slack bus.

    Arguments:
        net (Network): A valid radial network.

    Returns:
        Tree: Parent / children maps and the breadth-first order.
    """
    g: nx.Graph = graph(net)
    root: int = net.slack_bus
    parent: Dict[int, int] = {}
    parent_branch: Dict[int, int] = {}
    children: Dict[int, List[int]] = {bus_id: [] for bus_id in net.bus_ids}
    order: List[int] = [root]

    # sorted neighbours keep the traversal independent of insertion order
    frontier: List[int] = [root]
    seen: Set[int] = {root}
    while frontier:
        nxt: List[int] = []
        for node in frontier:
            for nb in sorted(g.neighbors(node)):
                if nb in seen:
                    continue
                seen.add(nb)
                parent[nb] = node
                parent_branch[nb] = g.edges[node, nb]['index']
                children[node].append(nb)
                order.append(nb)
                nxt.append(nb)
        frontier = nxt

    return Tree(
        root=root,
        order=tuple(order),
        parent=parent,
        parent_branch=parent_branch,
        children={k: tuple(v) for k, v in children.items()},
    )


def to_physical(net: Network) -> List[Tuple[float, float]]:
    """
    Return branch impedances in ohms.

    Arguments:
        net (Network): The network.

    Returns:
        List[Tuple[float, float]]: (r, x) in ohms per branch.
    """
    return [(pu_to_ohm(b.r, net.base_kv, net.base_mva), pu_to_ohm(b.x, net.base_kv, net.base_mva)) for b in net.branches]


def from_physical(net: Network, impedances: Sequence[Tuple[float, float]]) -> Network:
    """
    Return a copy of the network with branch impedances given in ohms.

    Arguments:
        net (Network): The network supplying topology and bases.
        impedances (Sequence[Tuple[float, float]]): (r, x) in ohms per branch.

    Returns:
        Network: The network with per-unit impedances recomputed.
    """
    branches: Tuple[Branch, ...] = tuple(
        replace(b, r=ohm_to_pu(r, net.base_kv, net.base_mva), x=ohm_to_pu(x, net.base_kv, net.base_mva))
        for b, (r, x) in zip(net.branches, impedances)
    )
    return replace(net, branches=branches)
