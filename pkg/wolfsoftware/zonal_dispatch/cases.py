"""
This module ships the bundled modified IEEE 33-bus case.

The case is the Baran-Wu 33-bus feeder (impedances in ohms, nominal loads 3715 kW / 2300 kvar) with
four PV inverters and three microgrids attached, plus synthetic daily profiles. Attachments can be
moved to other buses; everything else is read from the bundled scenario file.

Functions:
- bundled_scenario_path: The location of the bundled scenario file.
- ieee33_scenario: The bundled network together with its scenario configuration.
- ieee33_case: The bundled network only.

Example usage:
    from .cases import ieee33_case

    net = ieee33_case()
    moved = ieee33_case(mg_buses=[18, 22, 33])
"""

from dataclasses import replace
from typing import Any, Dict, List, Optional, Sequence, Tuple

import importlib.resources
import json

from .exceptions import ConfigurationError, NetworkValidationError
from .network import Bus, Network, PvUnit, validate
from .scenario import ScenarioConfig, parse_scenario

BUNDLED_PACKAGE: str = 'wolfsoftware.zonal_dispatch'
BUNDLED_FILE: str = 'ieee33.json'


def bundled_scenario_path() -> Any:
    """
    Return the bundled scenario file as an importlib.resources traversable.

    Returns:
        Any: A path-like object; use str() for a filesystem path in a regular install.
    """
    return importlib.resources.files(BUNDLED_PACKAGE).joinpath('data', BUNDLED_FILE)


def _check_placement(net: Network, buses: Sequence[int], expected: int, what: str) -> None:
    """Reject placements of the wrong size, on unknown buses, on the slack, or with repeats."""
    if len(buses) != expected:
        raise ConfigurationError(f"{what} placement needs {expected} bus ids, got {len(buses)}")
    if len(set(buses)) != len(buses):
        raise ConfigurationError(f"{what} placement repeats a bus: {list(buses)}")
    for bus_id in buses:
        if bus_id not in net.index:
            raise ConfigurationError(f"{what} placement references unknown bus {bus_id}")
        if net.bus(bus_id).kind == 'slack':
            raise ConfigurationError(f"{what} placement cannot use the slack bus {bus_id}")


def _relocate(net: Network, pv_buses: Optional[Sequence[int]], mg_buses: Optional[Sequence[int]]) -> Network:
    """Move PV units and MG couplings to new buses, keeping their order."""
    if pv_buses is None and mg_buses is None:
        return net

    pv_units: List[PvUnit] = [net.bus(b).pv for b in net.pv_buses]  # type: ignore[misc]
    mg_names: List[str] = [net.bus(b).mg for b in net.mg_buses]  # type: ignore[misc]

    pv_at: Dict[int, PvUnit] = dict(zip(net.pv_buses, pv_units))
    mg_at: Dict[int, str] = dict(zip(net.mg_buses, mg_names))
    if pv_buses is not None:
        _check_placement(net, pv_buses, len(pv_units), 'PV')
        pv_at = dict(zip(pv_buses, pv_units))
    if mg_buses is not None:
        _check_placement(net, mg_buses, len(mg_names), 'MG')
        mg_at = dict(zip(mg_buses, mg_names))

    buses: List[Bus] = []
    for bus in net.buses:
        kind: str = bus.kind
        if kind != 'slack':
            kind = 'mg_pcc' if bus.id in mg_at else 'pq'
        buses.append(replace(bus, kind=kind, pv=pv_at.get(bus.id), mg=mg_at.get(bus.id)))

    return replace(net, buses=tuple(buses))


def ieee33_scenario(pv_buses: Optional[Sequence[int]] = None, mg_buses: Optional[Sequence[int]] = None) -> Tuple[Network, ScenarioConfig]:
    """
    Load the bundled case and its scenario configuration.

    Arguments:
        pv_buses (Optional[Sequence[int]]): New PV placements (4 bus ids, ratings 500/700/600/800 kVA in order).
        mg_buses (Optional[Sequence[int]]): New MG PCC placements (3 bus ids for MG1, MG2, MG3).

    Returns:
        Tuple[Network, ScenarioConfig]: The validated network and the scenario configuration.

    Raises:
        ConfigurationError: If a placement is malformed.
    """
    doc: Dict[str, Any] = json.loads(bundled_scenario_path().read_text(encoding='UTF-8'))
    net, scenario = parse_scenario(doc)
    net = _relocate(net, pv_buses, mg_buses)

    violations: List[str] = validate(net)
    if violations:
        raise NetworkValidationError(violations)

    return net, scenario


def ieee33_case(pv_buses: Optional[Sequence[int]] = None, mg_buses: Optional[Sequence[int]] = None) -> Network:
    """
    Return the bundled modified IEEE 33-bus network.

    Defaults place PV at buses 7, 14, 24, 30 and MG couplings at buses 12, 22, 29.

    Arguments:
        pv_buses (Optional[Sequence[int]]): New PV placements.
        mg_buses (Optional[Sequence[int]]): New MG PCC placements.

    Returns:
        Network: The network.
    """
    return ieee33_scenario(pv_buses, mg_buses)[0]
