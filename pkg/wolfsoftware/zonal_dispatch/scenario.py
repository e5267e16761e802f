"""
This module reads and writes scenario files and defines the scenario-level configuration types.

A scenario file is a single JSON document with the sections network / profiles / mgs / admm / prices /
upper. Power is given in kW and kvar, impedance in per-unit on the declared bases (or in ohms when
`network.impedance_unit` is "ohm"). Parsing errors carry the line or the dotted field path that failed,
validation errors carry the list of violated invariants.

Classes:
- MtConfig, DeConfig, BessConfig: Device parameters of a microgrid.
- MgConfig: One microgrid: devices plus load / PV / wind profiles.
- ScenarioConfig: Horizon, gas prices, ADMM settings, microgrids and upper-level options.

Functions:
- load_scenario: Parse a scenario file into a validated Network and its ScenarioConfig.
- load_network: Parse a scenario file and return only the validated Network.
- parse_scenario: Parse an already-decoded scenario document.
- save_network: Write a network (and optionally its scenario) with explicit hourly arrays.
- validate_mg: Check the invariants of one microgrid configuration.

Example usage:
    from .scenario import load_scenario

    net, scenario = load_scenario("feeder.json")
"""

from dataclasses import asdict, dataclass, field
from typing import Any, Dict, List, Optional, Tuple, Union

import json
import logging
import os

import numpy as np

from .admm import AdmmConfig
from .constants import (
    DEFAULT_BASE_KV, DEFAULT_BASE_MVA, DEFAULT_BESS_ETA, DEFAULT_BESS_ZETA, DEFAULT_DE_ALPHA, DEFAULT_DE_BETA, DEFAULT_DE_GAMMA,
    DEFAULT_DE_K_FU, DEFAULT_DELTA_T, DEFAULT_EPS_V, DEFAULT_ETA_MT, DEFAULT_HORIZON, DEFAULT_K_OP_DE, DEFAULT_K_OP_MT, DEFAULT_L_G,
    DEFAULT_P_INIT, DEFAULT_SOC0, DEFAULT_SOC_MAX, DEFAULT_SOC_MIN, DEFAULT_V_REF, SCENARIO_SCHEMA_VERSION
)
from .exceptions import ConfigurationError, NetworkValidationError, ScenarioParseError
from .network import Branch, Bus, Network, PvUnit, validate
from .utils import as_profile, base_impedance

logger: logging.Logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class MtConfig:
    """Microturbine parameters (power in kW, ramps in kW/h, k_op in $/kWh, l_g in kWh/m3)."""

    p_min: float = 10.0
    p_max: float = 300.0
    ramp_up: float = 120.0
    ramp_down: float = 180.0
    k_op: float = DEFAULT_K_OP_MT
    eta: float = DEFAULT_ETA_MT
    l_g: float = DEFAULT_L_G
    p_init: float = DEFAULT_P_INIT


@dataclass(frozen=True)
class DeConfig:
    """
    Diesel engine parameters.

    Fuel use per hour is alpha * x^2 + beta * x + gamma with x = P / p_norm; p_norm defaults to p_max
    and k_fu is the price of one fuel unit.
    """

    p_min: float = 5.0
    p_max: float = 300.0
    ramp_up: float = 160.0
    ramp_down: float = 180.0
    k_op: float = DEFAULT_K_OP_DE
    k_fu: float = DEFAULT_DE_K_FU
    alpha: float = DEFAULT_DE_ALPHA
    beta: float = DEFAULT_DE_BETA
    gamma: float = DEFAULT_DE_GAMMA
    p_norm: Optional[float] = None
    p_init: float = DEFAULT_P_INIT

    @property
    def norm(self) -> float:
        """The power normalisation of the fuel curve [kW]."""
        if self.p_norm:
            return self.p_norm
        return self.p_max if self.p_max > 0 else 1.0


@dataclass(frozen=True)
class BessConfig:
    """Battery parameters (capacity in kWh, power in kW, zeta in $/kW)."""

    capacity: float = 500.0
    p_max: float = 100.0
    eta_ch: float = DEFAULT_BESS_ETA
    eta_dis: float = DEFAULT_BESS_ETA
    soc_min: float = DEFAULT_SOC_MIN
    soc_max: float = DEFAULT_SOC_MAX
    soc0: float = DEFAULT_SOC0
    zeta: float = DEFAULT_BESS_ZETA


@dataclass(frozen=True)
class MgConfig:
    """
    One microgrid.

    Attributes:
        name (str): The microgrid name referenced by its PCC bus.
        mt (MtConfig): Microturbine.
        de (DeConfig): Diesel engine.
        bess (BessConfig): Battery.
        load (Tuple[float, ...]): Internal load per hour [kW].
        pv (Tuple[float, ...]): Internal PV output per hour [kW].
        wind (Tuple[float, ...]): Internal wind output per hour [kW].
    """

    name: str
    mt: MtConfig = field(default_factory=MtConfig)
    de: DeConfig = field(default_factory=DeConfig)
    bess: BessConfig = field(default_factory=BessConfig)
    load: Tuple[float, ...] = ()
    pv: Tuple[float, ...] = ()
    wind: Tuple[float, ...] = ()

    def net_demand(self) -> np.ndarray:
        """Return load minus renewables per hour [kW]."""
        return np.asarray(self.load, dtype=float) - np.asarray(self.pv, dtype=float) - np.asarray(self.wind, dtype=float)


@dataclass(frozen=True)
class ScenarioConfig:
    """
    Scenario-level configuration.

    Attributes:
        horizon (int): Number of hours.
        gas_price (Tuple[float, ...]): Gas price per hour [$/m3].
        admm (AdmmConfig): ADMM settings.
        mg_configs (Dict[str, MgConfig]): Microgrids by name.
        upper (Dict[str, Any]): Upper-level options (see constants for defaults).
        profiles (Dict[str, Tuple[float, ...]]): The named profile arrays the file was built from.
        delta_t (float): Period length [h].
    """

    horizon: int = DEFAULT_HORIZON
    gas_price: Tuple[float, ...] = ()
    admm: AdmmConfig = field(default_factory=AdmmConfig)
    mg_configs: Dict[str, MgConfig] = field(default_factory=dict)
    upper: Dict[str, Any] = field(default_factory=dict)
    profiles: Dict[str, Tuple[float, ...]] = field(default_factory=dict)
    delta_t: float = DEFAULT_DELTA_T


def validate_mg(cfg: MgConfig, horizon: int) -> List[str]:
    """
    Check the invariants of a microgrid configuration.

    Arguments:
        cfg (MgConfig): The microgrid.
        horizon (int): The expected profile length.

    Returns:
        List[str]: One message per violation.
    """
    violations: List[str] = []
    bess: BessConfig = cfg.bess

    if not 0 < bess.soc_min < bess.soc0 < bess.soc_max <= 1:
        violations.append(f"mg {cfg.name}: require 0 < soc_min < soc0 < soc_max <= 1")
    if bess.capacity <= 0 or bess.p_max < 0:
        violations.append(f"mg {cfg.name}: BESS capacity must be > 0 and p_max >= 0")
    if not (0 < bess.eta_ch <= 1 and 0 < bess.eta_dis <= 1):
        violations.append(f"mg {cfg.name}: BESS efficiencies must lie in (0, 1]")
    for label, dev in (('MT', cfg.mt), ('DE', cfg.de)):
        if dev.p_min > dev.p_max:
            violations.append(f"mg {cfg.name}: {label} p_min must not exceed p_max")
        if dev.ramp_up <= 0 or dev.ramp_down <= 0:
            violations.append(f"mg {cfg.name}: {label} ramp limits must be > 0")
    if cfg.mt.eta <= 0 or cfg.mt.l_g <= 0:
        violations.append(f"mg {cfg.name}: MT eta and l_g must be > 0")
    for label, values in (('load', cfg.load), ('pv', cfg.pv), ('wind', cfg.wind)):
        if len(values) != horizon:
            violations.append(f"mg {cfg.name}: {label} has {len(values)} entries, expected {horizon}")

    return violations


def _require(doc: Dict[str, Any], key: str, path: str) -> Any:
    """Return doc[key] or raise a parse error naming the field."""
    if not isinstance(doc, dict) or key not in doc:
        raise ScenarioParseError("missing required field", field=f"{path}.{key}" if path else key)
    return doc[key]


def _number(value: Any, path: str) -> float:
    """Coerce a JSON value to float or raise a parse error naming the field."""
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ScenarioParseError("expected a number", field=path)
    return float(value)


def _array(value: Any, path: str, horizon: int) -> Tuple[float, ...]:
    """Coerce a JSON list to a tuple of floats of the given length."""
    if not isinstance(value, list):
        raise ScenarioParseError("expected a list of numbers", field=path)
    values: Tuple[float, ...] = tuple(_number(v, f"{path}[{i}]") for i, v in enumerate(value))
    if len(values) != horizon:
        raise ScenarioParseError(f"expected {horizon} values, got {len(values)}", field=path)
    return values


def _profile(profiles: Dict[str, Tuple[float, ...]], name: Any, path: str) -> np.ndarray:
    """Look up a named profile."""
    if name not in profiles:
        raise ScenarioParseError(f"unknown profile '{name}'", field=path)
    return np.asarray(profiles[name], dtype=float)


def _series(value: Any, profiles: Dict[str, Tuple[float, ...]], path: str, horizon: int) -> Tuple[float, ...]:
    """Resolve an hourly series given as a list, a constant, or {"peak": x, "profile": name}."""
    if value is None:
        return tuple(0.0 for _ in range(horizon))
    if isinstance(value, list):
        return _array(value, path, horizon)
    if isinstance(value, dict):
        peak: float = _number(_require(value, 'peak', path), f"{path}.peak")
        shape: np.ndarray = _profile(profiles, value.get('profile'), f"{path}.profile")
        return tuple(float(v) for v in peak * shape)
    return tuple(float(v) for v in as_profile(_number(value, path), horizon))


def _parse_bus(doc: Dict[str, Any], path: str, profiles: Dict[str, Tuple[float, ...]], horizon: int) -> Bus:
    """Parse one bus entry."""
    bus_id: int = int(_number(_require(doc, 'id', path), f"{path}.id"))
    kind: str = str(doc.get('kind', 'pq'))

    if 'load_p' in doc or 'load_q' in doc:
        load_p: Tuple[float, ...] = _series(doc.get('load_p'), profiles, f"{path}.load_p", horizon)
        load_q: Tuple[float, ...] = _series(doc.get('load_q'), profiles, f"{path}.load_q", horizon)
    else:
        shape: np.ndarray = _profile(profiles, doc['profile'], f"{path}.profile") if 'profile' in doc else np.ones(horizon)
        p_nom: float = _number(doc.get('p', 0.0), f"{path}.p")
        q_nom: float = _number(doc.get('q', 0.0), f"{path}.q")
        load_p = tuple(float(v) for v in p_nom * shape)
        load_q = tuple(float(v) for v in q_nom * shape)

    pv: Optional[PvUnit] = None
    if doc.get('pv') is not None:
        pv_doc: Dict[str, Any] = doc['pv']
        capacity: float = _number(_require(pv_doc, 'capacity_s', f"{path}.pv"), f"{path}.pv.capacity_s")
        if 'p_mppt' in pv_doc:
            p_mppt: Tuple[float, ...] = _array(pv_doc['p_mppt'], f"{path}.pv.p_mppt", horizon)
        else:
            shape = _profile(profiles, pv_doc.get('profile'), f"{path}.pv.profile")
            p_mppt = tuple(float(v) for v in capacity * shape)
        pv = PvUnit(capacity_s=capacity, p_mppt=p_mppt)

    mg: Optional[str] = str(doc['mg']) if doc.get('mg') is not None else None

    return Bus(id=bus_id, kind=kind, load_p=load_p, load_q=load_q, pv=pv, mg=mg)


def _parse_network(doc: Dict[str, Any], profiles: Dict[str, Tuple[float, ...]]) -> Network:
    """Parse the network section."""
    horizon: int = int(_number(doc.get('horizon', DEFAULT_HORIZON), 'network.horizon'))
    base_mva: float = _number(doc.get('base_mva', DEFAULT_BASE_MVA), 'network.base_mva')
    base_kv: float = _number(doc.get('base_kv', DEFAULT_BASE_KV), 'network.base_kv')
    unit: str = str(doc.get('impedance_unit', 'pu'))

    if unit not in ('pu', 'ohm'):
        raise ScenarioParseError("impedance_unit must be 'pu' or 'ohm'", field='network.impedance_unit')
    scale: float = 1.0 / base_impedance(base_kv, base_mva) if unit == 'ohm' else 1.0

    buses_doc: Any = _require(doc, 'buses', 'network')
    branches_doc: Any = _require(doc, 'branches', 'network')
    if not isinstance(buses_doc, list) or not isinstance(branches_doc, list):
        raise ScenarioParseError("expected a list", field='network.buses' if not isinstance(buses_doc, list) else 'network.branches')

    buses: Tuple[Bus, ...] = tuple(_parse_bus(b, f"network.buses[{i}]", profiles, horizon) for i, b in enumerate(buses_doc))
    branches: Tuple[Branch, ...] = tuple(
        Branch(
            from_bus=int(_number(_require(b, 'from', f"network.branches[{i}]"), f"network.branches[{i}].from")),
            to_bus=int(_number(_require(b, 'to', f"network.branches[{i}]"), f"network.branches[{i}].to")),
            r=_number(_require(b, 'r', f"network.branches[{i}]"), f"network.branches[{i}].r") * scale,
            x=_number(_require(b, 'x', f"network.branches[{i}]"), f"network.branches[{i}].x") * scale,
        )
        for i, b in enumerate(branches_doc)
    )

    return Network(
        buses=buses,
        branches=branches,
        v_ref=_number(doc.get('v_ref', DEFAULT_V_REF), 'network.v_ref'),
        base_mva=base_mva,
        base_kv=base_kv,
        eps_v=_number(doc.get('eps_v', DEFAULT_EPS_V), 'network.eps_v'),
        horizon=horizon,
        name=str(doc.get('name', 'network')),
    )


def _parse_device(cls: Any, doc: Optional[Dict[str, Any]], path: str) -> Any:
    """Build a device dataclass from a dict, rejecting unknown keys."""
    doc = doc or {}
    known: set = set(cls.__dataclass_fields__)
    unknown: List[str] = sorted(set(doc) - known)
    if unknown:
        raise ScenarioParseError(f"unknown key(s) {', '.join(unknown)}", field=path)
    values: Dict[str, Any] = {k: (_number(v, f"{path}.{k}") if v is not None else None) for k, v in doc.items()}
    return cls(**values)


def _parse_mgs(doc: Dict[str, Any], profiles: Dict[str, Tuple[float, ...]], horizon: int) -> Dict[str, MgConfig]:
    """Parse the mgs section."""
    mgs: Dict[str, MgConfig] = {}
    for name, mg_doc in (doc or {}).items():
        path: str = f"mgs.{name}"
        mgs[name] = MgConfig(
            name=name,
            mt=_parse_device(MtConfig, mg_doc.get('mt'), f"{path}.mt"),
            de=_parse_device(DeConfig, mg_doc.get('de'), f"{path}.de"),
            bess=_parse_device(BessConfig, mg_doc.get('bess'), f"{path}.bess"),
            load=_series(mg_doc.get('load'), profiles, f"{path}.load", horizon),
            pv=_series(mg_doc.get('pv'), profiles, f"{path}.pv", horizon),
            wind=_series(mg_doc.get('wind'), profiles, f"{path}.wind", horizon),
        )
    return mgs


def parse_scenario(doc: Dict[str, Any]) -> Tuple[Network, ScenarioConfig]:
    """
    Parse a decoded scenario document and validate it.

    Arguments:
        doc (Dict[str, Any]): The decoded JSON document.

    Returns:
        Tuple[Network, ScenarioConfig]: The validated network and its scenario configuration.

    Raises:
        ScenarioParseError: If a field is missing or malformed.
        NetworkValidationError: If the network or a microgrid violates an invariant.
    """
    if not isinstance(doc, dict):
        raise ScenarioParseError("scenario document must be a JSON object")

    version: Any = doc.get('version', SCENARIO_SCHEMA_VERSION)
    if version != SCENARIO_SCHEMA_VERSION:
        raise ScenarioParseError(f"unsupported schema version {version}", field='version')

    net_doc: Dict[str, Any] = _require(doc, 'network', '')
    horizon: int = int(_number(net_doc.get('horizon', DEFAULT_HORIZON), 'network.horizon'))

    profiles: Dict[str, Tuple[float, ...]] = {
        name: _array(values, f"profiles.{name}", horizon) for name, values in (doc.get('profiles') or {}).items()
    }

    net: Network = _parse_network(net_doc, profiles)
    mgs: Dict[str, MgConfig] = _parse_mgs(doc.get('mgs') or {}, profiles, horizon)

    prices_doc: Dict[str, Any] = doc.get('prices') or {}
    gas: Tuple[float, ...] = _series(prices_doc.get('gas', 0.0), profiles, 'prices.gas', horizon)

    try:
        admm: AdmmConfig = AdmmConfig.from_dict(doc.get('admm') or {})
    except ConfigurationError as e:
        raise ScenarioParseError(str(e), field='admm') from e

    scenario: ScenarioConfig = ScenarioConfig(
        horizon=horizon,
        gas_price=gas,
        admm=admm,
        mg_configs=mgs,
        upper=dict(doc.get('upper') or {}),
        profiles=profiles,
    )

    violations: List[str] = validate(net)
    for bus in net.buses:
        if bus.mg is not None and bus.mg not in mgs:
            violations.append(f"bus {bus.id}: unknown MG config '{bus.mg}'")
    for cfg in mgs.values():
        violations.extend(validate_mg(cfg, horizon))
    if 'gas' in prices_doc and any(p <= 0 for p in gas):
        violations.append("gas_price entries must all be > 0")
    if violations:
        raise NetworkValidationError(violations)

    return net, scenario


def load_scenario(path: Union[str, os.PathLike]) -> Tuple[Network, ScenarioConfig]:
    """
    Load a scenario file.

    Arguments:
        path (Union[str, os.PathLike]): The scenario file.

    Returns:
        Tuple[Network, ScenarioConfig]: The validated network and its scenario configuration.

    Raises:
        ScenarioParseError: If the file cannot be read or parsed.
        NetworkValidationError: If the parsed content violates an invariant.
    """
    try:
        with open(path, 'r', encoding='UTF-8') as f:
            doc: Any = json.load(f)
    except FileNotFoundError as e:
        raise ScenarioParseError(f"scenario file not found: {path}") from e
    except json.JSONDecodeError as e:
        raise ScenarioParseError(f"invalid JSON: {e.msg}", line=e.lineno) from e

    net, scenario = parse_scenario(doc)
    logger.info("Loaded scenario %s: %d buses, %d branches, %d MGs", path, len(net.buses), len(net.branches), len(scenario.mg_configs))
    return net, scenario


def load_network(path: Union[str, os.PathLike]) -> Network:
    """
    Load the network of a scenario file.

    Arguments:
        path (Union[str, os.PathLike]): The scenario file.

    Returns:
        Network: The validated network.
    """
    return load_scenario(path)[0]


def _bus_doc(bus: Bus) -> Dict[str, Any]:
    """Serialise one bus with explicit arrays."""
    doc: Dict[str, Any] = {'id': bus.id, 'kind': bus.kind, 'load_p': list(bus.load_p), 'load_q': list(bus.load_q)}
    if bus.pv is not None:
        doc['pv'] = {'capacity_s': bus.pv.capacity_s, 'p_mppt': list(bus.pv.p_mppt)}
    if bus.mg is not None:
        doc['mg'] = bus.mg
    return doc


def scenario_document(net: Network, scenario: Optional[ScenarioConfig] = None) -> Dict[str, Any]:
    """
    Build the JSON document of a network and, optionally, its scenario.

    Arguments:
        net (Network): The network.
        scenario (Optional[ScenarioConfig]): The scenario configuration.

    Returns:
        Dict[str, Any]: A document that parse_scenario reads back unchanged.
    """
    doc: Dict[str, Any] = {
        'version': SCENARIO_SCHEMA_VERSION,
        'network': {
            'name': net.name,
            'base_mva': net.base_mva,
            'base_kv': net.base_kv,
            'v_ref': net.v_ref,
            'eps_v': net.eps_v,
            'horizon': net.horizon,
            'impedance_unit': 'pu',
            'buses': [_bus_doc(bus) for bus in net.buses],
            'branches': [{'from': b.from_bus, 'to': b.to_bus, 'r': b.r, 'x': b.x} for b in net.branches],
        },
    }

    if scenario is not None:
        doc['profiles'] = {name: list(values) for name, values in scenario.profiles.items()}
        doc['mgs'] = {
            name: {
                'mt': asdict(cfg.mt), 'de': asdict(cfg.de), 'bess': asdict(cfg.bess),
                'load': list(cfg.load), 'pv': list(cfg.pv), 'wind': list(cfg.wind),
            }
            for name, cfg in scenario.mg_configs.items()
        }
        doc['admm'] = asdict(scenario.admm)
        doc['prices'] = {'gas': list(scenario.gas_price)}
        doc['upper'] = dict(scenario.upper)

    return doc


def save_network(net: Network, path: Union[str, os.PathLike], scenario: Optional[ScenarioConfig] = None) -> None:
    """
    Write a network (and optionally its scenario) to a scenario file.

    Arguments:
        net (Network): The network.
        path (Union[str, os.PathLike]): The destination file.
        scenario (Optional[ScenarioConfig]): The scenario configuration to include.
    """
    with open(path, 'w', encoding='UTF-8') as f:
        json.dump(scenario_document(net, scenario), f, indent=2)
        f.write('\n')
