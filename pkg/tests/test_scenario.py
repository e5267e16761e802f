"""
This test module covers scenario files: parsing, error reporting, writing and the bundled case.

Functions:
- test_parse_feeder: A well-formed document yields the expected network and microgrids.
- test_missing_field_is_located: Parse errors name the dotted path of the field.
- test_wrong_profile_length: Arrays must match the horizon.
- test_unknown_mg_reference: A PCC bus must reference a configured microgrid.
- test_invalid_json_reports_line: JSON syntax errors carry the line number.
- test_save_and_load: A written scenario reads back unchanged.
- test_relocated_bundled_case: Microgrid couplings can be moved.
- test_bad_placements: Slack, short, repeated or unknown placements are rejected.
- test_missing_file: A missing scenario file is a parse error.
- test_rejected_sections: Invalid ADMM settings and unknown schema versions are parse errors.
- test_unknown_device_key: Misspelt device parameters are not silently ignored.

Dependencies:
- pytest: Used for writing and running tests.
- wolfsoftware.zonal_dispatch.scenario: The module being tested.
"""

from pathlib import Path
from typing import Any, Dict, Tuple

import pytest

from wolfsoftware.zonal_dispatch import (
    ConfigurationError, Network, NetworkValidationError, ScenarioConfig, ScenarioParseError, ieee33_case, load_scenario, save_network
)
from wolfsoftware.zonal_dispatch.scenario import parse_scenario


def test_parse_feeder(feeder: Tuple[Network, ScenarioConfig]) -> None:
    """Loads, PV, microgrid profiles and ADMM settings are read as given."""
    net, scenario = feeder

    assert net.horizon == 2 and scenario.horizon == 2  # nosec: B101
    assert net.slack_bus == 1  # nosec: B101
    assert net.mg_buses == (5, 7)  # nosec: B101
    assert net.bus(4).pv is not None and net.bus(4).pv.p_mppt == (0.0, 200.0)  # nosec: B101
    assert net.bus(3).load_p == (100.0, 100.0)  # nosec: B101
    assert scenario.mg_configs['MGA'].pv == (0.0, 60.0)  # nosec: B101
    assert scenario.mg_configs['MGB'].load == (180.0, 180.0)  # nosec: B101
    assert scenario.mg_configs['MGB'].wind == (0.0, 0.0)  # nosec: B101
    assert scenario.gas_price == (0.3, 0.35)  # nosec: B101
    assert scenario.admm.eps == 1e-5 and scenario.admm.max_iter == 1000  # nosec: B101
    assert scenario.admm.rho0 == 250.0 and scenario.admm.strategy == 'improved'  # nosec: B101


def test_missing_field_is_located(feeder_doc: Dict[str, Any]) -> None:
    """A bus without an id names network.buses[1].id."""
    del feeder_doc['network']['buses'][1]['id']

    with pytest.raises(ScenarioParseError) as info:
        parse_scenario(feeder_doc)

    assert info.value.field == 'network.buses[1].id'  # nosec: B101
    assert info.value.exit_code == 2  # nosec: B101


def test_wrong_profile_length(feeder_doc: Dict[str, Any]) -> None:
    """A three-value profile in a two-hour scenario is rejected."""
    feeder_doc['mgs']['MGA']['load'] = [1, 2, 3]

    with pytest.raises(ScenarioParseError) as info:
        parse_scenario(feeder_doc)

    assert info.value.field == 'mgs.MGA.load'  # nosec: B101


@pytest.mark.parametrize('section, value, field', [
    ('admm', {'strategy': 'bogus'}, 'admm'),
    ('version', 2, 'version'),
])
def test_rejected_sections(feeder_doc: Dict[str, Any], section: str, value: Any, field: str) -> None:
    """Invalid ADMM settings and unknown schema versions are parse errors."""
    feeder_doc[section] = value

    with pytest.raises(ScenarioParseError) as info:
        parse_scenario(feeder_doc)

    assert info.value.field == field  # nosec: B101


def test_unknown_device_key(feeder_doc: Dict[str, Any]) -> None:
    """Misspelt device parameters are not silently ignored."""
    feeder_doc['mgs']['MGA']['mt'] = {'p_mx': 200}

    with pytest.raises(ScenarioParseError, match='p_mx'):
        parse_scenario(feeder_doc)


def test_unknown_mg_reference(feeder_doc: Dict[str, Any]) -> None:
    """A PCC bus naming an undefined microgrid is a validation error."""
    feeder_doc['network']['buses'][4]['mg'] = 'MGX'

    with pytest.raises(NetworkValidationError) as info:
        parse_scenario(feeder_doc)

    assert "bus 5: unknown MG config 'MGX'" in info.value.violations  # nosec: B101


def test_invalid_json_reports_line(tmp_path: Path) -> None:
    """Syntax errors carry the offending line."""
    path: Path = tmp_path / 'broken.json'
    path.write_text('{\n  "network": }\n', encoding='UTF-8')

    with pytest.raises(ScenarioParseError) as info:
        load_scenario(path)

    assert info.value.line == 2  # nosec: B101


def test_missing_file(tmp_path: Path) -> None:
    """A missing scenario file is a parse error."""
    with pytest.raises(ScenarioParseError, match='not found'):
        load_scenario(tmp_path / 'absent.json')


def test_save_and_load(tmp_path: Path, feeder: Tuple[Network, ScenarioConfig]) -> None:
    """save_network writes explicit arrays that load_scenario reads back unchanged."""
    net, scenario = feeder
    path: Path = tmp_path / 'copy.json'

    save_network(net, path, scenario)

    assert load_scenario(path) == (net, scenario)  # nosec: B101


def test_relocated_bundled_case() -> None:
    """Moving the microgrids keeps their order and frees the old buses."""
    net: Network = ieee33_case(mg_buses=[18, 22, 33])

    assert net.mg_buses == (18, 22, 33)  # nosec: B101
    assert net.bus(18).mg == 'MG1'  # nosec: B101
    assert net.bus(12).kind == 'pq' and net.bus(12).mg is None  # nosec: B101


@pytest.mark.parametrize('placement', [[1, 2, 3], [5, 6], [5, 5, 6], [5, 6, 99]])
def test_bad_placements(placement: list) -> None:
    """Slack, short, repeated or unknown placements are rejected."""
    with pytest.raises(ConfigurationError):
        ieee33_case(mg_buses=placement)
