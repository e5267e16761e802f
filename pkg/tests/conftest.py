"""
This module provides pytest fixtures shared by the zonal dispatch tests.

Fixtures:
    - two_bus_net: A slack bus feeding one unloaded bus through r = x = 0.01 p.u.
    - feeder_doc: A small two-microgrid scenario document (7 buses, 2 hours).
    - feeder: The parsed feeder network and its scenario configuration.
    - feeder_file: The feeder scenario written to a temporary JSON file.
    - feeder_report: One full pipeline run of the feeder, shared by the output tests.
    - bundled: The bundled IEEE 33-bus case and its scenario configuration.
    - bundled_benchmark: The three penalty strategies on four hours of the bundled case.
    - toy_consensus: Two one-variable zones, (x - 1)^2 and (x - 3)^2, sharing x.

Dependencies:
    - pytest: Used for writing and running tests.
    - numpy: Used to build the toy programs.

Example usage:
    def test_something(feeder) -> None:
        net, scenario = feeder
        ...
"""

from pathlib import Path
from typing import Any, Dict, Tuple

import copy
import json

import numpy as np
import pytest

from wolfsoftware.zonal_dispatch import ConvexProgram, Network, RunReport, ScenarioConfig, benchmark_penalty, ieee33_scenario, run
from wolfsoftware.zonal_dispatch.network import Branch, Bus
from wolfsoftware.zonal_dispatch.pipeline import BenchmarkReport
from wolfsoftware.zonal_dispatch.scenario import parse_scenario
from wolfsoftware.zonal_dispatch.upper_opf import ZoneSubproblem

FEEDER_DOC: Dict[str, Any] = {
    'version': 1,
    'network': {
        'name': 'feeder7',
        'base_mva': 10.0,
        'base_kv': 12.66,
        'horizon': 2,
        'buses': [
            {'id': 1, 'kind': 'slack'},
            {'id': 2, 'p': 120, 'q': 60},
            {'id': 3, 'p': 100, 'q': 50},
            {'id': 4, 'p': 150, 'q': 70, 'pv': {'capacity_s': 300, 'p_mppt': [0, 200]}},
            {'id': 5, 'kind': 'mg_pcc', 'p': 80, 'q': 40, 'mg': 'MGA'},
            {'id': 6, 'p': 100, 'q': 50},
            {'id': 7, 'kind': 'mg_pcc', 'p': 90, 'q': 40, 'mg': 'MGB'},
        ],
        'branches': [
            {'from': 1, 'to': 2, 'r': 0.006, 'x': 0.003},
            {'from': 2, 'to': 3, 'r': 0.03, 'x': 0.015},
            {'from': 3, 'to': 4, 'r': 0.02, 'x': 0.01},
            {'from': 4, 'to': 5, 'r': 0.04, 'x': 0.03},
            {'from': 2, 'to': 6, 'r': 0.05, 'x': 0.04},
            {'from': 6, 'to': 7, 'r': 0.06, 'x': 0.05},
        ],
    },
    'mgs': {
        'MGA': {'load': [200, 220], 'pv': [0, 60]},
        'MGB': {'load': 180},
    },
    'prices': {'gas': [0.3, 0.35]},
    'admm': {'eps': 1e-5, 'max_iter': 1000},
}


@pytest.fixture
def two_bus_net() -> Network:
    """
    Return a two-bus network with no load.

    Returns:
        Network: Slack bus 1 and PQ bus 2 joined by r = x = 0.01 p.u.
    """
    return Network(
        buses=(
            Bus(id=1, kind='slack', load_p=(0.0,), load_q=(0.0,)),
            Bus(id=2, kind='pq', load_p=(0.0,), load_q=(0.0,)),
        ),
        branches=(Branch(from_bus=1, to_bus=2, r=0.01, x=0.01),),
        horizon=1,
        name='two-bus',
    )


@pytest.fixture
def feeder_doc() -> Dict[str, Any]:
    """
    Return a fresh copy of the feeder scenario document.

    Returns:
        Dict[str, Any]: The decoded scenario JSON.
    """
    return copy.deepcopy(FEEDER_DOC)


@pytest.fixture
def feeder(feeder_doc: Dict[str, Any]) -> Tuple[Network, ScenarioConfig]:
    """
    Return the parsed feeder.

    Arguments:
        feeder_doc (Dict[str, Any]): The scenario document.

    Returns:
        Tuple[Network, ScenarioConfig]: The network and its scenario.
    """
    return parse_scenario(feeder_doc)


@pytest.fixture
def feeder_file(tmp_path: Path, feeder_doc: Dict[str, Any]) -> Path:
    """
    Write the feeder scenario to disk.

    Arguments:
        tmp_path (Path): The pytest temporary directory.
        feeder_doc (Dict[str, Any]): The scenario document.

    Returns:
        Path: The scenario file.
    """
    path: Path = tmp_path / 'feeder.json'
    path.write_text(json.dumps(feeder_doc), encoding='UTF-8')
    return path


@pytest.fixture(scope='session')
def feeder_report() -> RunReport:
    """
    Run the whole pipeline on the feeder once per session.

    Returns:
        RunReport: The report of both hours, microgrid schedules included.
    """
    net, scenario = parse_scenario(copy.deepcopy(FEEDER_DOC))
    return run(net, scenario)


@pytest.fixture(scope='session')
def bundled() -> Tuple[Network, ScenarioConfig]:
    """
    Load the bundled IEEE 33-bus case.

    Returns:
        Tuple[Network, ScenarioConfig]: The network and its scenario.
    """
    return ieee33_scenario()



@pytest.fixture(scope='session')
def bundled_benchmark() -> BenchmarkReport:
    """
    Benchmark every penalty strategy on the bundled case once per session.

    Returns:
        BenchmarkReport: Runs at hours 0, 8, 13 and 20.
    """
    net, scenario = ieee33_scenario()
    return benchmark_penalty(net, scenario, hours=[0, 8, 13, 20])


@pytest.fixture
def toy_consensus() -> Dict[int, ZoneSubproblem]:
    """
    Return two zones that must agree on one shared variable.

    Returns:
        Dict[int, ZoneSubproblem]: Zone 1 minimises (x - 1)^2, zone 2 minimises (x - 3)^2.
    """
    shared: Dict[str, np.ndarray] = {'x': np.array([0])}
    return {
        1: ZoneSubproblem(zone=1, program=ConvexProgram(n=1, Q=[[2.0]], c=[-2.0], constant=1.0), boundary=dict(shared)),
        2: ZoneSubproblem(zone=2, program=ConvexProgram(n=1, Q=[[2.0]], c=[-6.0], constant=9.0), boundary=dict(shared)),
    }
