"""
A Python package for bi-level optimisation of a radial distribution network with embedded microgrids.

The upper level partitions the network into one zone per microgrid from voltage sensitivities and
coordinates per-zone fuzzy multi-objective LinDistFlow problems with consensus ADMM, choosing the
tie-line powers and PV reactive outputs of every hour. The lower level dispatches each microgrid over
the day against those tie-line powers.

This package includes the following functionalities:
- Network and scenario loading, validation and the bundled IEEE 33-bus case.
- Newton-Raphson AC power flow and voltage sensitivities.
- Sensitivity-based zoning with connectivity repair.
- An interior-point solver for convex quadratic programs with quadratic constraints.
- Zone subproblems, ADMM with fixed, adaptive and counter-gated penalty strategies.
- Microgrid economic dispatch.
- The end-to-end pipeline and its result files.

Functions:
- ieee33_case / ieee33_scenario: The bundled case.
- load_network / load_scenario / save_network: Scenario files.
- solve_pf / sensitivity: AC power flow and sensitivities.
- partition: Zoning.
- solve: The convex kernel.
- run_admm: Consensus ADMM.
- build_dispatch / solve_dispatch: Microgrid dispatch.
- run / compare_centralized / benchmark_penalty: The pipeline.
- write_results / emit_plots: Output files.

Attributes:
- __version__: The version of the package, retrieved from the package metadata.
- __all__: A list of all public symbols that the module exports.

Example usage:
    from wolfsoftware.zonal_dispatch import ieee33_scenario, run, write_results

    net, scenario = ieee33_scenario()
    report = run(net, scenario, {'strategy': 'improved'})
    write_results(report, 'results')
"""

import importlib.metadata

from .admm import AdmmConfig, AdmmResult, run as run_admm
from .cases import ieee33_case, ieee33_scenario
from .dispatch import MgSchedule, build_dispatch, evaluate_cost, solve_dispatch
from .exceptions import (
    ConfigurationError, DegenerateBoundsError, DispatchInfeasibleError, InfeasibleProblemError, IterationLimitError, NetworkValidationError,
    PipelineError, PowerFlowDivergenceError, ScenarioParseError, SingularJacobianError, SubproblemError, UnboundedProblemError, ZonalDispatchError
)
from .kernel import ConvexProgram, QuadraticConstraint, solve, solve_lp, verify_kkt
from .network import Branch, Bus, Network, PvUnit, validate
from .outputs import emit_plots, write_results
from .pipeline import RunReport, benchmark_penalty, compare_centralized, run
from .powerflow import PfSolution, bus_injections, sensitivity, solve_pf
from .scenario import MgConfig, ScenarioConfig, load_network, load_scenario, save_network
from .zoning import ZonePartition, partition

try:
    __version__: str = importlib.metadata.version('wolfsoftware.zonal_dispatch')
except importlib.metadata.PackageNotFoundError:
    __version__ = 'unknown'

__all__: list[str] = [
    'AdmmConfig',
    'AdmmResult',
    'Branch',
    'Bus',
    'ConvexProgram',
    'MgConfig',
    'MgSchedule',
    'Network',
    'PfSolution',
    'PvUnit',
    'QuadraticConstraint',
    'RunReport',
    'ScenarioConfig',
    'ZonePartition',
    'benchmark_penalty',
    'build_dispatch',
    'bus_injections',
    'compare_centralized',
    'emit_plots',
    'evaluate_cost',
    'ieee33_case',
    'ieee33_scenario',
    'load_network',
    'load_scenario',
    'partition',
    'run',
    'run_admm',
    'save_network',
    'sensitivity',
    'solve',
    'solve_dispatch',
    'solve_lp',
    'solve_pf',
    'validate',
    'verify_kkt',
    'write_results',
    'ConfigurationError',
    'DegenerateBoundsError',
    'DispatchInfeasibleError',
    'InfeasibleProblemError',
    'IterationLimitError',
    'NetworkValidationError',
    'PipelineError',
    'PowerFlowDivergenceError',
    'ScenarioParseError',
    'SingularJacobianError',
    'SubproblemError',
    'UnboundedProblemError',
    'ZonalDispatchError',
]
