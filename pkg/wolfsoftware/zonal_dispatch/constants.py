"""
This module defines default constants used across the zonal dispatch package.

Constants are grouped by the stage that consumes them: the network model, the AC power flow,
the convex kernel, the upper-level zone problems, the ADMM coordinator, the microgrid dispatch
and the orchestrator. Every configuration key that a caller may omit falls back to a value here.

Example usage:
    from .constants import DEFAULT_RHO0, DEFAULT_EPS

    rho = config.get('rho0', DEFAULT_RHO0)
"""

import os

# Threads
DEFAULT_CPU_COUNT = 4  # Sensible default if os.cpu_count() returns None
DEFAULT_THREADS: int = (os.cpu_count() or DEFAULT_CPU_COUNT) * 2

# Network model
DEFAULT_HORIZON: int = 24
DEFAULT_DELTA_T: float = 1.0  # hours
DEFAULT_V_REF: float = 1.0
DEFAULT_EPS_V: float = 0.05
DEFAULT_BASE_MVA: float = 10.0
DEFAULT_BASE_KV: float = 12.66
SCENARIO_SCHEMA_VERSION: int = 1
BUS_KINDS: tuple = ('slack', 'pq', 'mg_pcc')

# AC power flow
DEFAULT_PF_TOL: float = 1e-8
DEFAULT_PF_MAX_ITER: int = 30
DEFAULT_FD_STEP: float = 1e-5

# Convex kernel
DEFAULT_KERNEL_TOL: float = 1e-8
DEFAULT_KERNEL_MAX_ITER: int = 100
KERNEL_STEP_FRACTION: float = 0.99
KERNEL_UNBOUNDED_NORM: float = 1e10
KERNEL_CERTIFICATE_TOL: float = 1e-7
KERNEL_POLISH_PASSES: int = 5

# Upper level
DEFAULT_V_SPEC: float = 1.0
DEFAULT_PV_POWER_FACTOR: float = 0.95
DEFAULT_PCC_CAP_KW: float = 500.0
DEFAULT_Q_PCC_RATIO: float = 0.4
DEFAULT_PCC_BOUNDS: str = 'ramp_safe'
DEFAULT_VOLTAGE_BOUNDS: str = 'relaxed'
VOLTAGE_BOUND_MODES: tuple = ('relaxed', 'elastic', 'hard')
VOLTAGE_RELAXATION_MARGIN: float = 1e-4  # p.u.^2 added to every widened band
VOLTAGE_VIOLATION_TOL: float = 1e-6  # p.u.^2
DEFAULT_VOLTAGE_PENALTY: float = 1e4
DEFAULT_PARETO_WEIGHT: float = 1e-3
DEFAULT_FLOW_LIMIT_PU: float = 1.0
BOUNDS_GUARD: float = 1e-9

# ADMM
DEFAULT_RHO0: float = 250.0
DEFAULT_EPS: float = 1e-6
DEFAULT_MAX_ITER: int = 500
DEFAULT_STRATEGY: str = 'improved'
DEFAULT_SIGMA: int = 3
DEFAULT_MU_RATIO: float = 10.0
PENALTY_STRATEGIES: tuple = ('fixed', 'adaptive', 'improved')

# Microgrid dispatch
DEFAULT_K_OP_MT: float = 0.0126  # $/kWh
DEFAULT_K_OP_DE: float = 0.0063  # $/kWh
DEFAULT_ETA_MT: float = 0.3
DEFAULT_L_G: float = 9.7  # kWh/m3
DEFAULT_DE_ALPHA: float = 2.6667
DEFAULT_DE_BETA: float = 0.1637
DEFAULT_DE_GAMMA: float = 0.00015
DEFAULT_DE_K_FU: float = 10.0  # $ per fuel unit
DEFAULT_BESS_ZETA: float = 0.123  # $/kW
DEFAULT_BESS_ETA: float = 0.92
DEFAULT_SOC_MIN: float = 0.2
DEFAULT_SOC_MAX: float = 0.9
DEFAULT_SOC0: float = 0.5
DEFAULT_P_INIT: float = 10.0  # kW
BESS_EXCLUSIVE_TOL: float = 1e-6  # kW; charge and discharge both above this count as simultaneous

# Outputs
RESULTS_SCHEMA_VERSION: int = 1
LOG_FLOOR: float = 1e-16

# CLI exit codes
EXIT_OK: int = 0
EXIT_VALIDATION: int = 2
EXIT_INFEASIBLE: int = 3
EXIT_NON_CONVERGENCE: int = 4
