"""
This test module checks the package surface of wolfsoftware.zonal_dispatch.

Functions:
- test_version: Tests that a version is defined for the package.
- test_exports: Tests that every name in __all__ resolves.
- test_exit_codes: Tests that each error family maps to its command line exit code.
- test_wrapped_errors_keep_exit_code: SubproblemError and PipelineError report the exit code of their cause.

Dependencies:
- pytest: Used for writing and running tests.
- importlib.metadata: Used for retrieving package metadata.
- wolfsoftware.zonal_dispatch: The package being tested.

Example usage:
    To run these tests, use the following command:
    pytest test_zonal_dispatch.py
"""

from typing import Optional

import importlib.metadata

import wolfsoftware.zonal_dispatch as zd
from wolfsoftware.zonal_dispatch import (
    ConfigurationError, DispatchInfeasibleError, InfeasibleProblemError, IterationLimitError, NetworkValidationError, PipelineError,
    PowerFlowDivergenceError, ScenarioParseError, SubproblemError
)


def test_version() -> None:
    """
    Test that a version is defined.

    Should return the version of the package.
    """
    version: Optional[str] = None

    try:
        version = importlib.metadata.version('wolfsoftware.zonal_dispatch')
    except importlib.metadata.PackageNotFoundError:
        version = None

    assert version is not None, "Version should be set"  # nosec: B101
    assert version != 'unknown', f"Expected version, but got {version}"  # nosec: B101


def test_exports() -> None:
    """Every exported name should be importable from the package."""
    missing = [name for name in zd.__all__ if not hasattr(zd, name)]

    assert not missing, f"Unresolved exports: {missing}"  # nosec: B101
    assert len(set(zd.__all__)) == len(zd.__all__)  # nosec: B101


def test_exit_codes() -> None:
    """Validation errors map to 2, infeasibility to 3, non-convergence to 4."""
    assert ScenarioParseError().exit_code == 2  # nosec: B101
    assert NetworkValidationError(['x']).exit_code == 2  # nosec: B101
    assert ConfigurationError().exit_code == 2  # nosec: B101
    assert InfeasibleProblemError().exit_code == 3  # nosec: B101
    assert DispatchInfeasibleError('MG1', 4).exit_code == 3  # nosec: B101
    assert PowerFlowDivergenceError().exit_code == 4  # nosec: B101
    assert IterationLimitError().exit_code == 4  # nosec: B101


def test_wrapped_errors_keep_exit_code() -> None:
    """SubproblemError and PipelineError report the exit code of their cause."""
    cause: IterationLimitError = IterationLimitError()

    assert SubproblemError(2, 7, cause).exit_code == 4  # nosec: B101
    assert PipelineError('admm', 3, SubproblemError(2, 7, InfeasibleProblemError())).exit_code == 3  # nosec: B101
    assert "hour 3" in str(PipelineError('admm', 3, cause))  # nosec: B101
