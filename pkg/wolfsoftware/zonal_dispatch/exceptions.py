"""
This module defines custom exceptions for the zonal dispatch package.

Every exception derives from ZonalDispatchError and carries the process exit code the command line
interface returns when the exception reaches it.

Exceptions:
- ZonalDispatchError: Base class for all package errors.
- ScenarioParseError: Raised when a scenario file cannot be parsed.
- NetworkValidationError: Raised when a parsed network violates a model invariant.
- ConfigurationError: Raised for invalid configuration values or violated preconditions.
- PowerFlowDivergenceError: Raised when Newton-Raphson does not converge.
- SingularJacobianError: Raised when the power-flow Jacobian cannot be factorised.
- InfeasibleProblemError: Raised when a convex program is infeasible.
- UnboundedProblemError: Raised when a convex program is unbounded.
- IterationLimitError: Raised when the interior-point method runs out of iterations.
- DegenerateBoundsError: Raised when membership bounds leave no room between f_min and f_max.
- DispatchInfeasibleError: Raised when a microgrid cannot follow its tie-line schedule.
- SubproblemError: Raised when a zone subproblem fails inside the ADMM loop.
- PipelineError: Raised when a pipeline stage fails for a given hour.

Example usage:
    from .exceptions import NetworkValidationError

    violations = validate(net)
    if violations:
        raise NetworkValidationError(violations)
"""

from typing import List, Optional

from .constants import EXIT_INFEASIBLE, EXIT_NON_CONVERGENCE, EXIT_VALIDATION


class ZonalDispatchError(Exception):
    """
    Base exception for the zonal dispatch package.

    Attributes:
        exit_code (int): The process exit code used by the command line interface.
    """

    exit_code: int = 1


class ScenarioParseError(ZonalDispatchError):
    """
    Custom exception raised when a scenario file cannot be parsed.

    Attributes:
        message (str): A human-readable string describing the exception.
        line (Optional[int]): The line of the document where parsing failed, if known.
        field (Optional[str]): The dotted path of the offending field, if known.
    """

    exit_code = EXIT_VALIDATION

    def __init__(self, message: str = "Unable to parse scenario file", line: Optional[int] = None, field: Optional[str] = None) -> None:
        """
        Initialize the ScenarioParseError instance.

        Arguments:
            message (str): A human-readable string describing the exception.
            line (Optional[int]): The line number at which parsing failed.
            field (Optional[str]): The dotted path of the field that could not be read.

        Example:
            raise ScenarioParseError("expected a number", field="network.branches[3].r")
        """
        context: List[str] = []
        if line is not None:
            context.append(f"line {line}")
        if field is not None:
            context.append(f"field {field}")
        if context:
            message = f"{message} ({', '.join(context)})"
        super().__init__(message)
        self.line: Optional[int] = line
        self.field: Optional[str] = field


class NetworkValidationError(ZonalDispatchError):
    """
    Custom exception raised when a network violates one or more model invariants.

    Attributes:
        violations (List[str]): One entry per violated invariant.
    """

    exit_code = EXIT_VALIDATION

    def __init__(self, violations: Optional[List[str]] = None) -> None:
        """
        Initialize the NetworkValidationError instance.

        Arguments:
            violations (Optional[List[str]]): The violations reported by validate().

        Example:
            raise NetworkValidationError(["multiple slack buses: 1, 5"])
        """
        self.violations: List[str] = list(violations or [])
        super().__init__("Network validation failed: " + ('; '.join(self.violations) or 'unknown violation'))


class ConfigurationError(ZonalDispatchError):
    """
    Custom exception raised for invalid configuration values or violated preconditions.

    Attributes:
        message (str): A human-readable string describing the exception.
    """

    exit_code = EXIT_VALIDATION

    def __init__(self, message: str = "Invalid configuration") -> None:
        """
        Initialize the ConfigurationError instance.

        Arguments:
            message (str): A human-readable string describing the exception.
        """
        super().__init__(message)


class PowerFlowDivergenceError(ZonalDispatchError):
    """
    Custom exception raised when Newton-Raphson fails to converge.

    Attributes:
        mismatch (float): The maximum power mismatch at the last iterate [p.u.].
        iterations (int): The number of iterations performed.
    """

    exit_code = EXIT_NON_CONVERGENCE

    def __init__(self, mismatch: float = float('nan'), iterations: int = 0) -> None:
        """
        Initialize the PowerFlowDivergenceError instance.

        Arguments:
            mismatch (float): The final mismatch [p.u.].
            iterations (int): The number of iterations performed.
        """
        super().__init__(f"Power flow did not converge after {iterations} iterations (final mismatch {mismatch:.3e} p.u.)")
        self.mismatch: float = mismatch
        self.iterations: int = iterations


class SingularJacobianError(ZonalDispatchError):
    """
    Custom exception raised when the power-flow Jacobian is singular.

    Attributes:
        iteration (Optional[int]): The Newton iteration at which factorisation failed.
    """

    exit_code = EXIT_NON_CONVERGENCE

    def __init__(self, iteration: Optional[int] = None) -> None:
        """
        Initialize the SingularJacobianError instance.

        Arguments:
            iteration (Optional[int]): The Newton iteration at which factorisation failed, None for a converged state.
        """
        where: str = f"at Newton iteration {iteration}" if iteration is not None else "at the converged state"
        super().__init__(f"Power-flow Jacobian is singular {where}")
        self.iteration: Optional[int] = iteration


class InfeasibleProblemError(ZonalDispatchError):
    """
    Custom exception raised when a convex program has no feasible point.

    Attributes:
        residual (float): The residual of the infeasibility certificate.
    """

    exit_code = EXIT_INFEASIBLE

    def __init__(self, message: str = "Problem is infeasible", residual: float = float('nan')) -> None:
        """
        Initialize the InfeasibleProblemError instance.

        Arguments:
            message (str): A human-readable string describing the exception.
            residual (float): The certificate residual.
        """
        super().__init__(message)
        self.residual: float = residual


class UnboundedProblemError(ZonalDispatchError):
    """
    Custom exception raised when a convex program is unbounded below.

    Attributes:
        message (str): A human-readable string describing the exception.
    """

    exit_code = EXIT_INFEASIBLE

    def __init__(self, message: str = "Problem is unbounded") -> None:
        """
        Initialize the UnboundedProblemError instance.

        Arguments:
            message (str): A human-readable string describing the exception.
        """
        super().__init__(message)


class IterationLimitError(ZonalDispatchError):
    """
    Custom exception raised when the interior-point method exhausts its iteration budget.

    Attributes:
        residual (float): The KKT residual at the last iterate.
    """

    exit_code = EXIT_NON_CONVERGENCE

    def __init__(self, message: str = "Iteration limit reached", residual: float = float('nan')) -> None:
        """
        Initialize the IterationLimitError instance.

        Arguments:
            message (str): A human-readable string describing the exception.
            residual (float): The final KKT residual.
        """
        super().__init__(f"{message} (final KKT residual {residual:.3e})")
        self.residual: float = residual


class DegenerateBoundsError(ZonalDispatchError):
    """
    Custom exception raised when f_max does not exceed f_min for a membership function.

    Attributes:
        message (str): A human-readable string describing the exception.
    """

    exit_code = EXIT_INFEASIBLE

    def __init__(self, message: str = "Degenerate objective bounds: f_max must exceed f_min; compute bounds with compute_objective_bounds") -> None:
        """
        Initialize the DegenerateBoundsError instance.

        Arguments:
            message (str): A human-readable string describing the exception.
        """
        super().__init__(message)


class DispatchInfeasibleError(ZonalDispatchError):
    """
    Custom exception raised when a microgrid cannot follow its tie-line schedule.

    Attributes:
        hour (Optional[int]): The first hour (0-based) at which the schedule cannot be met, if identified.
        mg (Optional[str]): The microgrid name.
    """

    exit_code = EXIT_INFEASIBLE

    def __init__(self, mg: Optional[str] = None, hour: Optional[int] = None, reason: str = "tie-line schedule cannot be met") -> None:
        """
        Initialize the DispatchInfeasibleError instance.

        Arguments:
            mg (Optional[str]): The microgrid name.
            hour (Optional[int]): The binding hour.
            reason (str): What could not be satisfied.
        """
        where: str = f" at hour {hour}" if hour is not None else ""
        super().__init__(f"Dispatch of {mg or 'microgrid'} is infeasible{where}: {reason}")
        self.mg: Optional[str] = mg
        self.hour: Optional[int] = hour


class SubproblemError(ZonalDispatchError):
    """
    Custom exception raised when a zone subproblem fails during an ADMM run.

    Attributes:
        zone (int): The zone whose subproblem failed.
        iteration (int): The ADMM iteration.
    """

    exit_code = EXIT_INFEASIBLE

    def __init__(self, zone: int, iteration: int, cause: Optional[Exception] = None) -> None:
        """
        Initialize the SubproblemError instance.

        Arguments:
            zone (int): The zone whose subproblem failed.
            iteration (int): The ADMM iteration.
            cause (Optional[Exception]): The underlying solver error.
        """
        super().__init__(f"Subproblem of zone {zone} failed at ADMM iteration {iteration}: {cause}")
        self.zone: int = zone
        self.iteration: int = iteration
        if isinstance(cause, ZonalDispatchError):
            self.exit_code = cause.exit_code


class PipelineError(ZonalDispatchError):
    """
    Custom exception raised when a pipeline stage fails.

    Attributes:
        stage (str): The pipeline stage that failed.
        hour (Optional[int]): The hour being processed, if any.
    """

    def __init__(self, stage: str, hour: Optional[int] = None, cause: Optional[Exception] = None) -> None:
        """
        Initialize the PipelineError instance.

        Arguments:
            stage (str): The pipeline stage that failed.
            hour (Optional[int]): The hour being processed.
            cause (Optional[Exception]): The underlying error; its exit code is inherited.
        """
        where: str = f" at hour {hour}" if hour is not None else ""
        super().__init__(f"Stage '{stage}' failed{where}: {cause}")
        self.stage: str = stage
        self.hour: Optional[int] = hour
        if isinstance(cause, ZonalDispatchError):
            self.exit_code = cause.exit_code
