"""Exception hierarchy for the trajectory representation toolkit."""

from typing import Dict, Optional


class TrajectoryToolkitError(Exception):
    """Base class for all toolkit errors."""

    exit_code = 1


class DomainError(TrajectoryToolkitError, ValueError):
    """A value lies outside the domain of a function."""

    exit_code = 2


class ArgumentError(TrajectoryToolkitError, ValueError):
    """A call was made with inconsistent or empty arguments."""

    exit_code = 2


class ParameterError(TrajectoryToolkitError, ValueError):
    """Noise or prior parameters violate their invariants."""

    exit_code = 2

    def __init__(self, message: str, sample_index: Optional[int] = None):
        if sample_index is not None:
            message = f"{message} (sample {sample_index})"
        super().__init__(message)
        self.sample_index = sample_index


class NumericalError(TrajectoryToolkitError, ArithmeticError):
    """A linear system is too ill-conditioned to solve reliably."""

    exit_code = 3

    def __init__(self, message: str, trajectory: Optional[str] = None):
        if trajectory is not None:
            message = f"{message} [trajectory {trajectory}]"
        super().__init__(message)
        self.trajectory = trajectory


class RankError(TrajectoryToolkitError, ArithmeticError):
    """A constraint system is singular."""

    exit_code = 2


class HyperparameterError(TrajectoryToolkitError, ArithmeticError):
    """The marginal covariance could not be factorized."""

    exit_code = 3


class OptimizerError(TrajectoryToolkitError, RuntimeError):
    """The hyperparameter optimizer failed persistently."""

    exit_code = 3

    def __init__(self, message: str, dump: Optional[Dict] = None):
        super().__init__(message)
        self.dump = dump or {}


class SchemaError(TrajectoryToolkitError, ValueError):
    """An input file does not match its schema."""

    exit_code = 2

    def __init__(self, message: str, path: Optional[str] = None, line: Optional[int] = None):
        location = ""
        if path is not None:
            location = f"{path}"
            if line is not None:
                location += f":{line}"
            location += ": "
        super().__init__(f"{location}{message}")
        self.path = path
        self.line = line


class ConfigMismatchError(TrajectoryToolkitError, ValueError):
    """Fitted hyperparameters do not match the requested run configuration."""

    exit_code = 4
