"""Exception hierarchy shared across the package."""

__all__ = [
    "TotemError",
    "SpaceError",
    "DataError",
    "OperatorError",
    "NestingError",
    "ProjectionError",
    "IncompatibleReferenceError",
    "SingularJacobianError",
    "NonConvergenceError",
    "ConfigError",
]


class TotemError(Exception):
    """Base class for all errors raised by this package."""


class SpaceError(TotemError, ValueError):
    """Invalid attribute domain or entity-space declaration."""


class DataError(TotemError, ValueError):
    """Tabular input that violates the declared entity space."""


class OperatorError(TotemError, ValueError):
    """Invalid characteristic operator or constructing element."""


class NestingError(OperatorError):
    """Two elements were required to be nested but are not."""


class ProjectionError(TotemError, RuntimeError):
    """A projection solve could not be carried out."""


class IncompatibleReferenceError(ProjectionError):
    """Reference distribution assigns zero weight to an observed entity."""


class SingularJacobianError(ProjectionError):
    """Constraint Jacobian is numerically singular."""


class NonConvergenceError(ProjectionError):
    """Iteration budget exhausted before reaching the residual tolerance."""


class ConfigError(TotemError, ValueError):
    """Invalid analysis configuration; `path` names the offending field."""

    def __init__(self, path, message):
        self.path = path
        super().__init__(f"{path}: {message}")
