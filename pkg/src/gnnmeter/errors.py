"""Exception types raised across the package."""


class GnnMeterError(Exception):
    """Base class for all package errors."""


class InvalidVertex(GnnMeterError):
    """An edge endpoint lies outside [0, n)."""


class SelfLoopInput(GnnMeterError):
    """Input edge lists must not contain self-loops; normalization owns the diagonal."""


class ZeroDegree(GnnMeterError):
    """Random-walk normalization requires every vertex to have at least one neighbor."""


class InvalidPartCount(GnnMeterError):
    """Partition count must satisfy 1 <= P <= n."""


class EmptyTargets(GnnMeterError):
    """Neighborhood sampling needs at least one target vertex."""


class ShapeError(GnnMeterError):
    """Operand dimensions do not match."""


class MissingContext(GnnMeterError):
    """A per-edge function required neighborhood context that was not supplied."""


class NoLocalFormulation(GnnMeterError):
    """The model cannot be executed vertex/edge-wise."""


class NoGlobalFormulation(GnnMeterError):
    """The model cannot be executed as whole-matrix algebra."""


class EmptyLabels(GnnMeterError):
    """The loss needs at least one labeled vertex."""


class NoCache(GnnMeterError):
    """Backward pass requires the forward activations to be cached."""


class SolveFailed(GnnMeterError):
    """Iterative solver did not reach the requested residual."""

    def __init__(self, message, report=None):
        super().__init__(message)
        self.report = report


class NotSymmetric(GnnMeterError):
    """Rational operator chains require a symmetric (sym_norm) operator."""


class InvalidStaleness(GnnMeterError):
    """Staleness bounds outside the admissible ranges."""


class SimulationDeadlock(GnnMeterError):
    """No runnable worker although work remains; carries blocked-dependency info."""

    def __init__(self, message, blocked=None):
        super().__init__(message)
        self.blocked = blocked or []


class ConfigError(GnnMeterError):
    """Bad experiment configuration (CLI exit code 1)."""
