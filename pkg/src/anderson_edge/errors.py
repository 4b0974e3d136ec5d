"""Exception hierarchy shared by every stage of the pipeline."""

from __future__ import annotations


class AndersonEdgeError(Exception):
    """Base class for all errors raised by the package."""


# potential
class BumpOutsideCell(AndersonEdgeError, ValueError):
    pass


class EmptySpec(AndersonEdgeError, ValueError):
    pass


class ExplosionGuard(AndersonEdgeError, RuntimeError):
    pass


# operators
class PeriodMismatch(AndersonEdgeError, ValueError):
    pass


class IncompatibleDimensions(AndersonEdgeError, ValueError):
    pass


class SizeMismatch(AndersonEdgeError, ValueError):
    pass


# eigen
class NonFiniteEntry(AndersonEdgeError, ValueError):
    pass


class ConvergenceFailure(AndersonEdgeError, RuntimeError):
    def __init__(self, message: str, residual: float = float("nan")):
        super().__init__(f"{message} (residual {residual:.3e})")
        self.residual = residual


# floquet
class FlatBandSuspected(AndersonEdgeError, RuntimeError):
    pass


class DegenerateMinimum(AndersonEdgeError, RuntimeError):
    pass


class SandwichViolation(AndersonEdgeError, RuntimeError):
    def __init__(self, message: str, offending=()):
        super().__init__(message)
        self.offending = list(offending)


class TopologyChange(UserWarning):
    """Number of band minima changed along a coupling ladder (non-fatal)."""


# coupling
class MismatchedModel(AndersonEdgeError, ValueError):
    pass


class NotDefiniteAtZero(AndersonEdgeError, RuntimeError):
    pass


# verifier
class NotApplicable(AndersonEdgeError, RuntimeError):
    pass


class NotFixedSign(AndersonEdgeError, ValueError):
    pass


class GapTooSmall(AndersonEdgeError, RuntimeError):
    pass


# cli
class ConfigError(AndersonEdgeError, ValueError):
    pass


class MissingUpstream(AndersonEdgeError, RuntimeError):
    pass
