"""Exception types raised across the package."""


class CausalKitError(Exception):
    """Base class for all package errors."""


class DomainError(CausalKitError):
    """A point, region or curve lies outside the chart (or inside an obstacle)."""

    def __init__(self, message, point=None):
        super().__init__(message)
        self.point = point


class NonFiniteMetric(CausalKitError):
    pass


class SignatureCollapse(CausalKitError):
    """A field lost its Lorentzian signature at some sampled point."""

    def __init__(self, message, witness=None):
        super().__init__(message)
        self.witness = witness


class ConeOrderViolation(CausalKitError):
    """Two fields are not cone-ordered where an ordering is required."""

    def __init__(self, message, witness=None):
        super().__init__(message)
        self.witness = witness


class ZeroLengthCurve(CausalKitError):
    pass


class ParamMismatch(CausalKitError):
    pass


class NoAccumulation(CausalKitError):
    pass


class LipschitzUnbounded(CausalKitError):
    def __init__(self, message, index=None, lipschitz=None):
        super().__init__(message)
        self.index = index
        self.lipschitz = lipschitz


class NotConvergent(CausalKitError):
    pass


class InconclusiveBounded(CausalKitError):
    """A reach or diamond computation touched the grid boundary."""


class NotCausallyRelated(CausalKitError):
    pass


class NonConvergence(CausalKitError):
    def __init__(self, message, best=None):
        super().__init__(message)
        self.best = best


class EmptySet(CausalKitError):
    pass


class ScenarioError(CausalKitError):
    pass
