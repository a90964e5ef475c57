"""Exception types shared by every module (including both engine backends)."""


class FirefrontError(Exception):
    """Base class for all package errors."""


class OutOfDomainError(FirefrontError):
    """Point lies outside the evaluable terrain / scenario domain."""


class ParseError(FirefrontError):
    """Field-expression syntax error, carries the byte offset."""

    def __init__(self, position: int, message: str):
        super().__init__(f"at offset {position}: {message}")
        self.position = position
        self.message = message


class EvalError(FirefrontError):
    """Field-expression evaluation failed (domain error or nonfinite result)."""


class FieldRangeError(FirefrontError):
    """An environment field violated its range (a,h,h' > 0; 0 <= eps < 1)."""


class ZeroVectorError(FirefrontError):
    """Nonzero tangent vector required."""


class NotApplicableError(FirefrontError):
    """Operation preconditions not met (e.g. slope convexity test with wind)."""


class SingularTensorError(FirefrontError):
    """Fundamental tensor not invertible; direction is not strongly convex."""


class NoRootError(FirefrontError):
    """F-orthogonal direction search found no sign change."""


class AmbiguousRootError(FirefrontError):
    """F-orthogonal direction search found more than two sign changes."""


class NonConvexMetricError(FirefrontError):
    """Metric fails strong convexity on the audited region."""


class DegenerateCurveError(FirefrontError):
    """Ignition curve has repeated points or no enclosed area."""


class EmptyFrontError(FirefrontError):
    """No live trajectories at the requested output time."""


class TimeDependentMetricError(FirefrontError):
    """Grid oracle requires time-independent fields."""


class ConfigError(FirefrontError):
    """Scenario configuration is missing or malformed; names the key."""


class SurfaceAngleWarning(UserWarning):
    """Aerial-to-surface angle conversion left the unit circle by > 1e-3."""
