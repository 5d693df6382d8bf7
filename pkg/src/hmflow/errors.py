"""Exception types shared across the package."""


class HmflowError(Exception):
    """Base class for all package errors."""


class KindMismatch(HmflowError, ValueError):
    """Points or maps from incompatible target kinds were combined."""


class ShapeMismatch(HmflowError, ValueError):
    """Grid maps with different domains or array shapes were combined."""


class UnsupportedOnTarget(HmflowError, ValueError):
    """Operation is not defined on this target kind."""


class NonUniqueGeodesic(HmflowError, ValueError):
    """The requested geodesic is not unique (antipodal endpoints)."""


class EmptyInput(HmflowError, ValueError):
    """A nonempty point collection was required."""


class StepTooLarge(HmflowError, ValueError):
    """Explicit time step violates the stability restriction."""


class InvalidTime(HmflowError, ValueError):
    """Backward heat kernel evaluated at or after its center time."""


class ScaleOutOfRange(HmflowError, ValueError):
    """Requested frequency scale lies outside the kernel validity window."""


class DegenerateFrequency(HmflowError, ValueError):
    """Frequency denominator H vanishes (map constant at the probed level)."""


class DomainTooSmall(HmflowError, ValueError):
    """Domain does not admit the requested multi-scale measurement."""


class MaxSweepsExceeded(HmflowError, RuntimeError):
    """Iterative solver exhausted its sweep budget before converging.

    The partially converged solution, when available, is attached as
    ``exc.partial``.
    """

    def __init__(self, message, partial=None):
        super().__init__(message)
        self.partial = partial


class ConfigNotFound(HmflowError, FileNotFoundError):
    """Run configuration file does not exist."""


class ConfigInvalid(HmflowError, ValueError):
    """Run configuration failed schema validation."""
