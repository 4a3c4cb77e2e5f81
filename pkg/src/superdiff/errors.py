"""Exception types shared across the package."""


class SuperdiffError(Exception):
    """Base class for all package errors."""


class EmptyConfig(SuperdiffError):
    """Table configuration contains no scatterers."""


class OverlappingScatterers(SuperdiffError):
    """Scatterer closures intersect (directly or through a periodic image)."""


class FlightCapExceeded(SuperdiffError):
    """A free flight traversed more lattice cells than the configured cap."""

    def __init__(self, msg, step=None):
        super().__init__(msg)
        self.step = step


class TangentialGrazing(SuperdiffError):
    """Collision too close to tangency for reliable reflection; resample."""

    def __init__(self, msg, step=None):
        super().__init__(msg)
        self.step = step


class InsufficientTail(SuperdiffError):
    """Too few exceedances beyond the fit window to estimate the tail."""


class DegenerateData(SuperdiffError):
    """All samples identical; no tail to fit."""


class InsufficientData(SuperdiffError):
    """Not enough occurrences of the requested event."""


class RegimeViolation(SuperdiffError):
    """(m, R) pair breaks the truncation-regime preconditions."""


class LevelTooSmall(SuperdiffError):
    """Block decomposition requested at a level where nominal intervals < 1."""


class VersionMismatch(SuperdiffError):
    """Checkpoint written by a different code version or run layout."""


class CorruptCheckpoint(SuperdiffError):
    """Checkpoint content hash does not match its payload."""


class SchemaMismatch(SuperdiffError):
    """Input file does not match the schema expected by the consumer."""
