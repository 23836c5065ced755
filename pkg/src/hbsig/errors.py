"""Exception hierarchy.  Every failure the library raises on purpose derives from HbsError."""


class HbsError(Exception):
    """Base class for library errors."""


class FormatError(HbsError):
    """Unreadable, corrupt or unsupported file."""


class GeometryMismatch(HbsError):
    """Two grids that should agree do not."""


class NotSimplyConnected(HbsError):
    """The foreground is not a single simply connected region away from the border."""

    def __init__(self, status, message=None):
        self.status = status
        super().__init__(message or f"shape is not simply connected: {status}")


class DegeneratePolygon(HbsError):
    pass


class ZipperBreakdown(HbsError):
    """Non-finite values or a broken boundary correspondence in the conformal stage."""


class NonMonotoneWelding(HbsError):
    pass


class ConvergenceError(HbsError):
    pass


class DegenerateExtension(HbsError):
    """The harmonic extension has a vanishing holomorphic derivative somewhere on the grid."""


class SolverError(HbsError):
    pass


class ReconstructionFlip(HbsError):
    """The reconstructed boundary is not a simple curve."""


class GenerationError(HbsError):
    """A random construction could not satisfy its constraints within the retry budget."""
