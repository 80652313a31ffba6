"""Exception types shared across the package."""


class StretchPercError(Exception):
    """Base class for all package errors."""


class ParameterError(StretchPercError, ValueError):
    """Invalid model or distribution parameter."""


class WindowError(StretchPercError, IndexError):
    """Query outside the finite window of an environment, table or sample."""


class GeometryError(StretchPercError, ValueError):
    """Malformed lattice object (non nearest-neighbour edge, bad corridor family...)."""


class AlignmentError(StretchPercError, ValueError):
    """Window not aligned to the requested scale."""


class InsufficientDataError(StretchPercError, ValueError):
    """Input too short to define the requested quantity."""


class PreconditionError(StretchPercError, ValueError):
    """Operation called outside its documented precondition."""


class ConditioningError(StretchPercError, RuntimeError):
    """Rejection sampling exhausted its retry budget."""


class ResourceError(StretchPercError, RuntimeError):
    """Requested computation exceeds a configured size limit."""
