"""Exception types shared across the toolkit."""


class MagstepError(Exception):
    """Base class."""


class ValidationError(MagstepError, ValueError):
    """Input violates a precondition."""


class ZeroField(ValidationError):
    pass


class MeshTooCoarse(ValidationError):
    pass


class WrongOrientation(ValidationError):
    pass


class NotConverged(MagstepError):
    """An iterative solver did not reach its tolerance."""


class NoInteriorMinimum(NotConverged):
    pass


class NoRoot(NotConverged):
    pass


class QuadratureUnresolved(NotConverged):
    pass


class DegenerateEigenvalue(MagstepError):
    pass


class NoBoundState(MagstepError):
    pass
