"""Exception types shared by every module."""


class AccentLocError(Exception):
    """Base class for all errors raised by this package."""


class SchemaError(AccentLocError, ValueError):
    """Malformed input record or inconsistent structure."""


class GeometryError(AccentLocError, ValueError):
    """Invalid polygon or tessellation."""


class DegenerateDensityError(AccentLocError, ValueError):
    """A density (or posterior) has zero, negative or non-finite mass."""


class InvalidDensityError(AccentLocError, ValueError):
    """A density cannot be used in the requested way (e.g. pointwise evaluation of deltas)."""


class OutOfRangeError(AccentLocError, ValueError):
    pass


class MethodError(AccentLocError, ValueError):
    pass


class FamilyMismatchError(AccentLocError, ValueError):
    """Reference and hypothesis (or trials of one run) are of different families."""


class InsufficientDataError(AccentLocError, ValueError):
    pass


class DomainError(AccentLocError, ValueError):
    pass
