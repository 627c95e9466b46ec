"""Exception types shared across the package."""


class ProjclassError(Exception):
    """Base class for all package-specific errors."""


class ShapeMismatch(ProjclassError):
    """Tensor shapes are inconsistent for the requested operation."""


class EmptyMask(ProjclassError):
    """A masked loss was given a mask that excludes every entry."""


class NonScalarOutput(ProjclassError):
    """Gradient checking requires a scalar-valued fragment."""


class DegenerateMesh(ProjclassError):
    """No triangle of the mesh survives projection."""


class EmptyDirectory(ProjclassError):
    """A background image directory contains no readable images."""


class UnreadableImage(ProjclassError):
    """An image file could not be parsed."""


class IoFailure(ProjclassError):
    """Reading or writing an artifact file failed."""


class DatasetMissingClass(ProjclassError):
    """A training set lacks samples of a required class."""


class NoneClassGiven(ProjclassError):
    """A positive-class-only operation received the None class."""


class AlphaMassZero(ProjclassError):
    """The pooled projected alpha sums to zero: nothing was projected."""


class InsufficientCoverage(ProjclassError):
    """A sample offers no patch window with the required alpha coverage."""
