"""Exception and warning types shared across the package."""


class LayoutError(Exception):
    """Base class for all roomlayout errors."""


class IdenticalLines(LayoutError):
    """Two lines coincide (proportional coefficients), intersection undefined."""


class CoincidentPoints(LayoutError):
    """Two points coincide, the joining line is undefined."""


class InvalidTopology(LayoutError):
    """A layout model's lines and vanishing point do not form a consistent partition."""


class NoSegments(LayoutError):
    """The segment detector found nothing above threshold."""


class DegenerateConfiguration(LayoutError):
    """Fewer than two distinct segment directions; vanishing points undefined."""


class InsufficientSupport(LayoutError):
    """Not enough pixels to fit a boundary between the requested label pair."""


class NoValidHypothesis(LayoutError):
    """Every enumerated layout hypothesis was rejected by validation."""


class ZeroContour(LayoutError):
    """A layout has no contour pixel inside the image, its score is undefined."""


class DimensionMismatch(LayoutError):
    """Two rasters that must share dimensions do not."""


class EmptyDataset(LayoutError):
    """An evaluation was requested over an empty list of images."""


class EmptyMaskWarning(UserWarning):
    """No pixel exceeded the binarization threshold; the mask is empty."""
