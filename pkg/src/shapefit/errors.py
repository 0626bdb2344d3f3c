"""Exception hierarchy shared by all shapefit modules."""


class ShapeFitError(Exception):
    """Base class for all shapefit errors."""


class ConfigError(ShapeFitError):
    """Invalid parameters, poses, bounds, or dimension mismatches."""


class DataError(ShapeFitError):
    """Problems with input files, images, masks, or landmark data."""


class TrainingError(ShapeFitError):
    """Numeric or training failures (zero variance, single-class data, ...)."""


class AlignmentError(TrainingError):
    """Shape alignment failed, typically because a shape is degenerate."""
