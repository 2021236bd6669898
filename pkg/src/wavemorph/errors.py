"""Exception types shared across the package."""


class WavemorphError(Exception):
    """Base class for all errors raised by wavemorph."""


class ImageFormatError(WavemorphError):
    """A raster file could not be decoded or has an unsupported layout."""


class PixelRangeError(WavemorphError, ValueError):
    """Pixel values fall outside the declared value range."""


class ShapeError(WavemorphError, ValueError):
    """Array dimensions are incompatible with the requested operation."""


class GeometryError(WavemorphError, ValueError):
    """Degenerate or invalid point configuration."""


class StateError(WavemorphError):
    """An object is in the wrong state for the requested operation."""


class DataError(WavemorphError, ValueError):
    """Input data set is empty or otherwise unusable."""


class ModelFormatError(WavemorphError):
    """A detector model file is truncated or corrupt."""


class ModelVersionError(ModelFormatError):
    """A detector model file was written with an unsupported format version."""

    def __init__(self, expected, found):
        super().__init__(f"unsupported model version: expected {expected}, found {found}")
        self.expected = expected
        self.found = found


class ConfigError(WavemorphError):
    """Invalid or incomplete run configuration."""
