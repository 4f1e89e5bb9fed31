"""Exception hierarchy shared across the package."""


class EigenError(Exception):
    """Base class for all package-specific errors."""


class OriginOutOfBounds(EigenError):
    """A flow-vector origin lies outside the raster being drawn on."""


class FormatError(EigenError):
    """A file is not a decodable PNG."""


class IoError(EigenError):
    """A file could not be read or written."""


class CyclicGenome(EigenError):
    """The enabled connections of a genome contain a cycle."""


class DimensionMismatch(EigenError):
    """Two images that must share dimensions do not."""


class EmptyPopulation(EigenError):
    """An operation requiring at least one genome got none."""


class ConfigError(EigenError):
    """A run configuration is invalid or unparsable."""


class SpawnError(EigenError):
    """An external predictor process could not be started."""


class ProtocolError(EigenError):
    """A wire-protocol message is malformed or truncated."""


class SidecarError(EigenError):
    """The external predictor reported a failure (type-3 message)."""
