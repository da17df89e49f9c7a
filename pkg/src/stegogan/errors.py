"""Exception hierarchy. Each family maps onto one CLI exit code."""


class StegoganError(Exception):
    exit_code = 1


class UsageError(StegoganError):
    """Bad arguments or configuration."""

    exit_code = 1


class DataError(StegoganError):
    """Missing, malformed or incompatible input data."""

    exit_code = 2


class MissingFileError(DataError, FileNotFoundError):
    pass


class MalformedImageError(DataError):
    pass


class UnsupportedBitDepthError(DataError):
    pass


class InvalidDimensionsError(DataError, ValueError):
    pass


class CapacityError(DataError, ValueError):
    """Message does not fit into the cover."""


class CheckpointError(DataError):
    pass


class ShapeError(DataError, ValueError):
    pass


class NumericError(StegoganError, FloatingPointError):
    """A loss or activation became non-finite."""

    exit_code = 3
