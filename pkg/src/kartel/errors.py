"""Exception hierarchy.

``DataError`` subclasses map to CLI exit code 2; everything else raised from
a command is treated as a usage error (exit code 1).
"""


class KartelError(Exception):
    """Base class for all package errors."""


class DataError(KartelError):
    """Input data is malformed or inconsistent."""


class ExceededMaxBids(KartelError):
    """The bidding loop ran past ``AuctionConfig.max_bids``."""


class InvalidMix(KartelError, ValueError):
    """Initial strategy shares cannot be realized over the population."""


class EmptySeries(DataError):
    pass


class ParseError(DataError):
    pass


class NonMonotonePrices(DataError):
    pass


class SchemaVersionMismatch(DataError):
    pass


class NotFound(DataError):
    pass


class DegenerateData(DataError):
    """Training data contains a single class."""


class TooFewSamples(DataError):
    pass


class DimensionMismatch(DataError, ValueError):
    pass


class EmptyBackground(KartelError, ValueError):
    pass


class TooManyFeatures(KartelError, ValueError):
    pass
