"""Exception types raised across the package."""


class XlmimoError(Exception):
    """Base class for all package errors."""


class NotPositiveDefinite(XlmimoError, ValueError):
    pass


class RankDeficient(XlmimoError, ValueError):
    pass


class DimensionMismatch(XlmimoError, ValueError):
    pass


class IndexOutOfRange(XlmimoError, IndexError):
    pass


class SearchFailed(XlmimoError, RuntimeError):
    pass


class ConfigInvalid(XlmimoError, ValueError):
    pass


class ZeroVector(XlmimoError, ValueError):
    pass


class ZeroRegressor(XlmimoError, ValueError):
    pass


class ZeroTruth(XlmimoError, ValueError):
    pass


class ScaleRefused(XlmimoError, RuntimeError):
    """Raised when a brute-force baseline would exceed its work budget."""


class EtaUnidentifiable(UserWarning):
    """Coupling coefficient cannot be fitted (a single subarray per side)."""
