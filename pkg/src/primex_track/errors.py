"""Exception hierarchy shared by all modules."""


class PrimexError(Exception):
    """Base class for every error raised by this package."""


class DimensionError(PrimexError, ValueError):
    """Operands have incompatible lengths or shapes."""


class SequencingError(PrimexError, ValueError):
    """Time steps were supplied out of order."""


class BoundExceededError(PrimexError, ValueError):
    """An input count exceeded a configured bound."""


class ModelError(PrimexError, ValueError):
    """A motion or sensor model is malformed (e.g. singular noise covariance)."""


class FusionError(PrimexError, ArithmeticError):
    """A fused information matrix is not positive definite."""


class ProtocolError(PrimexError, RuntimeError):
    """A node was driven in a way its role does not allow."""


class TopologyError(PrimexError, ValueError):
    """A network graph violates its invariants or cannot be generated."""


class ConfigError(PrimexError, ValueError):
    """A scenario configuration is invalid."""
