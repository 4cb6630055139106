"""Exception types shared across the package."""


class RdlassoError(Exception):
    """Base class for all estimation and configuration errors."""


class DimensionMismatch(RdlassoError):
    """Input arrays do not share the expected lengths/shapes."""


class RankDeficient(RdlassoError):
    """A weighted cross-product matrix is singular beyond tolerance."""


class DegenerateDof(RdlassoError):
    """No residual degrees of freedom left for variance estimation."""


class InvalidSpec(RdlassoError):
    """A penalty or model specification is internally inconsistent."""


class InvalidGamma(InvalidSpec):
    """Adaptive-weight exponent must be strictly positive."""


class AllUnpenalized(RdlassoError):
    """No column carries a positive penalty weight."""


class TooFewObservations(RdlassoError):
    """Sample too small for the requested procedure."""


class DegeneratePilot(RdlassoError):
    """A pilot quantity of the plug-in bandwidth selector could not be estimated."""


class InsufficientSupport(RdlassoError):
    """Fewer than the minimum number of usable observations on one side of the cutoff."""


class DegenerateBias(RdlassoError):
    """The local quadratic fit used for bias correction failed."""


class PilotRankDeficient(RankDeficient):
    """The full pilot model is singular on the pilot sample."""


class NotPsd(RdlassoError):
    """Covariance matrix is not positive semi-definite within tolerance."""


class ConfigInvalid(RdlassoError):
    """A simulation or pipeline configuration value is out of range."""


class AllRepsFailed(RdlassoError):
    """Every Monte Carlo replication failed to estimate."""


class DataFormatError(RdlassoError):
    """A data file or specification file could not be parsed."""
