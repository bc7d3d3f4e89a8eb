"""Exception types shared across the package."""


class MfpError(Exception):
    """Base class for all domain errors raised by this package."""


class NoPropagatingModes(MfpError):
    """The source frequency is below the first modal cutoff."""


class NearFieldRange(MfpError):
    """A source-receiver range violates the far-field validity floor."""


class ZeroReplica(MfpError):
    """A replica vector with zero norm cannot be normalized."""


class DegenerateReplica(MfpError):
    """A replica entry is too small for stable inter-sensor ratios."""


class ReconstructionFailure(MfpError):
    """A spectral basis failed its reconstruction tolerances."""


class DegenerateSurface(MfpError):
    """Every cell of an ambiguity surface is flagged as degenerate."""


class ReplicaFileError(MfpError):
    """A replica-grid file is malformed or inconsistent."""


class ConfigError(MfpError):
    """A run configuration is missing, malformed, or invalid."""
