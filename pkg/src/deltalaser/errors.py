"""Exception taxonomy shared across the package.

The CLI maps these onto process exit codes: configuration problems exit
with 2, regime violations with 3, and numerical failures with 4.
"""


class DeltaLaserError(Exception):
    """Base class for all package-specific errors."""


class InvalidInputError(DeltaLaserError):
    """Non-finite, out-of-range, or structurally invalid input."""


class ScalingUndefinedError(DeltaLaserError):
    """Dimensionless scaling requested with zero field strength."""


class RegimeError(DeltaLaserError):
    """Operation called outside the parameter regime where it is defined."""


class DegenerateInputError(DeltaLaserError):
    """Input that makes the requested operation ill-posed (e.g. zero integral)."""


class UnderflowError(DeltaLaserError):
    """A kernel value underflowed; the message carries remediation guidance."""


class NumericalFailureError(DeltaLaserError):
    """A solver failed to produce a trustworthy result."""


class DomainTooSmallError(NumericalFailureError):
    """Grid propagation detected probability reaching the domain boundary."""


class DiagnosticsError(DeltaLaserError):
    """A diagnostic (peak finding, fit) could not be carried out."""


class ConfigError(DeltaLaserError):
    """Configuration file or command-line override is invalid."""
