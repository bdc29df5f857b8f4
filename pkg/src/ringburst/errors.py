"""Exception and warning types shared across the package."""


class RingburstError(ValueError):
    """Base class for all package errors."""


class ConfigError(RingburstError):
    """Invalid or inconsistent configuration input."""


class CutoffError(RingburstError):
    """Angular-momentum index outside the configured window."""


class TruncationError(RingburstError):
    """Kick strength too large for the configured index window."""


class ValidityError(RingburstError):
    """Parameters outside the validity range of a rate formula."""


class StepSizeError(RingburstError):
    """Requested integration or sampling step too coarse."""


class GridError(RingburstError):
    """Simulation or detection grid violates a resolution requirement."""


class BandError(RingburstError):
    """Requested frequency band not covered by the computed grid."""


class UnsupportedFeatureError(RingburstError):
    """Quantity requested outside the supported detection geometry."""


class CoverageWarning(UserWarning):
    """Gated transform window extends beyond the sampled series."""


class CutoffSaturationWarning(UserWarning):
    """Population accumulating near the index-window edge."""


class ImpulsiveValidityWarning(UserWarning):
    """Pulse duration too long for the impulsive approximation."""


class EnvelopeBandwidthWarning(UserWarning):
    """Many-cycle pulse too narrowband to drive all edge transitions."""
