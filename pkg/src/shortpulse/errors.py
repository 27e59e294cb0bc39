"""Exception types shared across the package."""


class ShortPulseError(Exception):
    """Base class for all package-specific errors."""


class MeanNotZero(ShortPulseError):
    """An inverse-derivative symbol was applied to a field with nonzero mean."""


class NonFiniteSymbol(ShortPulseError):
    """A Fourier multiplier is non-finite at a frequency carrying content."""


class StepRejected(ShortPulseError):
    """A time step produced implausible growth or non-finite values."""


class BlowUp(ShortPulseError):
    """The solution norm doubled (or became non-finite) during evolution."""


class WrapAround(ShortPulseError):
    """Significant mass reached the edge of the periodic box."""


class MeanDrift(ShortPulseError):
    """The zero mode drifted above tolerance during evolution."""


class InsufficientData(ShortPulseError):
    """Not enough samples in the requested window to fit anything."""


class UnderResolved(ShortPulseError):
    """The grid cannot resolve the requested oscillation."""


class OutOfBox(ShortPulseError):
    """A wave packet's support leaves the valid region of the box."""


class QuadratureUnderResolved(ShortPulseError):
    """Doubling the quadrature resolution moved a reported value too much."""


class MissingSnapshots(ShortPulseError):
    """A required snapshot time is absent from the stored trajectory."""


class ConfigError(ShortPulseError):
    """Malformed, unknown, or out-of-range configuration input."""
