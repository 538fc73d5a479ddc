"""Exception types shared across the package."""


class VibraforgeError(Exception):
    """Base class for all errors raised by this package."""


class RangeError(VibraforgeError):
    """A field value is outside its legal range."""


class ParityError(VibraforgeError):
    """A frame failed its parity check."""


class TruncationError(VibraforgeError):
    """A command is missing expected frames."""


class TopologyError(VibraforgeError):
    """A chain layout is invalid or references an unknown chain."""


class PacketOverflowError(VibraforgeError):
    """A packet carries more commands than the transport allows."""


class EmptyInputError(VibraforgeError):
    """An operation received an empty signal or file."""


class BelowThresholdError(VibraforgeError):
    """A frequency is too low to be rendered by the actuators."""


class NormalizationError(VibraforgeError):
    """A normalization reference is zero or negative."""


class ParseError(VibraforgeError):
    """A file or byte stream could not be parsed.

    ``offset`` carries the byte or line position where parsing failed,
    when known.
    """

    def __init__(self, message, offset=None):
        super().__init__(message)
        self.offset = offset


class ValidationError(VibraforgeError):
    """A document or configuration violates a structural rule."""


class AliasingError(VibraforgeError):
    """A sample rate is too low for the requested oscillator frequency."""


class CapacityError(VibraforgeError):
    """A chain or chain set is already at its maximum size."""


class OverlapError(VibraforgeError):
    """Two assignments overlap in time on the same unit."""


class TransportError(VibraforgeError):
    """An endpoint is closed or otherwise unable to deliver packets."""
