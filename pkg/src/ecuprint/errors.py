"""Exception hierarchy shared across the package."""


class EcuPrintError(Exception):
    """Base class for all ecuprint errors."""


class ValidationError(EcuPrintError, ValueError):
    """Invalid configuration, argument or domain-type invariant violation."""


class CodecError(EcuPrintError):
    """Base class for frame decode failures."""


class StuffingViolation(CodecError):
    """Six consecutive equal bits (or a missing stuff bit) in the stuffed region."""


class CrcMismatch(CodecError):
    """Received CRC does not match the CRC computed over the frame body."""


class TruncatedFrame(CodecError):
    """Bit stream ended before the frame was complete."""


class FrameFormatError(CodecError):
    """Structurally malformed frame (remote/extended bits, bad delimiters, ...)."""


class InsufficientSignalError(EcuPrintError):
    """Too few usable samples to fingerprint a message."""


class TrainingError(EcuPrintError):
    """Classifier training preconditions not met."""
