"""Exception types shared across the package."""


class PibfError(Exception):
    """Base class for every error raised by this package."""


class ParamsMismatchError(PibfError, ValueError):
    """Two sketches (or a sketch and a pad/key) disagree on geometry or seeds."""


class CodecError(PibfError, ValueError):
    """Invalid variant event, genome, or item-id bit pattern."""


class WireError(PibfError, ValueError):
    """Malformed, truncated, or version-incompatible bytes."""


class ProtocolError(PibfError):
    """A protocol role received something it cannot act on."""


class PadReuseError(PibfError):
    """A one-time pad was asked to mask a second message, or used after destruction."""
