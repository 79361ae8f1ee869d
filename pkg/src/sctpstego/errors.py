"""Exception hierarchy shared by every module of the toolkit."""


class StegoError(Exception):
    """Base class for all operational errors raised by sctpstego."""


# wire
class WireError(StegoError, ValueError):
    pass


class Truncated(WireError):
    pass


class BadChecksum(WireError):
    pass


class BadLengthField(WireError):
    pass


class BodyMismatch(WireError):
    pass


class Oversize(WireError):
    pass


# channels
class ChannelError(StegoError, ValueError):
    pass


class CarrierAbsent(ChannelError):
    pass


class ConstraintViolation(ChannelError):
    pass


class CapacityZero(ChannelError):
    pass


class TooLarge(ChannelError):
    pass


class UnknownGroup(ChannelError):
    pass


class LengthOverrun(ChannelError):
    pass


class InsufficientCarrier(ChannelError):
    pass


class MalformedFrame(ChannelError):
    pass


class CountOverflow(ChannelError):
    pass


class NothingToPermute(ChannelError):
    pass


class ExtensionDisabled(ChannelError):
    pass


class NoTraffic(ChannelError):
    pass


class FragmentationNotForced(ChannelError):
    pass


class NoAlternatePath(ChannelError):
    pass


class UnknownAddress(ChannelError):
    pass


# simulator
class SimError(StegoError):
    pass


class NotEstablished(SimError):
    pass


class BadStream(SimError, ValueError):
    pass


class HandshakeFailed(SimError):
    pass


# detection / experiment / io
class DecodeFailure(StegoError):
    pass


class EmptyCorpus(StegoError, ValueError):
    pass


class IoFailure(StegoError, OSError):
    pass
