"""Exception types raised by the codec.

Every failure the codec can detect on untrusted input surfaces as a subclass
of :class:`CodecError`, so callers (and the fuzz tests) can catch one type.
"""


class CodecError(ValueError):
    """Base class for every typed codec failure."""


# pixel io
class MalformedHeader(CodecError):
    pass


class UnsupportedMaxval(CodecError):
    pass


class TruncatedPayload(CodecError):
    pass


class ChannelFormatMismatch(CodecError):
    pass


# lossy stage
class InvalidBackendParam(CodecError):
    pass


class CorruptSubstream(CodecError):
    pass


class ShapeMismatch(CodecError):
    pass


# residual plane
class RunLengthOverflow(CodecError):
    pass


class TruncatedStream(CodecError):
    pass


# entropy coder
class SymbolOutOfAlphabet(CodecError):
    pass


class StreamExhausted(CodecError):
    pass


# mask sampler
class OutOfRangeIteration(CodecError):
    pass


class PmfDigestMismatch(CodecError):
    pass


# estimator
class InvalidParams(CodecError):
    pass


class EmptyCorpus(CodecError):
    pass


# container
class ContainerError(CodecError):
    pass


class BadMagic(ContainerError):
    pass


class UnsupportedVersion(ContainerError):
    pass


class LengthMismatch(ContainerError):
    pass


class CrcMismatch(ContainerError):
    pass


class InvalidHeader(ContainerError):
    pass
