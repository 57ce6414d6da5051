"""Exception types shared across the codec."""


class CodecError(Exception):
    """Base class for all codec-level failures."""


class FormatError(CodecError):
    """A volume file or sidecar could not be parsed or represented."""


class CorruptStreamError(CodecError):
    """An encoded container or block stream is malformed or inconsistent."""
