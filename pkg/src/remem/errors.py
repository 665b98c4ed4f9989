"""Exception hierarchy shared by all remem modules.

I/O failures are reported as the builtin :class:`OSError` (and subclasses);
everything domain-specific derives from :class:`RememError`.
"""


class RememError(Exception):
    """Base class for all remem-specific errors."""


class ZeroSizeError(RememError):
    """An allocation of zero bytes was requested."""


class InvalidPageSizeError(RememError):
    """Page size is not a power of two or is below the 4096-byte minimum."""


class OutOfBoundsError(RememError):
    """A byte range does not fit inside the target allocation or window."""


class UnknownAllocationError(RememError):
    """The allocation id is not (or no longer) registered."""


class IncompatibleFormatVersionError(RememError):
    """The on-disk store was written with an unsupported format version."""


class ProtocolError(RememError):
    """A wire frame violated the protocol.

    ``reason`` is a short machine-checkable code such as ``"bad-magic"``,
    ``"bad-version"``, ``"unknown-type"`` or ``"truncated"``.
    """

    def __init__(self, reason: str, detail: str = ""):
        self.reason = reason
        super().__init__(f"{reason}: {detail}" if detail else reason)


class UnknownWindowError(RememError):
    """The server does not expose a window with the requested id."""


class DuplicateWindowIdError(RememError):
    """Two exposures requested the same window id."""


class ConnectError(RememError):
    """The server endpoint could not be reached."""


class ConnectionLostError(RememError):
    """The connection dropped (or the handle was closed) mid-operation."""


class IntegrityError(RememError):
    """A measured payload's checksum does not match the expected pattern."""


class EmptyGroupError(RememError):
    """Summary statistics were requested for an empty record group."""


class ConfigError(RememError):
    """Bad or conflicting configuration (flag, environment, or file key)."""
