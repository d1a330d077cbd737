"""Exception types shared across the package."""


class NavpError(Exception):
    """Base class for all package-specific errors."""


class PpmError(NavpError):
    """Malformed or unsupported PPM data."""


class CodecError(NavpError):
    """Unknown codec id or corrupt encoded payload."""


class ProtocolError(NavpError):
    """Invalid wire message: bad magic/version, truncation, length mismatch."""


class ChannelClosedError(NavpError):
    """Send attempted on a channel that has been closed."""
