"""Exception hierarchy shared by all simulator stages."""


class SimError(Exception):
    """Base class for every error raised by the simulator."""


class GeometryError(SimError, ValueError):
    """Sizes, lengths or indices are inconsistent with the requested operation."""


class LengthOverflowError(SimError, ValueError):
    pass


class IntegrityError(SimError):
    """A received frame failed a checksum."""


class HcsMismatchError(IntegrityError):
    def __init__(self, expected: int, actual: int):
        self.expected = expected
        self.actual = actual
        super().__init__(f"HCS mismatch: expected 0x{expected:02X}, got 0x{actual:02X}")


class CrcMismatchError(IntegrityError):
    def __init__(self, expected: int, actual: int):
        self.expected = expected
        self.actual = actual
        super().__init__(f"payload CRC mismatch: expected 0x{expected:08X}, got 0x{actual:08X}")


class TruncatedInputError(SimError, ValueError):
    pass


class TruncatedStreamError(SimError, ValueError):
    pass


class DegenerateSeedError(SimError, ValueError):
    pass


class ProfileError(SimError, ValueError):
    pass


class CaptureError(SimError):
    """Base for I/Q capture file problems. ``offset`` is the byte position involved."""

    def __init__(self, message: str, offset: int | None = None):
        self.offset = offset
        if offset is not None:
            message = f"{message} (at byte offset {offset})"
        super().__init__(message)


class BadMagicError(CaptureError):
    pass


class VersionMismatchError(CaptureError):
    pass


class TruncatedPayloadError(CaptureError):
    pass


class ConfigError(SimError, ValueError):
    def __init__(self, message: str, lineno: int | None = None, path: str | None = None):
        self.lineno = lineno
        self.path = path
        where = ""
        if path is not None and lineno is not None:
            where = f"{path}:{lineno}: "
        elif lineno is not None:
            where = f"line {lineno}: "
        super().__init__(where + message)
