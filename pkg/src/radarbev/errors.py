"""Exception hierarchy shared by every radarbev module."""


class RadarBevError(Exception):
    """Base class for all errors raised by radarbev."""


class OutOfRange(RadarBevError, ValueError):
    pass


class ParseError(RadarBevError, ValueError):
    """Malformed input record. ``line`` is 1-based, or None for whole-file errors."""

    def __init__(self, message, line=None, source=None):
        self.line = line
        self.source = source
        where = ""
        if source is not None:
            where += f"{source}:"
        if line is not None:
            where += f"{line}:"
        super().__init__(f"{where} {message}" if where else message)


class VelocityOutOfRange(ParseError):
    pass


class UnknownClass(ParseError):
    pass


class PoseOrderError(RadarBevError, ValueError):
    pass


class GridMismatch(RadarBevError, ValueError):
    pass


class FormatError(RadarBevError, ValueError):
    pass


class TruncatedFile(FormatError):
    pass


class GenerationFailure(RadarBevError, RuntimeError):
    pass


class ConfigError(RadarBevError, ValueError):
    pass
