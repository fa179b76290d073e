"""Exception hierarchy shared across the package."""


class SfglocError(Exception):
    """Base class for every error raised by sfgloc."""

    exit_code = 4


class InputError(SfglocError):
    """Malformed user input (source text, diff files, datasets)."""

    exit_code = 2


class LocatedError(InputError):
    def __init__(self, message, line=None, col=None):
        self.line = line
        self.col = col
        where = ""
        if line is not None:
            where = f" at line {line}" + (f", col {col}" if col is not None else "")
        super().__init__(message + where)


class LexError(LocatedError):
    pass


class ParseError(LocatedError):
    pass


class UnsupportedConstruct(LocatedError):
    pass


class UnresolvedName(LocatedError):
    def __init__(self, name, line=None, col=None):
        self.name = name
        super().__init__(f"unresolved name {name!r}", line, col)


class DiffParseError(LocatedError):
    pass


class LengthError(InputError):
    pass


class SplitError(InputError):
    pass


class MetricError(InputError):
    pass


class ConfigError(SfglocError):
    exit_code = 3


class ShapeError(SfglocError):
    pass


class StatsError(SfglocError):
    pass


class InternalError(SfglocError):
    pass


class GradCheckFailure(SfglocError):
    def __init__(self, max_rel_error, threshold):
        self.max_rel_error = max_rel_error
        self.threshold = threshold
        super().__init__(f"max relative error {max_rel_error:.3e} exceeds {threshold:.1e}")
