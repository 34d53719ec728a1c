"""Exception hierarchy shared by all chainscale modules."""


class ChainscaleError(Exception):
    pass


class DomainError(ChainscaleError, ValueError):
    """An argument is outside the domain an operation is defined on."""


class ParseError(ChainscaleError, ValueError):
    def __init__(self, message: str, line: int | None = None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class FormatError(ChainscaleError, ValueError):
    pass


class RangeError(ChainscaleError, IndexError):
    pass


class UndefinedMetricError(ChainscaleError, ValueError):
    pass


class ConfigError(ChainscaleError, ValueError):
    """Scenario validation failure; ``path`` names the offending field."""

    def __init__(self, message: str, path: str = ""):
        self.path = path
        super().__init__(f"{path}: {message}" if path else message)
