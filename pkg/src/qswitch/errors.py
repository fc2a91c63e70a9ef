"""Exception hierarchy shared by the library and the CLI exit-code mapping."""


class SwitchError(Exception):
    """Base class for every error raised by qswitch."""


class ConfigError(SwitchError, ValueError):
    """Invalid switch configuration, scenario or input vector."""


class CapExceeded(SwitchError):
    """A materialization or LP size guard was hit."""

    def __init__(self, message: str, size: int, cap: int):
        super().__init__(f"{message}: {size} > cap {cap}")
        self.size = size
        self.cap = cap


class PolicyPreconditionError(SwitchError):
    """A policy was asked to run outside the regime it is valid for."""


class InfeasibleLP(SwitchError):
    pass


class UnboundedLP(SwitchError):
    pass


class OracleMismatch(SwitchError):
    """An implementation disagreed with its brute-force oracle."""

    def __init__(self, message: str, instance: object = None):
        super().__init__(message)
        self.instance = instance
