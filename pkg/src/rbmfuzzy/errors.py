"""Exception hierarchy. Each class carries the CLI exit code it maps to."""


class RbmFuzzyError(Exception):
    exit_code = 1


class ConfigError(RbmFuzzyError, ValueError):
    exit_code = 2


class DataError(RbmFuzzyError, ValueError):
    exit_code = 3


class NumericalError(RbmFuzzyError, ArithmeticError):
    exit_code = 4


class StageError(RbmFuzzyError):
    """Wraps an error raised inside one pipeline stage."""

    def __init__(self, stage, cause):
        super().__init__(f"[{stage}] {cause}")
        self.stage = stage
        self.cause = cause
        self.exit_code = getattr(cause, "exit_code", 1)
