"""Exception hierarchy shared by every stage."""


class DBG4ETHError(Exception):
    """Base class for all package errors."""


class SchemaError(DBG4ETHError):
    """Input file is missing required columns or carries a bad header."""


class ValidationError(DBG4ETHError):
    """A value or structure violates a documented invariant."""


class UnknownAccountError(DBG4ETHError):
    pass


class EmptyInputError(DBG4ETHError):
    pass


class NotFittedError(DBG4ETHError):
    pass


class CannotFitError(DBG4ETHError):
    """Calibration data is unusable (too few samples, one class, non-finite)."""


class ConfigError(DBG4ETHError):
    pass


class StageError(DBG4ETHError):
    """A pipeline stage failed; ``stage`` names it."""

    def __init__(self, stage: str, cause: BaseException):
        super().__init__(f"[{stage}] {type(cause).__name__}: {cause}")
        self.stage = stage
        self.cause = cause
