"""Exception hierarchy shared by the library and the command surface."""

from typing import Any, Dict, Optional


class SpellforgeError(Exception):
    """Base class for every error raised on purpose by spellforge."""

    exit_code: int = 1

    def __init__(self, message: str, detail: Optional[Dict[str, Any]] = None):
        super().__init__(message)
        self.message = message
        self.detail = detail or {}


class ConfigError(SpellforgeError, ValueError):
    """Invalid configuration, flag, or JSON document."""

    exit_code = 2


class DataError(SpellforgeError, ValueError):
    """Input data violates a documented precondition."""

    exit_code = 2


class SchemaError(DataError):
    """A CSV input does not match its schema."""

    def __init__(
        self,
        message: str,
        row: Optional[int] = None,
        column: Optional[str] = None,
        path: Optional[str] = None,
    ):
        detail = {"row": row, "column": column, "path": path}
        super().__init__(message, {k: v for k, v in detail.items() if v is not None})
        self.row = row
        self.column = column


class UnknownPaymentCodeError(DataError):
    """Payment code absent from the taxonomy table."""

    def __init__(self, code: str):
        super().__init__(f"unknown payment code: {code!r}", {"code": code})
        self.code = code


class MissingColumnError(DataError):
    """A model or ladder entry needs a column the feature matrix lacks."""

    def __init__(self, missing):
        missing = list(missing)
        super().__init__(
            f"missing required column(s): {', '.join(missing[:10])}"
            + (" ..." if len(missing) > 10 else ""),
            {"missing": missing},
        )
        self.missing = missing


class NumericalError(SpellforgeError, ArithmeticError):
    """A numerical routine failed."""

    exit_code = 3


class ConvergenceError(NumericalError):
    """An iterative solver hit its iteration cap."""
