"""
Error hierarchy for tsd-lab.

Every error raised on purpose by the package derives from TSDLabError and
from the builtin exception it specializes, so callers may catch either.
"""


class TSDLabError(Exception):
    """Base class for package errors."""


class ShapeError(TSDLabError, ValueError):
    """A tensor dimension does not match what an operation requires."""

    def __init__(
        self,
        message: str,
        axis: str,
        expected: int | None = None,
        actual: int | None = None,
    ) -> None:
        self.axis = axis
        self.expected = expected
        self.actual = actual
        detail = f" (axis '{axis}'"
        if expected is not None or actual is not None:
            detail += f": expected {expected}, got {actual}"
        super().__init__(f"{message}{detail})")


class GradientError(TSDLabError, RuntimeError):
    """Invalid use of the differentiation tape."""


class ArchiveParseError(TSDLabError, ValueError):
    """A delimited archive file could not be parsed."""

    def __init__(self, message: str, kind: str, row: int | None = None, column: int | None = None) -> None:
        self.kind = kind
        self.row = row
        self.column = column
        where = ""
        if row is not None:
            where = f" at row {row}"
            if column is not None:
                where += f", column {column}"
        super().__init__(f"{message}{where}")


class DatasetError(TSDLabError, ValueError):
    """Invalid dataset or split state."""


class ConfigError(TSDLabError, ValueError):
    """Invalid experiment configuration."""


class IncompleteRunError(TSDLabError, FileNotFoundError):
    """A run directory is missing files a command needs."""

    def __init__(self, run_dir: str, missing: list[str]) -> None:
        self.run_dir = run_dir
        self.missing = missing
        listing = "\n".join(f"  - {name}" for name in missing)
        super().__init__(f"Run directory '{run_dir}' is incomplete; missing:\n{listing}")
