"""Exception types raised by the library."""


class InvalidArgumentError(ValueError):
    """A parameter is outside its allowed range."""


class InvalidDataError(ValueError):
    """Input data is malformed (non-finite values, wrong shape)."""


class DegenerateImportanceError(RuntimeError):
    """Importances cannot be formed, e.g. no tree flagged any outlier."""


class ParseError(ValueError):
    """A CSV cell could not be parsed. ``row`` and ``column`` are 1-based."""

    def __init__(self, message: str, row: int, column: int | str):
        super().__init__(f"{message} (row {row}, column {column})")
        self.row = row
        self.column = column


class CorruptFileError(ValueError):
    """A persisted model or report is truncated or structurally invalid."""


class UnsupportedVersionError(ValueError):
    """A persisted file declares a format version this library cannot read."""


class FeatureSelectionError(RuntimeError):
    """A feature-selection run failed; ``completed`` lists finished runs."""

    def __init__(self, message: str, completed: list):
        super().__init__(message)
        self.completed = completed
