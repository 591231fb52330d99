"""Exception hierarchy shared across the toolkit.

CLI exit codes map onto these: DataError -> 3, ModelMismatchError -> 4.
"""


class PrecparseError(Exception):
    """Base class for all toolkit errors."""


class DataError(PrecparseError):
    """Malformed or inconsistent input data."""


class ConllParseError(DataError):
    """A CoNLL-X file could not be parsed; carries the offending line number."""

    def __init__(self, message: str, line_no: int):
        super().__init__(f"line {line_no}: {message}")
        self.line_no = line_no


class TreeStructureError(DataError):
    """A head assignment does not form a valid dependency tree."""


class AlignmentError(DataError):
    """Predicted and gold corpora do not line up sentence-by-sentence."""


class OverlapError(DataError):
    """Parser training data leaks into the riskiness training set."""


class ModelFormatError(PrecparseError):
    """A model file is unreadable or has the wrong version."""


class ModelMismatchError(PrecparseError):
    """A model is used with an incompatible kind or feature-template version."""
