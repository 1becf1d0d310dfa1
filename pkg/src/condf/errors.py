"""Exception hierarchy.

``DataError`` subclasses describe problems with the input data and map to
exit code 2 in the CLI; everything else is a usage or internal failure.
"""


class CondfError(Exception):
    """Base class for all package errors."""


class DataError(CondfError):
    """Input data is malformed or unsuitable."""


class SchemaError(DataError):
    pass


class ParseError(DataError):
    def __init__(self, message, row=None, column=None):
        super().__init__(message)
        self.row = row
        self.column = column


class LabelError(DataError):
    pass


class SplitError(DataError):
    pass


class FoldingError(DataError):
    pass


class ShapeError(CondfError, ValueError):
    pass


class FitError(CondfError, ValueError):
    pass


class MeasureError(CondfError, ValueError):
    pass


class SelectionError(CondfError, ValueError):
    pass


class TrainingError(CondfError, ValueError):
    pass


class TransformError(CondfError, ValueError):
    pass


class RankingInputError(DataError, ValueError):
    pass


class RenderError(DataError):
    pass
