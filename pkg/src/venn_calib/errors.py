"""Exception hierarchy shared across the package."""


class VennCalibError(Exception):
    """Base class for all errors raised by venn_calib."""


class EmptyInput(VennCalibError, ValueError):
    pass


class InvalidScore(VennCalibError, ValueError):
    pass


class InvalidLabel(VennCalibError, ValueError):
    pass


class ScoreNotInDomain(VennCalibError, KeyError):
    pass


class TooLarge(VennCalibError, ValueError):
    pass


class DimensionMismatch(VennCalibError, ValueError):
    pass


class NonFiniteFeature(VennCalibError, ValueError):
    pass


class SingleClassTraining(VennCalibError, ValueError):
    """Raised by scorers that need both labels; carries the label-1 prior."""

    def __init__(self, message, prior):
        super().__init__(message)
        self.prior = prior


class InvalidK(VennCalibError, ValueError):
    pass


class DegenerateInput(VennCalibError, ValueError):
    pass


class LengthMismatch(VennCalibError, ValueError):
    pass


class DatasetTooSmall(VennCalibError, ValueError):
    pass


class SingleClassDataset(VennCalibError, ValueError):
    pass


class ConfigError(VennCalibError, ValueError):
    pass


class DataError(VennCalibError):
    """Base for dataset ingestion problems (mapped to CLI exit code 3)."""


class IoError(DataError, OSError):
    pass


class ParseError(DataError, ValueError):
    def __init__(self, message, line=None, column=None):
        where = []
        if line is not None:
            where.append(f"line {line}")
        if column is not None:
            where.append(f"column {column}")
        super().__init__(f"{message} ({', '.join(where)})" if where else message)
        self.line = line
        self.column = column


class MissingLabelColumn(DataError, KeyError):
    pass


class NonBinaryLabel(DataError, ValueError):
    pass


class UnparseableNumeric(ParseError):
    pass
