"""Exception types shared across the package."""


class AcbmError(Exception):
    """Base class for all acbm errors."""


class EmptyMatrix(AcbmError):
    pass


class RaggedRows(AcbmError):
    pass


class NonBinaryEntry(AcbmError):
    def __init__(self, row, col, value=None):
        self.row = row
        self.col = col
        self.value = value
        super().__init__(f"entry at ({row}, {col}) is not 0/1: {value!r}")


class PartitionShapeMismatch(AcbmError):
    pass


class NonFiniteResult(AcbmError):
    pass


class BlockCountExceedsSupport(AcbmError):
    pass


class EmptyTrace(AcbmError):
    pass


class NoMatchingState(AcbmError):
    pass


class LengthMismatch(AcbmError):
    pass


class SingleItem(AcbmError):
    pass


class DesignInvariantViolation(AcbmError):
    pass
