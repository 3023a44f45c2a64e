"""Shared exception types."""


class ParseError(Exception):
    """Malformed input file. Carries enough context to locate the defect."""

    def __init__(self, message, path=None, line=None, offset=None):
        self.path = path
        self.line = line
        self.offset = offset
        where = []
        if path is not None:
            where.append(str(path))
        if line is not None:
            where.append(f"line {line}")
        if offset is not None:
            where.append(f"byte {offset}")
        if where:
            message = f"{message} ({', '.join(where)})"
        super().__init__(message)


class TrainingDiverged(Exception):
    """Raised when a loss or gradient stops being finite."""
