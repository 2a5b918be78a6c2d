"""Exception hierarchy. Each category maps to a CLI exit code."""


class MelmError(Exception):
    exit_code = 2


class UsageError(MelmError):
    exit_code = 1


class ConfigError(UsageError):
    """Malformed or unknown configuration key."""


class DataError(MelmError):
    exit_code = 2


class MissingFileError(DataError):
    pass


class ParseError(DataError):
    def __init__(self, message, line=None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class FormatError(ParseError):
    """Malformed embedding file."""


class StructureError(DataError):
    """Linearized sequence whose markers do not nest properly."""


class SizeError(DataError):
    pass


class LengthError(DataError):
    """Sequence longer than the model's maximum length."""


class GenerationError(DataError):
    pass


class SubstitutionError(DataError):
    pass


class EvaluationError(DataError):
    pass


class TrainingError(MelmError):
    exit_code = 3


class CheckpointError(TrainingError):
    """Checkpoint unreadable or its vocabulary is incompatible with the data."""
