"""Exception hierarchy.

Each class carries a short machine-readable ``code`` and the process exit
status the command line maps it to.
"""


class AdaptError(Exception):
    code = "E_INTERNAL"
    exit_status = 3


class InvalidArgumentError(AdaptError, ValueError):
    code = "E_USAGE"
    exit_status = 1


class DegenerateDataError(AdaptError, ValueError):
    code = "E_NUMERIC"
    exit_status = 3


class DataError(AdaptError, ValueError):
    code = "E_DATA"
    exit_status = 2


class ParseError(DataError):
    code = "E_PARSE"

    def __init__(self, message, line=None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


class ProtocolError(DataError):
    code = "E_PROTOCOL"


class TrainingDivergedError(AdaptError, FloatingPointError):
    code = "E_DIVERGED"
    exit_status = 3

    def __init__(self, iteration, message=None):
        super().__init__(message or f"training diverged at iteration {iteration}")
        self.iteration = iteration


class SplitError(AdaptError):
    """Wraps an error raised while processing one split of an experiment."""

    def __init__(self, split_index, cause):
        super().__init__(f"split {split_index}: {cause}")
        self.split_index = split_index
        self.cause = cause
        self.code = getattr(cause, "code", AdaptError.code)
        self.exit_status = getattr(cause, "exit_status", AdaptError.exit_status)
