"""Exception hierarchy shared by every stage of the pipeline."""


class CrashnetError(Exception):
    """Base class for all errors raised by this package."""


class ContractError(CrashnetError, ValueError):
    """Input violates a function's documented preconditions."""


class ParseError(CrashnetError, ValueError):
    """Malformed input file."""

    def __init__(self, message, line=None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


class ValidationError(CrashnetError, ValueError):
    """Well-formed input whose values break a data invariant."""


class InsufficientDataError(CrashnetError, ValueError):
    pass


class EmptyWindowError(CrashnetError, ValueError):
    pass


class EmptyHistogramError(CrashnetError, ValueError):
    pass


class NoCrashDetectedError(CrashnetError):
    pass


class DegenerateRegressorError(CrashnetError, ValueError):
    pass


class UndefinedPhaseError(CrashnetError, ValueError):
    def __init__(self, index):
        super().__init__(f"zero-magnitude analytic sample at index {index}; phase undefined")
        self.index = index


class NormalizationError(CrashnetError, ValueError):
    pass


class IterationLimitError(CrashnetError, RuntimeError):
    pass


class UndefinedAssortativityError(CrashnetError, ValueError):
    pass


class InsufficientEventsError(CrashnetError, ValueError):
    pass


class StageError(CrashnetError):
    """A pipeline stage failed; carries the stage name."""

    def __init__(self, stage, cause):
        super().__init__(f"stage '{stage}' failed: {cause}")
        self.stage = stage
        self.cause = cause
