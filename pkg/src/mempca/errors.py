"""Exception types shared across the pipeline stages."""


class PipelineError(Exception):
    """Base class for data- or model-level failures in any pipeline stage."""


class EmptyPanelError(PipelineError):
    """Cleaning removed every ticker."""


class DegenerateColumnError(PipelineError):
    """One or more columns cannot be standardized (zero variance).

    Carries the offending column identifiers in ``columns``.
    """

    def __init__(self, columns, message=None):
        self.columns = list(columns)
        super().__init__(message or f"degenerate (zero-variance) columns: {self.columns}")


class DegenerateSeriesError(PipelineError):
    """A single series has zero sample variance."""


class ContractViolationError(PipelineError):
    """An input does not satisfy a documented type invariant."""


class DecompositionError(PipelineError):
    """Eigendecomposition failed to converge."""


class FitError(PipelineError):
    """A parametric fit (e.g. the spectral bulk fit) failed; carries diagnostics."""

    def __init__(self, message, diagnostics=None):
        self.diagnostics = diagnostics or {}
        super().__init__(message)


class ConvergenceError(PipelineError):
    """An iterative solver exhausted its budget; carries the last iterate."""

    def __init__(self, message, last_iterate=None):
        self.last_iterate = last_iterate
        super().__init__(message)


class InsufficientDataError(PipelineError):
    """Too few usable points for the requested estimate."""


class LogDomainError(PipelineError):
    """A log-scale fit received non-positive values."""


class DataQualityError(PipelineError):
    """Too large a fraction of the panel was unusable."""


class ConsistencyError(PipelineError):
    """A cross-check between two routes to the same quantity failed."""


class SingularMatrixError(PipelineError):
    """A matrix inversion/solve was requested on a numerically singular matrix."""


class StageError(PipelineError):
    """Wraps a failure with the pipeline stage where it occurred."""

    def __init__(self, stage, cause):
        self.stage = stage
        self.cause = cause
        super().__init__(f"stage '{stage}' failed: {cause}")
