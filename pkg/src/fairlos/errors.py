"""Exception types shared across the toolkit."""


class FairlosError(Exception):
    """Base class for all toolkit errors."""


class InvalidRecordError(FairlosError):
    """An admission record violates a structural invariant (negative LOS,
    inconsistent prior counts, missing numeric field, ...)."""


class SchemaError(FairlosError):
    """A value falls outside its declared category set, or encoded data does
    not match the schema a model was trained against."""


class DegenerateDataError(FairlosError):
    """Input data cannot support the requested computation (empty vector,
    single-class labels, constant sample, too few rows to stratify, ...)."""


class InfeasibleConstraintError(FairlosError):
    """A fairness constraint cannot be evaluated, e.g. a group has no
    positive-class rows."""


class ConfigError(FairlosError):
    """A configuration document is malformed."""


class PipelineStageError(FairlosError):
    """A pipeline stage failed; carries the stage name for diagnostics."""

    def __init__(self, stage, message):
        super().__init__(f"[{stage}] {message}")
        self.stage = stage
