"""Exception types shared across the package."""


class HetboError(Exception):
    """Base class for all package-specific errors."""


class ConflictingParameterDefinition(HetboError):
    """The same global parameter id was declared with different names or bounds."""


class MissingParameter(HetboError):
    """A requested global id is not part of the task's search space."""


class DimensionMismatch(HetboError):
    """Vector length does not match the expected dimensionality."""


class UnknownTask(HetboError):
    """Task index outside the known set of tasks."""


class NotPositiveDefinite(HetboError):
    """Gram matrix stayed indefinite after jitter escalation."""


class FitFailed(HetboError):
    """Every hyperparameter-fitting restart failed."""


class NoCommonParameters(HetboError):
    """The tasks share no parameters, so the common-subspace model is undefined."""


class EmptyTargetData(HetboError):
    """The target task has no observations."""


class OutOfBounds(HetboError):
    """A point lies outside the benchmark's domain."""


class SchemaError(HetboError):
    """A config or data file does not match the expected schema."""


class UnknownTaskId(HetboError):
    """A referenced task id is not present in the data file."""


class EmptyTable(HetboError):
    """A tabular benchmark contains no rows."""


class InsufficientReplications(HetboError):
    """Summary statistics need at least two replications."""
