"""Exception hierarchy shared across the pipeline.

Every error carries a short machine-parsable ``category`` used by the CLI
for its one-line failure output.
"""


class PipelineError(Exception):
    category = "internal"


class DatasetFormatError(PipelineError):
    """Structurally malformed dataset file: bad header, wrong column count,
    missing or duplicate ids."""

    category = "data"


class ValidationError(PipelineError):
    """A value violates a domain invariant (unknown language, bad label,
    empty text, label outside a model's label space, ...)."""

    category = "validation"


class ConsistencyError(PipelineError):
    """Label combination that violates the task-1/task-2 contract."""

    category = "consistency"


class ConfigError(PipelineError):
    category = "config"


class TransportError(PipelineError):
    """Translation provider failure for one item.

    ``retriable`` distinguishes transient faults (network) from permanent
    ones (replay-table miss); ``example_id`` names the offending item when
    raised from a batch operation.
    """

    category = "transport"

    def __init__(self, message: str, example_id: str | None = None, retriable: bool = True):
        super().__init__(message)
        self.example_id = example_id
        self.retriable = retriable


class RoutingError(PipelineError):
    """No underlying model is available for an example's language."""

    category = "routing"


class CoverageError(PipelineError):
    """An ensemble member or submission is missing predictions for ids."""

    category = "coverage"

    def __init__(self, message: str, missing_ids: tuple[str, ...] = ()):
        super().__init__(message)
        self.missing_ids = tuple(missing_ids)


class StatisticsError(PipelineError):
    category = "statistics"


class ModelLoadError(PipelineError):
    category = "model"


class ModelIntegrityWarning(UserWarning):
    """Stored model blob does not match its recorded integrity checksum."""
