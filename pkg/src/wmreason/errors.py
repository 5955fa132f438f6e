"""Exception types shared across the package."""


class WmReasonError(Exception):
    """Base class for all package errors."""


class UnparseableLine(WmReasonError):
    """A story line matched no production of the active grammar."""

    def __init__(self, line_no: int, line: str):
        super().__init__(f"line {line_no}: no production matches {line!r}")
        self.line_no = line_no
        self.line = line


class InconsistentEvent(WmReasonError):
    """An event violates the objective state built from prior events."""

    def __init__(self, t: int, reason: str):
        super().__init__(f"event t={t}: {reason}")
        self.t = t
        self.reason = reason


class AdapterSchemaError(WmReasonError):
    """An external dataset record is missing or mistypes a field."""

    def __init__(self, field_path: str, detail: str = ""):
        msg = field_path if not detail else f"{field_path}: {detail}"
        super().__init__(msg)
        self.field_path = field_path


class UnknownEntity(WmReasonError):
    """A question or scope references an entity absent from the story."""


class ProviderError(WmReasonError):
    """Transport-level provider failure (retryable)."""


class PrefixUnsupported(WmReasonError):
    """The provider cannot continue generation from an assistant prefix."""


class SchemaParseError(WmReasonError):
    """A provider reply could not be parsed into the expected schema."""


class AnswerExtractionError(WmReasonError):
    """No answer marker and no unique choice match in a trajectory."""


class CacheMiss(WmReasonError):
    """Replay mode found no cache entry for the request."""


class EmbedderError(WmReasonError):
    """The embedding backend failed or returned malformed output."""


class MissingLogprobs(WmReasonError):
    """A perplexity query needs token logprobs the trajectory lacks."""


class ConfigError(WmReasonError):
    """Bad or unknown keys in the application config."""
