"""Exception hierarchy shared across the engine."""

from __future__ import annotations


class MimoError(Exception):
    """Base class for every engine-raised error."""


# -- memory / transcript sequencing ----------------------------------------


class SeqMismatch(MimoError):
    """An append carried a sequence number that does not equal the current length."""

    def __init__(self, expected: int, got: int):
        super().__init__(f"expected seq {expected}, got {got}")
        self.expected = expected
        self.got = got


# -- model gateway ----------------------------------------------------------


class BackendUnavailable(MimoError):
    """The live backend failed (network error or HTTP failure after retries)."""


class ScriptExhausted(MimoError):
    """The scripted backend has no step matching the current call."""


class AttachmentMissing(MimoError):
    """A referenced image could not be resolved in the run store."""


# -- prompt registry ---------------------------------------------------------


class UnknownTemplate(MimoError):
    """Requested template id is not in the registry."""


class MissingBinding(MimoError):
    """A required placeholder was not bound."""


class ExtraBinding(MimoError):
    """A binding was supplied for a placeholder the template does not declare."""


# -- orchestration -----------------------------------------------------------


class RoutingParseFailure(MimoError):
    """Supervisor output could not be mapped to a routing token, even after one retry."""


class RevisionCapReached(MimoError):
    """A revision was requested after the per-run revision cap was already met."""


class NoDraftProduced(MimoError):
    """The run terminated without any banner draft having been created."""


class StyleParseFailure(MimoError):
    """Style-proposal output could not be parsed into the expected keyed styles."""


class VerdictParseFailure(MimoError):
    """A judge's vote could not be parsed, even after one retry."""

    def __init__(self, judge: str, candidate: int, text: str):
        super().__init__(
            f"unparseable vote from {judge} on candidate style_{candidate + 1}: {text!r}"
        )
        self.judge = judge
        self.candidate = candidate


# -- evaluation payloads ------------------------------------------------------


class NoPayloadFound(MimoError):
    """No balanced JSON object could be extracted from the model response."""


class SchemaError(MimoError):
    """Extracted payload does not match the expected report shape."""


class RangeError(MimoError):
    """A score in the payload lies outside the scale for its protocol."""


class LengthMismatch(MimoError):
    """Paired sequences have different lengths."""


class DegenerateInput(MimoError):
    """A rank vector is constant, so correlation is undefined."""


# -- run store ----------------------------------------------------------------


class RunNotFound(MimoError):
    """No run directory exists for the given run id."""


class CorruptTranscript(MimoError):
    """A transcript line failed to parse or validate."""

    def __init__(self, path: str, line_number: int, reason: str):
        super().__init__(f"{path}:{line_number}: {reason}")
        self.path = path
        self.line_number = line_number


class StoreIOError(MimoError):
    """Filesystem failure while creating or writing a run."""


# -- configuration --------------------------------------------------------------


class ConfigError(MimoError):
    """Invalid engine configuration."""
