"""Exception types shared across the package."""


class TriloopError(Exception):
    """Base class for all domain errors raised by this package."""


class MissingChannel(TriloopError):
    """A frame is missing one or more required channels."""


class SchemaMismatch(TriloopError):
    """A dataset file header does not match the canonical column layout."""


class ParseError(TriloopError):
    """A dataset row could not be parsed."""


class ShapeMismatch(TriloopError):
    """An array argument has the wrong shape."""


class OutOfRange(TriloopError):
    """A value lies outside its permitted physical range."""


class NonFinite(TriloopError):
    """A computation produced NaN or infinity."""


class TooShort(TriloopError):
    """A trajectory or index range is too short for the requested operation."""


class Diverged(TriloopError):
    """Training produced a non-finite loss."""


class VersionMismatch(TriloopError):
    """A checkpoint file has an unsupported format version."""


class CorruptFile(TriloopError):
    """A checkpoint file is truncated or structurally invalid."""


class StaleCache(TriloopError):
    """Backward pass called with caches from a different forward pass."""


class ColdStart(TriloopError):
    """Closed-loop control requested before enough history accumulated."""


class EmptyQuery(TriloopError):
    """An assistant query was empty."""


class BackendUnavailable(TriloopError):
    """The remote chat-completion backend could not be reached."""


class BadResponse(TriloopError):
    """The remote chat-completion backend returned an unusable payload."""


class BackendTimeout(TriloopError):
    """The remote chat-completion backend did not answer within the deadline."""


class UnknownNode(TriloopError):
    """A telemetry request referenced a node id that is not in the namespace."""


class AccessDenied(TriloopError):
    """A telemetry write targeted a read-only node."""


class MalformedMessage(TriloopError):
    """A telemetry message does not conform to the wire schema."""


class NonFinitePrediction(TriloopError):
    """A model rollout produced NaN or infinity."""


class UsageError(TriloopError):
    """Invalid command-line arguments."""
