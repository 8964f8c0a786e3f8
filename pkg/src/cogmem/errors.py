"""Exception hierarchy for the cogmem engine.

Validation errors mean the caller handed us bad input; transport errors mean
an external resource (socket, filesystem) failed; integrity/version errors are
persistence-layer detections. Callers that need to tell these apart (the CLI
exit codes, the retrieval empty-store short circuit) catch the specific class.
"""


class CogmemError(Exception):
    """Base class for all engine errors."""


class ValidationError(CogmemError):
    """Invalid input: empty text, bad category, out-of-range parameter."""


class MonotonicityError(ValidationError):
    """A new episodic timestamp went backwards."""


class DuplicateNodeError(ValidationError):
    """A node id was indexed twice."""


class UnknownNodeError(ValidationError):
    """A node id is not present where it was required."""


class EmptyStoreError(CogmemError):
    """The graph holds no nodes; retrieval treats this as 'nothing known'."""


class TransportError(CogmemError):
    """An external service or filesystem destination was unreachable."""


class ExtractionParseError(ValidationError):
    """A structured extraction response contained a malformed record."""

    def __init__(self, message: str, block: int | None = None,
                 record: int | None = None):
        super().__init__(message)
        self.block = block
        self.record = record


class SnapshotIOError(TransportError):
    """Snapshot destination unwritable or source unreadable."""


class SnapshotIntegrityError(CogmemError):
    """Snapshot payload failed checksum/content validation."""


class SnapshotVersionError(CogmemError):
    """Snapshot format version is not supported by this build."""

    def __init__(self, found: int, supported: int):
        super().__init__(
            f"snapshot format version {found} is not supported "
            f"(this build reads version {supported})"
        )
        self.found = found
        self.supported = supported
