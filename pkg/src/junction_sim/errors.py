"""Exception types shared across the simulator modules."""


class JunctionSimError(Exception):
    """Base class for all junction-sim errors."""


class InvalidArgumentError(JunctionSimError, ValueError):
    """An argument violates an operation's precondition."""


class DegenerateGeometryError(JunctionSimError):
    """Geometric configuration too ill-conditioned to solve (near-parallel
    rays, coincident camera centers, vertical optical axis)."""


class DegenerateObservationError(JunctionSimError):
    """An observation covariance is singular and cannot be fused."""


class ResourceLimitError(JunctionSimError):
    """A computation would exceed a configured resource budget."""


class InfeasiblePlacementError(JunctionSimError):
    """No placement candidate can satisfy the optimization objective."""


class AmbiguousAssociationError(JunctionSimError):
    """Two frames of one camera map to the same trigger."""

    def __init__(self, message, conflicts=()):
        super().__init__(message)
        self.conflicts = tuple(conflicts)


class PipelineConfigError(JunctionSimError):
    """Invalid pipeline node/worker configuration."""


class OperationCancelledError(JunctionSimError):
    """A long-running computation was cancelled cooperatively."""


class CorruptRecordingError(JunctionSimError):
    """A recording directory is incomplete or fails checksum verification."""

    def __init__(self, message, offset=None):
        super().__init__(message)
        self.offset = offset


class CorruptFileError(JunctionSimError):
    """A serialized artifact fails structural or checksum validation."""

    def __init__(self, message, offset=None):
        super().__init__(message)
        self.offset = offset


class UnsupportedVersionError(JunctionSimError):
    """A file declares a schema version outside the supported range."""


class SchemaViolationError(JunctionSimError):
    """A document does not conform to the expected schema."""

    def __init__(self, message, entity=None):
        super().__init__(message)
        self.entity = entity
