"""Exception types shared across the package."""


class VoxblobError(Exception):
    """Base class for all package errors."""


class MalformedFile(VoxblobError):
    """Input file violates its format contract."""


class InvalidTransform(VoxblobError):
    """Rotation is not orthonormal with determinant +1."""


class InvalidArgument(VoxblobError, ValueError):
    pass


class EmptyNeighborhood(VoxblobError, ValueError):
    pass


class GenerationFailure(VoxblobError):
    """Scene placement could not satisfy the non-overlap constraint."""


class TrainingFailure(VoxblobError):
    """Classifier optimization produced a non-finite loss."""
