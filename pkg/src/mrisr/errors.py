"""Exception types shared across the package."""


class MrisrError(Exception):
    """Base class for all package-specific errors."""


class ShapeError(MrisrError, ValueError):
    """An array does not have the shape a contract requires."""


class IngestionError(MrisrError):
    """A volume file could not be read."""


class DegenerateVolumeError(MrisrError):
    """A volume has no intensity range (max == min) and cannot be normalized."""


class DegenerateReferenceError(MrisrError):
    """A ground-truth image has zero mean, so NRMSE is undefined."""


class ConfigError(MrisrError, ValueError):
    """Invalid or unknown configuration keys/values."""


class NumericsError(MrisrError):
    """Non-finite values where finite ones are required."""


class CheckpointError(MrisrError):
    """A checkpoint is missing, corrupt, or incompatible with the config."""


class TrainingDivergedError(MrisrError):
    """Training produced a non-finite loss; carries a diagnostic snapshot."""

    def __init__(self, message: str, snapshot: dict | None = None):
        super().__init__(message)
        self.snapshot = snapshot or {}
