"""Exception types shared across the package."""


class EansError(Exception):
    """Base class for all package errors."""


class DatasetError(EansError):
    """Malformed or inconsistent benchmark files."""


class CheckpointError(EansError):
    """Unreadable, truncated, or mismatched checkpoint."""


class ConfigError(EansError):
    """Invalid run configuration (unknown key, bad value, missing input)."""


class TrainingDiverged(EansError):
    """Non-finite loss or gradient encountered during training."""

    def __init__(self, step, message):
        super().__init__(f"step {step}: {message}")
        self.step = step
