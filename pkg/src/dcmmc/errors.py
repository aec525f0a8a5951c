"""Exception types shared across the package."""


class ConfigError(ValueError):
    """Invalid configuration value, file, or constraint combination."""


class SimulationFault(RuntimeError):
    """The plant simulation produced a non-finite or inconsistent state."""


class EstimatorFault(RuntimeError):
    """The estimator hit a numerical fault (non-finite state, s <= 0)."""

    def __init__(self, message: str, sample_index: int | None = None):
        if sample_index is not None:
            message = f"{message} (sample {sample_index})"
        super().__init__(message)
        self.sample_index = sample_index
