"""Exception hierarchy shared by the simulation, estimator and CLI layers."""


class CondvarError(Exception):
    """Base class for all library errors."""


class ConfigError(CondvarError, ValueError):
    """Invalid model, estimator or experiment configuration."""


class RangeError(ConfigError, IndexError):
    """A window, block index or subset size does not fit the path length."""


class SubsetRefusalError(ConfigError):
    """Exact subset enumeration was requested for too many subsets."""

    def __init__(self, count: int, limit: int):
        self.count = count
        self.limit = limit
        super().__init__(
            f"exact enumeration would visit {count} subsets per window "
            f"(limit {limit}); set subset_budget > 0 to sample instead"
        )


class NumericOverflowError(CondvarError, ArithmeticError):
    """A simulated value became non-finite."""

    def __init__(self, step: int, what: str = "X"):
        self.step = step
        self.what = what
        super().__init__(f"non-finite {what} at fine-grid step {step}")


class AccuracyWarning(UserWarning):
    """A numerical constant did not reach its accuracy target."""


class ReplicationError(CondvarError):
    """A Monte Carlo replication failed; wraps the underlying error."""

    def __init__(self, index: int, seed: int, cause: BaseException):
        self.index = index
        self.seed = seed
        self.cause = cause
        super().__init__(f"replication {index} (seed {seed}) failed: {cause}")
