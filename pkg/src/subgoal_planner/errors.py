"""Exception types raised across the package."""


class PlannerError(Exception):
    """Base class for all package errors."""


class InvalidArgumentError(PlannerError, ValueError):
    """Shapes or values that violate an operation's preconditions."""


class InvalidRequestError(PlannerError, ValueError):
    """A planning request that cannot be attempted (endpoint in collision or out of bounds)."""


class CapacityError(PlannerError, ValueError):
    """More obstacles than the fixed-size world encoding can hold."""


class GenerationError(PlannerError, RuntimeError):
    """Problem generation gave up, usually because a world is too cluttered."""


class DatasetParseError(PlannerError, ValueError):
    def __init__(self, path, lineno, reason):
        self.path = path
        self.lineno = lineno
        super().__init__(f"{path}:{lineno}: {reason}")


class TrainingError(PlannerError, RuntimeError):
    """Training refused, e.g. on an empty training set."""


class SelectionFailure(PlannerError, RuntimeError):
    """Every candidate collides; the caller should regenerate."""


class ConfigError(PlannerError, ValueError):
    """Unknown or malformed configuration keys."""


class ModelMissingError(PlannerError, FileNotFoundError):
    """A required checkpoint file does not exist."""
