"""Exception types shared across the package."""


class LeoCollabError(Exception):
    """Base class for package errors."""


class ConfigError(LeoCollabError):
    """Invalid configuration or constellation/shell parameters."""


class InfeasibleError(LeoCollabError):
    """An offloading subproblem or evaluation has no feasible solution.

    ``cause`` names the binding constraint or failure mode.
    """

    def __init__(self, message, cause=None):
        super().__init__(message)
        self.cause = cause or message


class RouteError(LeoCollabError):
    """A route references a missing/unusable link or an undelivered packet."""


class ContractViolation(LeoCollabError):
    """Caller broke an API precondition (e.g. submitted a masked action)."""


class TrainingDiverged(LeoCollabError):
    """Training loss became non-finite or stayed above the abort threshold."""
