class DomainError(ValueError):
    """Input outside the domain of an operation (non-finite x, p not in (0,1), empty sample, ...)."""


class UnsupportedError(NotImplementedError):
    """Requested family / support / mode that the implementation does not cover."""


class DegenerateModelError(ValueError):
    """Model whose normalising variance vanishes (zero noise variance, v_n^2 = 0, A = 0)."""


class AugmentationError(RuntimeError):
    """Negative residual variance on a path while building the normalising tail.

    :param path_id: replication index of the offending path (or None)
    :param residual: the negative value of v^2 + d - sum(sigma_k^2)
    """

    def __init__(self, message, path_id=None, residual=None):
        super().__init__(message)
        self.path_id = path_id
        self.residual = residual


class PlanInconsistencyError(RuntimeError):
    """The augmentation plan is too short for the residual variance of a path."""


class ConfigError(ValueError):
    """Invalid experiment configuration; `field` names the offending key."""

    def __init__(self, field, message):
        super().__init__(f"{field}: {message}")
        self.field = field
