class InvalidInputError(ValueError):
    """Malformed or out-of-contract input."""


class DomainError(ValueError):
    """Query outside the domain of a function."""


class InfeasibleEstimateError(ValueError):
    """Estimate violates monotonicity, range or the F+ <= 1 constraint."""


class NonConvergenceError(RuntimeError):
    """Iterative solver stopped without meeting its certificate.

    ``best`` holds the last iterate and ``residual`` its certificate value.
    """

    def __init__(self, message, best=None, residual=float("nan"), iterations=0):
        super().__init__(message)
        self.best = best
        self.residual = residual
        self.iterations = iterations
