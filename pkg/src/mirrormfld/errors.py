"""Exception types shared across the package."""


class MirrorMFLDError(Exception):
    """Base class for all package-specific errors."""


class DomainViolationError(MirrorMFLDError):
    """A point lies on or outside the boundary of its mirror domain."""


class FactorizationError(MirrorMFLDError):
    """A Hessian metric failed its Cholesky factorization.

    Signals a point numerically too close to the boundary for the
    working precision.
    """


class ConfigError(MirrorMFLDError):
    """Invalid run configuration.  Carries the full list of problems."""

    def __init__(self, errors):
        if isinstance(errors, str):
            errors = [errors]
        self.errors = list(errors)
        super().__init__("; ".join(self.errors))


class NonConvergenceError(MirrorMFLDError):
    """Fixed-point iteration exhausted its budget."""

    def __init__(self, message, residual=None):
        super().__init__(message)
        self.residual = residual


class SupportViolationError(MirrorMFLDError):
    """A divergence was requested between measures with bad supports."""


class SamplerError(MirrorMFLDError):
    """A sampler step failed.  ``iteration`` is the offending index."""

    def __init__(self, iteration, message):
        self.iteration = iteration
        super().__init__(f"iteration {iteration}: {message}")


class MismatchedObjectiveError(MirrorMFLDError):
    """Run summaries with different objectives cannot be compared."""
