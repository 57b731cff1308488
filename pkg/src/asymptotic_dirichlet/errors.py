"""Exception types shared across the package."""


class AsymptoticDirichletError(Exception):
    """Base class for all package errors."""


class ProfileError(AsymptoticDirichletError):
    """Unknown warping profile or parameters out of range."""


class QuadratureError(AsymptoticDirichletError):
    """Non-finite integrand sample or a quadrature that cannot proceed."""


class DivergentIntegralError(AsymptoticDirichletError):
    """An improper integral required to be finite was found divergent."""


class BarrierError(AsymptoticDirichletError):
    """Barrier construction failed (offset not stabilizing, bad minorant, ...)."""


class PreconditionError(AsymptoticDirichletError):
    """Input data violates a solver precondition (signs, parity, ranges)."""


class SolverError(AsymptoticDirichletError):
    """A linear solve did not reach the required residual."""


class ConfigError(AsymptoticDirichletError):
    """Invalid run configuration; carries the full list of problems."""

    def __init__(self, errors):
        self.errors = list(errors)
        super().__init__("; ".join(self.errors))
