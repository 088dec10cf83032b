"""Exception hierarchy shared by all modules."""


class PsiApproxError(Exception):
    """Base class for every error raised by this package."""


class DomainError(PsiApproxError, ValueError):
    """Argument outside the domain of a weight function or operator."""


class ParameterError(PsiApproxError, ValueError):
    """Inconsistent or invalid parameters (bad ``p``, bad method options...)."""


class AliasingError(PsiApproxError, ValueError):
    """Grid too coarse for the requested number of harmonics."""


class NonConvergenceError(PsiApproxError, RuntimeError):
    """An iterative procedure exhausted its iteration or panel budget."""


class TailBudgetError(NonConvergenceError):
    """A kernel tail needs more terms than the configured cap."""
