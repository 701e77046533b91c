"""Exception types shared across the package."""


class QBDError(Exception):
    """Base class for all package errors."""


class ValidationError(QBDError, ValueError):
    """A model or diffusion parameter violates a stated invariant.

    Attributes
    ----------
    invariant : str
        Short name of the violated invariant (``"row-sum"``, ``"lambda"``, ...).
    """

    def __init__(self, invariant, message):
        super().__init__(f"{invariant}: {message}")
        self.invariant = invariant


class DomainError(QBDError, ValueError):
    """Input outside the mathematical domain of an operation."""


class PoleError(QBDError, ArithmeticError):
    """A hypergeometric denominator parameter hits a pole before termination."""


class NoConvergence(QBDError, ArithmeticError):
    """A series or iteration exceeded its term budget."""


class SingularSystem(QBDError, ArithmeticError):
    """A linear system expected to have a unique solution is singular."""


class RootBracketError(QBDError, ArithmeticError):
    """A sign change was not found in an interval where one was expected."""


class QuadratureFailure(QBDError, ArithmeticError):
    """Adaptive quadrature did not reach its error target."""


class Unsupported(QBDError, NotImplementedError):
    """The requested computation is outside what the package provides."""
