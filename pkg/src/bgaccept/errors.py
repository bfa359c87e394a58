"""Exception hierarchy shared by every module.

``ValidationError`` marks bad inputs (CLI exit code 1); ``NumericalError``
and its subclasses mark failures of an otherwise valid computation (exit 2).
"""


class ValidationError(ValueError):
    """Inputs violate a documented precondition or type invariant."""


class HypothesisError(ValidationError):
    """A lemma's hypothesis does not hold for the supplied interval."""


class NumericalError(ArithmeticError):
    """A numerical procedure failed on valid inputs."""


class ConvergenceError(NumericalError):
    """Quadrature or an iterative solver did not reach its tolerance."""


class DivergenceError(NumericalError):
    """The requested quantity is infinite (e.g. an exponential moment)."""
