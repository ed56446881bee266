"""Exception hierarchy shared across the package.

``ArgumentError`` covers caller mistakes (bad flags, violated preconditions).
``DomainError`` covers inputs that are well-formed but mathematically outside
the regime where a computation is meaningful (conjugate points, a Hamiltonian
that does not separate, ...). The CLI maps the two families to distinct exit
codes.
"""


class InterlinkError(Exception):
    pass


class ArgumentError(InterlinkError, ValueError):
    pass


class MalformedInputError(ArgumentError):
    """A filtered complex violates d^2 = 0, degree, or filtration rules."""


class DomainError(InterlinkError):
    pass


class DegenerateInputError(DomainError):
    """Coincident points where distinct points are required."""


class NonMorseError(DomainError):
    """The energy functional on the path space is not Morse (conjugate points)."""


class HypothesisError(DomainError):
    """A hypothesis of a bound (e.g. the endpoint-ratio condition) fails."""


class InvalidBarError(DomainError):
    pass


class NotSeparatingError(DomainError):
    """The Hamiltonian does not separate the pair of sets (Delta <= 0)."""


class NoConvergenceError(DomainError):
    def __init__(self, message, best_residual=None):
        super().__init__(message)
        self.best_residual = best_residual


class StepFailureError(DomainError):
    """The implicit midpoint fixed-point iteration did not converge."""
