"""Exception hierarchy shared by all modules."""


class QThetaError(Exception):
    """Base class for all library errors."""


class DomainError(QThetaError, ValueError):
    """An argument lies outside the domain of the operation."""


class ParameterError(QThetaError, ValueError):
    """Model parameters violate a construction precondition."""


class InputError(QThetaError, KeyError):
    """Required input data (e.g. a lattice value) is missing."""

    def __str__(self):
        return str(self.args[0]) if self.args else ""


class ConvergenceError(QThetaError, ArithmeticError):
    """A series or quadrature failed to converge."""


class UnsupportedSurfaceError(QThetaError, ValueError):
    """The symplectic leaf is degenerate or of a kind that is not constructed."""


class ConstructionError(QThetaError, RuntimeError):
    """A constructed object failed its own consistency checks."""
