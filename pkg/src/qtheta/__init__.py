"""Representations of non-Lie commutation relations on cylinders and tori, their
theta-function reproducing kernels, quantum Kähler structures and coherent transforms."""

from .errors import (ConstructionError, ConvergenceError, DomainError, InputError, ParameterError,
                     QThetaError, UnsupportedSurfaceError)
from .reports import CheckReport

__version__ = "0.1.0"

__all__ = ["CheckReport", "ConstructionError", "ConvergenceError", "DomainError", "InputError",
           "ParameterError", "QThetaError", "UnsupportedSurfaceError", "__version__"]
