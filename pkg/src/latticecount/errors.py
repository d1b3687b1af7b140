"""Exception hierarchy shared by every module."""


class LatticeCountError(Exception):
    """Base class for library errors."""


class NotUnimodularError(LatticeCountError, ValueError):
    """Matrix determinant is not 1 (within the allowed tolerance)."""


class RegularityError(LatticeCountError, ValueError):
    """Element is too close to a Weyl chamber wall for the requested operation."""


class InsufficientSamplesError(LatticeCountError):
    """Monte Carlo estimate too noisy to be reported."""


class DegenerateFitError(LatticeCountError):
    """Regression has no usable points."""


class ClosureCapError(LatticeCountError):
    """Breadth-first group closure grew past its configured cap."""


class ConvergenceError(LatticeCountError, ArithmeticError):
    """Quadrature or series failed to converge."""


class LocalDivergenceError(LatticeCountError, ArithmeticError):
    """A single local Euler factor diverges."""


class ConfigError(LatticeCountError, ValueError):
    """Bad experiment configuration or command line input."""
