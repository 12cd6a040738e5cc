"""Exception hierarchy shared across the package."""


class OrthoGPError(Exception):
    """Base class for all package errors."""


class DomainError(OrthoGPError, ValueError):
    """Invalid box bounds or a point outside the domain."""


class ConfigurationError(OrthoGPError, ValueError):
    """Inconsistent model setup (method/kernel pairing, schema, basis)."""


class NumericalError(OrthoGPError, ArithmeticError):
    """A factorization or solve failed beyond the jitter ladder."""


class QuadratureBudgetError(OrthoGPError, ValueError):
    """Requested tensor quadrature exceeds the configured node budget."""


class OptimizationError(OrthoGPError, RuntimeError):
    """Every likelihood optimization start failed."""
