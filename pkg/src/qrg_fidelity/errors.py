"""Exception types shared across the package."""


class QrgError(Exception):
    """Base class for all package errors."""


class DomainError(QrgError, ValueError):
    """A coupling, perturbation or size lies outside the model's domain."""


class PoleError(DomainError):
    """A renormalized coupling diverges at the requested point."""


class SizeGuardError(DomainError):
    """An exact-diagonalization request exceeds the desk-scale guard."""


class DegeneracyError(QrgError):
    """A block ground space could not be resolved into symmetry sectors."""


class FitError(QrgError, ValueError):
    """A least-squares fit was requested on unusable data."""


class InsufficientPointsError(FitError):
    pass


class NonPositiveTransformError(FitError):
    pass


class RegimeNotSpannedError(FitError):
    """The data does not reach both sides of the Nδ ≈ 1 crossover."""


class ConfigError(QrgError, ValueError):
    """A run configuration is malformed or unreadable."""
