"""Exception types shared across the package."""


class FpamError(Exception):
    """Base class for all package-specific errors."""


class NonConvergent(FpamError):
    """Adaptive quadrature failed to reach the requested tolerance."""


class GridMismatch(FpamError):
    """Two paths or fields do not share a common grid."""


class DivergentDiagonal(FpamError):
    """Same-path Hamiltonian requested outside the integrable regime."""


class NotIntegrable(FpamError):
    """Requested expectation is infinite for these noise parameters."""


class IllConditioned(FpamError):
    """Input data cannot support a stable fit."""


class AsymmetricInput(FpamError):
    """Test function violates the required Hermitian symmetry."""


class NotConverged(FpamError):
    """Iterative eigensolver hit its iteration cap before converging."""


class Diverged(FpamError):
    """Optimizer value exceeded its configured ceiling."""


class NotNormalized(FpamError):
    """Space-time field violates the per-slice normalization."""


class ConfigInvalid(FpamError):
    """Run configuration failed validation; message lists the bad fields."""


class RegimeMismatch(FpamError):
    """Requested estimator is incompatible with the admissibility regime."""


class MissingRecords(FpamError):
    """Run directory lacks the records needed for the requested output."""
