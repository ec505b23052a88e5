"""Numerical laboratory for exponential functionals of stable processes.

Subpackages: kernels (covariance structure), stable (path sampling),
functionals (singular Hamiltonian quadrature), montecarlo (estimators),
spectral (torus eigen-analysis), variational (growth-constant solver),
cli (pipelines and reporting).
"""

__version__ = "0.1.0"

from .kernels import NoiseSpec, KernelConstants, dalang_check  # noqa: F401
from .stable import PathSpec, Path, TorusPath  # noqa: F401
from .functionals import QuadratureRule, HamiltonianValue  # noqa: F401
from .montecarlo import ExperimentConfig, EstimateRecord  # noqa: F401
