"""Projected gradient ascent for the coupling-vs-energy variational constant.

The objective over slice-normalized space-time profiles g(s, x) is

    (1/2) int int int gamma(x-y) |r-s|^(-b0) g^2(s,x) g^2(r,y) - int |xi|^alpha |ghat|^2,

discretized on a periodic box of side `box` used as a free-space surrogate:
the interaction is evaluated spectrally with exact spectral-measure masses
per frequency cell, the time coupling reuses the exact |r-s|^(-b0) cell
integrals, and the energy keeps free-space weights |k/L|^alpha / L^d (no
torus factor).  The reported maximum is a certified lower bound of the
grid-discretized supremum; all absolute claims are restricted to the
degenerate analytically-solvable cases.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .errors import ConfigInvalid, Diverged, NotNormalized, RegimeMismatch
from .functionals import cell_time_weights
from .kernels import NoiseSpec

NORMALIZATION_ATOL = 1e-10


@dataclass(frozen=True)
class BoxGrid:
    box: float
    N: int
    d: int
    n_t: int = 16

    def __post_init__(self):
        if self.box <= 0 or self.N < 2 or self.n_t < 1:
            raise ConfigInvalid("box, N and n_t must be positive (N >= 2)")

    @property
    def spacing(self) -> float:
        return self.box / self.N

    @property
    def cell_volume(self) -> float:
        return self.spacing ** self.d

    @property
    def shape(self) -> tuple:
        return (self.n_t,) + (self.N,) * self.d


@dataclass(frozen=True)
class AscentOptions:
    step: float = 1e-2
    max_iter: int = 20000
    tol: float = 1e-8
    patience: int = 10
    restarts: int = 4
    seed: int = 0
    ceiling: float = 1e6


@dataclass
class SpaceTimeField:
    """Slice-normalized profile: sum_x g(s_i, x)^2 * cell_volume = 1 per slice."""

    grid: BoxGrid
    values: np.ndarray

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if self.values.shape != self.grid.shape:
            raise ConfigInvalid(f"values must have shape {self.grid.shape}")

    def slice_norms(self) -> np.ndarray:
        axes = tuple(range(1, self.values.ndim))
        return np.sum(self.values ** 2, axis=axes) * self.grid.cell_volume

    def normalized(self) -> "SpaceTimeField":
        norms = np.sqrt(self.slice_norms())
        shape = (-1,) + (1,) * (self.values.ndim - 1)
        return SpaceTimeField(self.grid, self.values / norms.reshape(shape))


@dataclass(frozen=True)
class VariationalResult:
    M_estimate: float
    field: SpaceTimeField
    iterations: int
    final_gradient_norm: float
    grid: BoxGrid
    kernel_scale: float
    restarts: int
    converged: bool


class _Discretization:
    """Precomputed spectral masses, energy weights and time coupling."""

    def __init__(self, spec: NoiseSpec, grid: BoxGrid, kernel_scale: float):
        if spec.d != grid.d:
            raise ConfigInvalid("grid dimension must match the noise spec")
        self.spec = spec
        self.grid = grid
        self.theta = float(kernel_scale)
        L, N, d = grid.box, grid.N, grid.d
        freqs = np.fft.fftfreq(N, d=1.0 / N).astype(int)
        mesh = np.meshgrid(*([freqs] * d), indexing="ij")
        kvecs = np.stack([m.ravel() for m in mesh], axis=1)
        # interaction masses: spectral measure integrated per frequency cell
        mass = np.array([kernels.mu_cell_mass(spec, k, 1.0 / L) for k in kvecs])
        self.mass = mass.reshape((N,) * d)
        # free-space energy weights at lattice frequencies k / L
        knorm = np.sqrt(sum(m.astype(float) ** 2 for m in mesh))
        self.energy_w = (knorm / L) ** spec.alpha / L ** d
        dt = 1.0 / grid.n_t
        lag = np.abs(np.arange(grid.n_t)[:, None] - np.arange(grid.n_t)[None, :])
        self.time_w = dt ** (2.0 - spec.beta0) * cell_time_weights(spec.beta0, grid.n_t)[lag]
        self.h_vol = grid.cell_volume

    def _fftn(self, arr):
        return np.fft.fftn(arr, axes=tuple(range(1, arr.ndim)))

    def _ifftn(self, arr):
        return np.fft.ifftn(arr, axes=tuple(range(1, arr.ndim)))

    def value_and_grad(self, g: np.ndarray, want_grad: bool = True):
        u = g * g
        uhat = self._fftn(u) * self.h_vol
        ghat = self._fftn(g) * self.h_vol
        nt = self.grid.n_t
        U = uhat.reshape(nt, -1)
        Iij = np.real((U * self.mass.ravel()) @ U.conj().T)
        interaction = 0.5 * float(np.sum(self.time_w * Iij))
        energy = float(np.sum(self.energy_w[None] * np.abs(ghat) ** 2)) / nt
        value = self.theta * interaction - energy
        if not want_grad:
            return value, None
        # potential field from every slice, coupled through the time weights
        phi = np.real(self._ifftn(self.mass[None] * uhat)) * (self.grid.N ** self.grid.d)
        coupled = np.tensordot(self.time_w, phi, axes=(1, 0))
        grad_int = 2.0 * g * self.h_vol * coupled
        psi = np.real(self._ifftn(self.energy_w[None] * ghat)) * (self.grid.N ** self.grid.d)
        grad_energy = 2.0 * self.h_vol * psi / nt
        return value, self.theta * grad_int - grad_energy


def functional_eval(field: SpaceTimeField, spec: NoiseSpec, kernel_scale: float = 1.0,
                    check_normalization: bool = True) -> float:
    """Objective value at `field`; raises NotNormalized off the slice spheres.

    check_normalization=False evaluates the same formula at arbitrary fields
    (used for finite-difference gradient probes).
    """
    if check_normalization:
        err = np.max(np.abs(field.slice_norms() - 1.0))
        if err > NORMALIZATION_ATOL:
            raise NotNormalized(f"slice normalization violated by {err:.2e}")
    disc = _Discretization(spec, field.grid, kernel_scale)
    value, _ = disc.value_and_grad(field.values, want_grad=False)
    return value


def functional_gradient(field: SpaceTimeField, spec: NoiseSpec,
                        kernel_scale: float = 1.0) -> np.ndarray:
    """Euclidean gradient of the objective with respect to the grid values."""
    disc = _Discretization(spec, field.grid, kernel_scale)
    _, grad = disc.value_and_grad(field.values)
    return grad


def _project_tangent(g: np.ndarray, grad: np.ndarray, h_vol: float) -> np.ndarray:
    axes = tuple(range(1, g.ndim))
    inner = np.sum(grad * g, axis=axes, keepdims=True) * h_vol
    return grad - inner * g


def _renormalize(g: np.ndarray, h_vol: float) -> np.ndarray:
    axes = tuple(range(1, g.ndim))
    norms = np.sqrt(np.sum(g * g, axis=axes, keepdims=True) * h_vol)
    return g / norms


def _initial_field(grid: BoxGrid, rng: np.random.Generator) -> np.ndarray:
    """Smooth positive random bump: squared band-limited Gaussian field."""
    shape = (grid.N,) * grid.d
    freqs = np.fft.fftfreq(grid.N, d=1.0 / grid.N)
    mesh = np.meshgrid(*([freqs] * grid.d), indexing="ij")
    knorm = np.sqrt(sum(m ** 2 for m in mesh))
    damp = np.exp(-0.5 * (knorm / 4.0) ** 2)
    w = np.fft.ifftn(np.fft.fftn(rng.standard_normal(shape)) * damp).real
    base = w * w + 1e-3
    g = np.broadcast_to(base, grid.shape).copy()
    # mild slice-to-slice variation keeps the time coupling exercised
    g *= 1.0 + 0.05 * rng.standard_normal((grid.n_t,) + (1,) * grid.d)
    return _renormalize(np.abs(g) + 1e-6, grid.cell_volume)


def _ascend(disc: _Discretization, g0: np.ndarray, opts: AscentOptions):
    g = g0
    value, grad = disc.value_and_grad(g)
    step = opts.step
    quiet = 0
    it = 0
    for it in range(1, opts.max_iter + 1):
        tgrad = _project_tangent(g, grad, disc.h_vol)
        moved = False
        for _ in range(60):
            cand = _renormalize(g + step * tgrad, disc.h_vol)
            cval, cgrad = disc.value_and_grad(cand)
            if cval >= value:
                moved = True
                break
            step *= 0.5
        if not moved:
            break
        rel = abs(cval - value) / max(abs(cval), 1e-300)
        g, value, grad = cand, cval, cgrad
        if value > opts.ceiling:
            raise Diverged(f"objective exceeded ceiling {opts.ceiling:g}")
        step = min(step * 1.3, 1e3)
        quiet = quiet + 1 if rel < opts.tol else 0
        if quiet >= opts.patience:
            break
    gnorm = float(np.linalg.norm(_project_tangent(g, grad, disc.h_vol).ravel()))
    return g, value, it, gnorm


def maximize_M(spec: NoiseSpec, grid: BoxGrid, opts: AscentOptions | None = None,
               kernel_scale: float = 1.0) -> VariationalResult:
    """Best local maximum over seeded restarts of the projected ascent."""
    if kernels.dalang_check(spec) != kernels.REGIME_FULL:
        raise RegimeMismatch("the variational constant is finite only in the full regime")
    opts = opts or AscentOptions()
    disc = _Discretization(spec, grid, kernel_scale)
    best = None
    for r in range(opts.restarts):
        rng = np.random.default_rng(np.random.SeedSequence(entropy=opts.seed,
                                                           spawn_key=(r,)))
        g0 = _initial_field(grid, rng)
        g, value, its, gnorm = _ascend(disc, g0, opts)
        if best is None or value > best[1]:
            best = (g, value, its, gnorm)
    g, value, its, gnorm = best
    fld = SpaceTimeField(grid, g)
    final = functional_eval(fld, spec, kernel_scale, check_normalization=False)
    return VariationalResult(M_estimate=final, field=fld, iterations=its,
                             final_gradient_norm=gnorm, grid=grid,
                             kernel_scale=kernel_scale, restarts=opts.restarts,
                             converged=its < opts.max_iter)


def stationary_M(spec: NoiseSpec, grid: BoxGrid, opts: AscentOptions | None = None,
                 kernel_scale: float = 1.0) -> VariationalResult:
    """Time-constant restriction: the same ascent on a single slice."""
    flat = BoxGrid(box=grid.box, N=grid.N, d=grid.d, n_t=1)
    return maximize_M(spec, flat, opts, kernel_scale)


def critical_constant(spec: NoiseSpec, M_value: float) -> float:
    """Critical exponential-integrability constant derived from M.

    (beta/(alpha-beta)) ((alpha-beta)/(2 alpha))^(alpha/beta) M^((beta-alpha)/beta)
    """
    if M_value <= 0:
        raise ConfigInvalid("M must be positive")
    beta = spec.beta_total
    if beta <= 0:
        raise ConfigInvalid("critical constant needs beta > 0")
    a = spec.alpha
    return beta / (a - beta) * ((a - beta) / (2 * a)) ** (a / beta) \
        * M_value ** ((beta - a) / beta)


def lyapunov_prediction(spec: NoiseSpec, p: float, rho: float, M_value: float) -> float:
    """Predicted normalized growth coefficient (p - rho)^(alpha/(alpha-beta)) M."""
    if p < 1 or not (0.0 <= rho <= 1.0) or (p == 1 and rho == 1):
        raise ConfigInvalid("need p >= 1, rho in [0,1], (p, rho) != (1, 1)")
    return (p - rho) ** (spec.alpha / (spec.alpha - spec.beta_total)) * M_value
