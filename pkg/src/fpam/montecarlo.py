"""Monte Carlo estimators for exponential moments and their diagnostics.

Every estimator draws replica r from the generator keyed by
(master_seed, stream, r), reduces in log space with a fixed order, and
returns a self-describing record, so reruns with one config are
bit-identical.  Heavy-tailed weights are summarized by the effective sample
size (sum w)^2 / sum w^2; estimates are never trusted silently when it
collapses.
"""

from __future__ import annotations

import itertools
import json
import math
import time
import warnings
from dataclasses import dataclass, field, asdict

import numpy as np
from scipy.special import logsumexp

from . import functionals, kernels, stable
from .errors import (AsymmetricInput, ConfigInvalid, DivergentDiagonal,
                     IllConditioned, NotIntegrable, RegimeMismatch)
from .functionals import QuadratureRule
from .kernels import NoiseSpec

# stream tags keep the estimators' random draws disjoint
STREAM_EXP_MOMENT = 3
STREAM_MOMENT_BASE = 16
STREAM_LOWER_BOUND = 8
STREAM_FK = 9


@dataclass(frozen=True)
class ExperimentConfig:
    spec: NoiseSpec
    p: float = 1.0
    rho: float = 1.0
    t_grid: tuple[float, ...] = (1.0,)
    n_replicas: int = 1000
    n_steps: int = 128
    master_seed: int = 0
    rule: QuadratureRule = field(default_factory=QuadratureRule)

    def __post_init__(self):
        if self.n_replicas < 1 or self.n_steps < 1:
            raise ConfigInvalid("n_replicas and n_steps must be positive")
        if not (0.0 <= self.rho <= 1.0):
            raise ConfigInvalid("rho must lie in [0, 1]")
        if self.p < 1:
            raise ConfigInvalid("moment order must be >= 1")

    def to_json_dict(self) -> dict:
        return {"spec": self.spec.to_json_dict(), "p": self.p, "rho": self.rho,
                "t_grid": list(self.t_grid), "n_replicas": self.n_replicas,
                "n_steps": self.n_steps, "master_seed": self.master_seed,
                "rule": self.rule.to_json_dict()}


@dataclass
class EstimateRecord:
    """One Monte Carlo estimate with its provenance; reproducible from itself."""

    estimator: str
    config: dict
    params: dict
    point_estimate: float
    stderr: float
    log_estimate: float
    log_stderr: float
    effective_sample_size: float
    n_replicas: int
    master_seed: int
    stream: int
    wall_time: float = 0.0

    def to_json_dict(self) -> dict:
        # wall_time is volatile and lives in the run manifest instead
        doc = asdict(self)
        doc.pop("wall_time")
        return doc

    def to_json(self) -> str:
        return json.dumps(self.to_json_dict(), sort_keys=True)


def _reduce_log_weights(exponents: np.ndarray) -> tuple[float, float, float, float, float]:
    """(point, stderr, log_est, log_stderr, ess) from log weights, overflow-safe."""
    n = len(exponents)
    lse = logsumexp(exponents)
    log_mean = lse - math.log(n)
    lse2 = logsumexp(2.0 * exponents)
    log_mean2 = lse2 - math.log(n)
    # relative spread sqrt(E w^2 / (E w)^2 - 1); stable in log space
    rel_var = math.expm1(min(log_mean2 - 2.0 * log_mean, 700.0))
    rel_stderr = math.sqrt(max(rel_var, 0.0) / n)
    ess = math.exp(min(2.0 * lse - lse2, 700.0))
    point = math.exp(log_mean) if log_mean < 700 else math.inf
    stderr = point * rel_stderr if math.isfinite(point) else math.inf
    return point, stderr, float(log_mean), rel_stderr, ess


def _make_record(estimator: str, config: ExperimentConfig, params: dict,
                 exponents: np.ndarray, stream: int, t0: float) -> EstimateRecord:
    point, stderr, log_est, log_se, ess = _reduce_log_weights(exponents)
    return EstimateRecord(
        estimator=estimator, config=config.to_json_dict(), params=params,
        point_estimate=point, stderr=stderr, log_estimate=log_est,
        log_stderr=log_se, effective_sample_size=ess,
        n_replicas=config.n_replicas, master_seed=config.master_seed,
        stream=stream, wall_time=time.perf_counter() - t0)


def exp_moment(config: ExperimentConfig, theta: float, t: float) -> EstimateRecord:
    """Estimate E exp(theta * H) over independent single paths (full regime)."""
    if theta <= 0:
        raise ConfigInvalid("theta must be positive")
    if kernels.dalang_check(config.spec) != kernels.REGIME_FULL:
        raise NotIntegrable("exp-moment of the single-path Hamiltonian needs the full regime")
    t0 = time.perf_counter()
    h = functionals.hamiltonian_sample(config.spec, t, config.n_replicas,
                                       config.n_steps, config.master_seed,
                                       config.rule, stream=STREAM_EXP_MOMENT)
    return _make_record("exp-moment", config, {"theta": theta, "t": t},
                        theta * h, STREAM_EXP_MOMENT, t0)


def _moment_exponents(config: ExperimentConfig, t: float) -> np.ndarray:
    n = int(config.p)
    if n != config.p:
        raise ConfigInvalid("Monte Carlo moments need an integer order")
    rho = config.rho
    regime = kernels.dalang_check(config.spec)
    if regime == kernels.REGIME_NONE:
        raise RegimeMismatch("no admissible regime for this spec")
    if regime == kernels.REGIME_SKOROHOD and rho != 1.0:
        raise DivergentDiagonal("fractional-removal moments need the full regime")
    nc = config.rule.n_cells or config.n_steps
    batch = max(1, int(2.0e7 / (nc * nc * config.spec.d)))
    out = np.zeros(config.n_replicas)
    for lo in range(0, config.n_replicas, batch):
        hi = min(lo + batch, config.n_replicas)
        reps = range(lo, hi)
        pos = [stable.sample_position_batch(config.spec.alpha, config.spec.d, t,
                                            config.n_steps, config.master_seed,
                                            reps, stream=STREAM_MOMENT_BASE + j)
               for j in range(n)]
        acc = np.zeros(hi - lo)
        for j in range(n):
            for k in range(j + 1, n):
                hjk, _ = functionals.hamiltonian_batch(pos[j], pos[k], t, config.spec,
                                                       config.rule, same_path=False)
                acc += hjk
            if rho < 1.0:
                hjj, _ = functionals.hamiltonian_batch(pos[j], pos[j], t, config.spec,
                                                       config.rule, same_path=True)
                acc += 0.5 * (1.0 - rho) * hjj
        out[lo:hi] = acc
    return out


def moment_u_rho(config: ExperimentConfig, t: float) -> EstimateRecord:
    """Estimate the n-th moment of the interpolated solution at horizon t.

    The exponent is (1/2) sum_{j != k} H_jk + ((1 - rho)/2) sum_j H_jj over
    n = p independent paths; diagonal terms are skipped entirely at rho = 1.
    """
    t0 = time.perf_counter()
    expo = _moment_exponents(config, t)
    return _make_record("moment", config, {"t": t, "n": int(config.p), "rho": config.rho},
                        expo, STREAM_MOMENT_BASE, t0)


def chi_exponent(spec: NoiseSpec) -> float:
    """Growth exponent (2 alpha - beta - alpha beta0) / (alpha - beta)."""
    beta = spec.beta_total
    return (2.0 * spec.alpha - beta - spec.alpha * spec.beta0) / (spec.alpha - beta)


def t_p_scale(spec: NoiseSpec, t: float, p: float, rho: float) -> float:
    """Equalized horizon t^chi (p - rho)^(alpha/(alpha-beta))."""
    return t ** chi_exponent(spec) * (p - rho) ** (spec.alpha / (spec.alpha - spec.beta_total))


@dataclass(frozen=True)
class LyapunovFit:
    slope: float
    intercept: float
    r2: float
    chi: float
    slope_over_p: float
    n_used: int


def lyapunov_fit(records, spec: NoiseSpec, p: float, rho: float) -> LyapunovFit:
    """Weighted least squares of log-estimates against t^chi.

    Accepts EstimateRecords or (t, log_estimate, stderr) triples.  Records
    whose effective sample size fell below 1% of the replica count are
    dropped with a warning; the normalized slope (divided by p) is the
    quantity comparable to the variational prediction.
    """
    rows = []
    for rec in records:
        if isinstance(rec, EstimateRecord):
            ess_frac = rec.effective_sample_size / max(rec.n_replicas, 1)
            if ess_frac < 0.01:
                warnings.warn(
                    f"dropping t={rec.params.get('t')}: effective sample size "
                    f"{ess_frac:.2%} of replicas", stacklevel=2)
                continue
            rows.append((rec.params["t"], rec.log_estimate, rec.log_stderr))
        else:
            rows.append(tuple(rec))
    if len(rows) < 3:
        raise IllConditioned("need at least 3 usable horizons")
    ts = np.array([r[0] for r in rows])
    if ts.max() < 2.0 * ts.min():
        raise IllConditioned("horizon grid must span at least a factor of 2")
    y = np.array([r[1] for r in rows])
    se = np.array([max(r[2], 1e-12) for r in rows])
    x = ts ** chi_exponent(spec)
    w = 1.0 / se ** 2
    X = np.column_stack([x, np.ones_like(x)])
    WX = X * w[:, None]
    coef, *_ = np.linalg.lstsq(WX.T @ X, WX.T @ y, rcond=None)
    resid = y - X @ coef
    ybar = np.sum(w * y) / np.sum(w)
    ss_res = np.sum(w * resid ** 2)
    ss_tot = np.sum(w * (y - ybar) ** 2)
    r2 = 1.0 - ss_res / ss_tot if ss_tot > 0 else 1.0
    return LyapunovFit(slope=float(coef[0]), intercept=float(coef[1]), r2=float(r2),
                       chi=chi_exponent(spec), slope_over_p=float(coef[0]) / p,
                       n_used=len(rows))


# ---------------------------------------------------------------------------
# Variational lower bound from lattice test functions
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class FrequencyLattice:
    """Complex test function on a symmetric (tau, xi) frequency lattice.

    k_tau holds integers (tau = k dtau), k_xi integer vectors (xi = k dxi);
    values has shape (len(k_tau), len(k_xi)).
    """

    k_tau: np.ndarray
    k_xi: np.ndarray
    values: np.ndarray
    dtau: float
    dxi: float

    @classmethod
    def build(cls, K_tau: int, K_xi: int, d: int, dtau: float, dxi: float,
              fill) -> "FrequencyLattice":
        kt = np.arange(-K_tau, K_tau + 1)
        ax = np.arange(-K_xi, K_xi + 1)
        mesh = np.meshgrid(*([ax] * d), indexing="ij")
        kx = np.stack([m.ravel() for m in mesh], axis=1)
        vals = np.array([[complex(fill(ti * dtau, xi * dxi)) for xi in kx] for ti in kt])
        return cls(k_tau=kt, k_xi=kx, values=vals, dtau=dtau, dxi=dxi)

    def hermitian_defect(self) -> float:
        # lattice is symmetric under negation: reversal along every axis
        flipped = self.values[::-1]
        # k_xi rows enumerate a full product lattice in mesh order; negation
        # reverses that order
        flipped = flipped[:, ::-1]
        return float(np.max(np.abs(np.conj(flipped) - self.values)))


def _lattice_weights(spec: NoiseSpec, lat: FrequencyLattice):
    w_t = np.array([kernels.mu0_cell_mass(spec, int(k), lat.dtau) for k in lat.k_tau])
    w_x = np.array([kernels.mu_cell_mass(spec, k, lat.dxi) for k in lat.k_xi])
    return w_t, w_x


def variational_lower_bound_mc(h: FrequencyLattice, config: ExperimentConfig,
                               t: float) -> EstimateRecord:
    """Certified lower-bound estimate for the p-norm of the solution.

    E_X exp( int_0^t Fh(s, X_s) ds - |h|^2 / (2 (p - rho)) ), with Fh the
    weighted inverse transform of h against the spectral measures, evaluated
    by direct lattice summation along the sampled path.
    """
    defect = h.hermitian_defect()
    if defect > 1e-12:
        raise AsymmetricInput(f"Hermitian symmetry violated by {defect:.2e}")
    if config.p == 1.0 and config.rho == 1.0:
        raise ConfigInvalid("(p, rho) = (1, 1) makes the bound degenerate")
    t0 = time.perf_counter()
    spec = config.spec
    w_t, w_x = _lattice_weights(spec, h)
    amp = w_t[:, None] * h.values * w_x[None, :]          # (n_tau, n_xi)
    norm_sq = float(np.sum(np.abs(h.values) ** 2 * w_t[:, None] * w_x[None, :]))
    penalty = norm_sq / (2.0 * (config.p - config.rho))
    dt = t / config.n_steps
    times = np.arange(config.n_steps) * dt
    taus = h.k_tau * h.dtau
    phase_t = np.exp(-2j * np.pi * np.outer(taus, times))   # (n_tau, n_steps)
    B = amp.T @ phase_t                                     # (n_xi, n_steps)
    xi_pts = h.k_xi * h.dxi                                 # (n_xi, d)
    expo = np.empty(config.n_replicas)
    for r in range(config.n_replicas):
        rng = stable.replica_rng(config.master_seed, r, STREAM_LOWER_BOUND)
        inc = stable.sample_increment(spec.alpha, spec.d, dt, rng, size=config.n_steps)
        pos = np.vstack([np.zeros((1, spec.d)), np.cumsum(inc, axis=0)])[:-1]
        phase_x = np.exp(-2j * np.pi * (pos @ xi_pts.T))    # (n_steps, n_xi)
        vals = np.einsum("jm,mj->m", B, phase_x)
        # Hermitian symmetry makes the transform real; tolerate roundoff only
        integral = dt * float(np.sum(vals.real))
        expo[r] = integral - penalty
    return _make_record("lower-bound", config,
                        {"t": t, "p": config.p, "rho": config.rho,
                         "norm_sq": norm_sq}, expo, STREAM_LOWER_BOUND, t0)


# ---------------------------------------------------------------------------
# Feynman-Kac limit estimator on the torus
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class GridFunction:
    """Samples of f(s, x) on [0, 1] x T_M^d: shape (n_slices,) + (N,)*d.

    Slices sit at s_j = j / (n_slices - 1); a single slice means a
    time-constant potential.
    """

    period: float
    values: np.ndarray

    def __post_init__(self):
        if self.values.ndim < 1:
            raise ConfigInvalid("grid function needs at least one slice")

    @property
    def n_slices(self) -> int:
        return self.values.shape[0]

    @property
    def d(self) -> int:
        return self.values.ndim - 1


def _interp_periodic(slice_vals: np.ndarray, pos: np.ndarray, period: float) -> np.ndarray:
    """Multilinear periodic interpolation of one slice at positions (n, d)."""
    d = slice_vals.ndim
    N = slice_vals.shape[0]
    rel = pos / (period / N)
    base = np.floor(rel).astype(int)
    frac = rel - base
    out = np.zeros(pos.shape[0])
    for corner in itertools.product((0, 1), repeat=d):
        idx = tuple(np.mod(base[:, j] + corner[j], N) for j in range(d))
        w = np.ones(pos.shape[0])
        for j in range(d):
            w = w * (frac[:, j] if corner[j] else 1.0 - frac[:, j])
        out += w * slice_vals[idx]
    return out


def eval_grid_function(f: GridFunction, s: np.ndarray, pos: np.ndarray) -> np.ndarray:
    """f(s_m, x_m) by linear blending in time of spatial interpolations."""
    ns = f.n_slices
    if ns == 1:
        return _interp_periodic(f.values[0], pos, f.period)
    ss = np.clip(s, 0.0, 1.0) * (ns - 1)
    j0 = np.minimum(ss.astype(int), ns - 2)
    wt = ss - j0
    out = np.empty(len(s))
    for j in np.unique(j0):
        m = j0 == j
        lo = _interp_periodic(f.values[j], pos[m], f.period)
        hi = _interp_periodic(f.values[j + 1], pos[m], f.period)
        out[m] = (1.0 - wt[m]) * lo + wt[m] * hi
    return out


def fk_limit_mc(f: GridFunction, M: float, t: float,
                config: ExperimentConfig) -> EstimateRecord:
    """(1/t) log E exp( int_0^t f(s/t, X^M_s) ds ) by naive Monte Carlo.

    Midpoint rule in time on the path grid with the cadlag left path value;
    the record's log_estimate and log_stderr are already divided by t.
    """
    if abs(M - f.period) > 1e-12:
        raise ConfigInvalid("grid function period must match the torus period")
    t0 = time.perf_counter()
    spec = config.spec
    dt = t / config.n_steps
    s_mid = (np.arange(config.n_steps) + 0.5) * dt / t
    expo = np.empty(config.n_replicas)
    for r in range(config.n_replicas):
        rng = stable.replica_rng(config.master_seed, r, STREAM_FK)
        inc = stable.sample_increment(spec.alpha, spec.d, dt, rng, size=config.n_steps)
        pos = np.mod(np.vstack([np.zeros((1, spec.d)), np.cumsum(inc, axis=0)])[:-1], M)
        expo[r] = dt * float(np.sum(eval_grid_function(f, s_mid, pos)))
    rec = _make_record("fk-limit", config, {"t": t, "M": M}, expo, STREAM_FK, t0)
    rec.log_estimate /= t
    rec.log_stderr /= t
    return rec
