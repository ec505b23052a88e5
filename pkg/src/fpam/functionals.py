"""The space-time Hamiltonian H = int int |r-s|^(-b0) gamma(X_r - X_s) dr ds.

Quadrature layout: the shared time grid is split into square cells; within
every cell the kernel argument is frozen at the left grid points (cadlag
convention) while the |r-s| power is integrated over the cell exactly in
closed form.  Cells on the same-path diagonal band, where the spatial
kernel is singular, get a power-law correction: the increment over one
cell scales like (|r-s|/sep)^(1/alpha), so freezing gamma at the sampled
cell-scale increment and integrating |r-s|^(-b0-beta/alpha) analytically
makes every band cell unbiased in expectation.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import gamma as gamma_fn, hyp2f1

from . import kernels, stable
from .errors import ConfigInvalid, DivergentDiagonal, GridMismatch, NotIntegrable, RegimeMismatch

POLICY_POWER_LAW = "power-law"
POLICY_EXCLUDE = "exclude"


@dataclass(frozen=True)
class QuadratureRule:
    """Cell layout and diagonal policy for the Hamiltonian double sum.

    n_cells None means one cell per path step.  band_width counts cells:
    pairs with |m - n| < band_width are treated as singular when both path
    arguments are the same trajectory.
    """

    n_cells: int | None = None
    diagonal_policy: str = POLICY_POWER_LAW
    band_width: int = 1
    kernel_cap: float = 1e12

    def __post_init__(self):
        if self.diagonal_policy not in (POLICY_POWER_LAW, POLICY_EXCLUDE):
            raise ConfigInvalid(f"unknown diagonal policy {self.diagonal_policy!r}")
        if self.band_width < 1:
            raise ConfigInvalid("band_width must be >= 1")

    def to_json_dict(self) -> dict:
        return {"n_cells": self.n_cells, "diagonal_policy": self.diagonal_policy,
                "band_width": self.band_width, "kernel_cap": self.kernel_cap}


@dataclass(frozen=True)
class HamiltonianValue:
    H: float
    Z: float | None
    diagonal_correction: float
    pair: tuple[int, int] = (0, 0)


def cell_time_weights(q: float, n_cells: int) -> np.ndarray:
    """w[k] = int over the unit cell pair at lag k of |r-s|^(-q), k = 0..n_cells-1."""
    if q >= 1.0:
        raise ConfigInvalid("time-kernel exponent must be < 1")
    w = np.empty(n_cells)
    w[0] = 2.0 / ((1.0 - q) * (2.0 - q))
    if n_cells > 1:
        k = np.arange(1, n_cells, dtype=float)
        if q == 0.0:
            w[1:] = 1.0
        else:
            w[1:] = ((k + 1) ** (2 - q) - 2 * k ** (2 - q) + (k - 1) ** (2 - q)) \
                / ((1 - q) * (2 - q))
    return w


def _gamma_of_diffs(spec, diff):
    # diff shape (..., d); +inf where the argument vanishes
    return np.asarray(kernels.gamma_eval(spec, diff))


def corner_cell_weight(beta0: float, c: float) -> float:
    """int over [0,1]^2 of |u-v|^(-beta0) (u+v)^(-c) du dv, for beta0, c in [0,1).

    Weight of the shared-start corner cell of a cross-path pair, where the
    path difference vanishes at the corner and scales like (u+v)^(1/alpha).
    """
    iw = 2.0 ** (-c) / (1.0 - beta0) * hyp2f1(c, 1.0 - beta0, 2.0 - beta0, 0.5)
    return 2.0 / (2.0 - beta0 - c) * iw


def _lag_matrix(n_cells: int) -> np.ndarray:
    idx = np.arange(n_cells)
    return np.abs(idx[:, None] - idx[None, :])


def hamiltonian_batch(pos_i: np.ndarray, pos_j: np.ndarray, horizon: float,
                      spec: kernels.NoiseSpec, rule: QuadratureRule,
                      same_path: bool) -> tuple[np.ndarray, np.ndarray]:
    """Hamiltonian values for batched aligned paths.

    pos_* have shape (B, n_steps + 1, d).  Returns (H, diagonal_correction),
    both shape (B,).  Regime preconditions are the caller's business.
    """
    B, npts, d = pos_i.shape
    n_steps = npts - 1
    nc = rule.n_cells if rule.n_cells is not None else n_steps
    if n_steps % nc != 0:
        raise ConfigInvalid("n_cells must divide the path step count")
    stride = n_steps // nc
    dt_cell = horizon / nc
    b0 = spec.beta0
    beta = spec.beta_total

    left = np.arange(nc) * stride
    pi = pos_i[:, left, :]
    pj = pos_j[:, left, :]

    lag = _lag_matrix(nc)
    w0 = dt_cell ** (2.0 - b0) * cell_time_weights(b0, nc)[lag]

    diff = pi[:, :, None, :] - pj[:, None, :, :]
    A = _gamma_of_diffs(spec, diff)

    band = lag < rule.band_width if same_path else np.zeros_like(lag, dtype=bool)

    # cross pairs launched from one point: the (0,0) cell argument vanishes
    # at the corner; freeze gamma at the cell-edge difference and integrate
    # the local |r-s|^(-b0) (r+s)^(-beta/alpha) profile exactly
    corner = np.zeros(B, dtype=bool)
    if not same_path and beta > 0.0:
        corner = np.all(pos_i[:, 0, :] == pos_j[:, 0, :], axis=1)
        if np.any(corner):
            c_exp = beta / spec.alpha
            edge = _gamma_of_diffs(spec, pos_i[:, stride, :] - pos_j[:, stride, :])
            edge = np.minimum(edge, rule.kernel_cap)
            q0 = b0 + c_exp
            corner_val = edge * (2.0 * dt_cell) ** c_exp \
                * dt_cell ** (2.0 - q0) * corner_cell_weight(b0, c_exp)
            A[corner, 0, 0] = 0.0

    # off-band singular guards: subdivide flagged cells once if sub-points
    # exist, then cap
    off = ~band
    flagged = off[None, :, :] & ~np.isfinite(A) | (off[None, :, :] & (A > rule.kernel_cap))
    if np.any(flagged):
        if stride >= 2:
            bs, ms, ns = np.nonzero(flagged)
            for bb, mm, nn in zip(bs, ms, ns):
                si = pos_i[bb, left[mm]:left[mm] + stride, :]
                sj = pos_j[bb, left[nn]:left[nn] + stride, :]
                sub = _gamma_of_diffs(spec, si[:, None, :] - sj[None, :, :])
                A[bb, mm, nn] = np.minimum(sub, rule.kernel_cap).mean()
        else:
            A = np.where(flagged, np.minimum(np.nan_to_num(A, posinf=rule.kernel_cap),
                                             rule.kernel_cap), A)

    contrib = A * w0[None, :, :]
    if same_path:
        contrib = np.where(band[None, :, :], 0.0, contrib)

    # exact argument-order symmetry: fold the transpose before reducing
    sym = contrib + contrib.transpose(0, 2, 1)
    iu, ju = np.triu_indices(nc, k=1)
    H = sym[:, iu, ju].sum(axis=1) + contrib[:, np.arange(nc), np.arange(nc)].sum(axis=1)
    if np.any(corner):
        H = H + np.where(corner, corner_val, 0.0)

    corr = np.zeros(B)
    if same_path and rule.diagonal_policy == POLICY_POWER_LAW:
        q = b0 + beta / spec.alpha
        wq = dt_cell ** (2.0 - q) * cell_time_weights(q, nc)
        # lag 0: freeze gamma at the increment across the whole cell
        inc0 = pos_i[:, left + stride, :] - pos_i[:, left, :]
        g0 = _gamma_of_diffs(spec, inc0)
        g0 = np.minimum(g0, rule.kernel_cap)
        corr = (g0 * dt_cell ** (beta / spec.alpha)).sum(axis=1) * wq[0]
        # lags 1 .. band_width-1: same scaling freeze at the sampled points
        for k in range(1, min(rule.band_width, nc)):
            gk = _gamma_of_diffs(spec, pi[:, k:, :] - pi[:, :-k, :])
            gk = np.minimum(gk, rule.kernel_cap)
            sep = k * dt_cell
            corr += 2.0 * (gk * sep ** (beta / spec.alpha)).sum(axis=1) * wq[k]
        H = H + corr
    return H, corr


def _same_grid(path_i: stable.Path, path_j: stable.Path) -> bool:
    return path_i.times.shape == path_j.times.shape and np.array_equal(path_i.times, path_j.times)


def hamiltonian(path_i: stable.Path, path_j: stable.Path, spec: kernels.NoiseSpec,
                rule: QuadratureRule | None = None, pair: tuple[int, int] = (0, 0),
                allow_divergent: bool = False) -> HamiltonianValue:
    """H for one path pair; Z = sqrt(H) on the diagonal (i = j).

    H scales like horizon^(2 - beta0) x length^(-beta); no unit system is
    enforced.
    """
    rule = rule or QuadratureRule()
    if not _same_grid(path_i, path_j):
        raise GridMismatch("paths must share one time grid")
    regime = kernels.dalang_check(spec)
    if regime == kernels.REGIME_NONE:
        raise RegimeMismatch("no admissible regime for this spec (beta >= alpha)")
    same = path_i is path_j or np.array_equal(path_i.positions, path_j.positions)
    eff_rule = rule
    if same and regime != kernels.REGIME_FULL:
        if not allow_divergent:
            raise DivergentDiagonal(
                "same-path Hamiltonian diverges outside the full regime")
        eff_rule = QuadratureRule(rule.n_cells, POLICY_EXCLUDE, rule.band_width,
                                  rule.kernel_cap)
    H, corr = hamiltonian_batch(path_i.positions[None], path_j.positions[None],
                                path_i.horizon, spec, eff_rule, same_path=same)
    return HamiltonianValue(H=float(H[0]), Z=math.sqrt(float(H[0])) if same else None,
                            diagonal_correction=float(corr[0]), pair=pair)


def expected_gamma_unit(spec: kernels.NoiseSpec) -> float:
    """E gamma(X_1) for the unit-time increment; finite whenever beta < d."""
    beta = spec.beta_total
    if beta == 0.0:
        return 1.0
    if spec.kernel == "riesz":
        angular = kernels.power_law_ft_const(beta, spec.d) \
            * 2.0 * math.pi ** (spec.d / 2) / gamma_fn(spec.d / 2)
    else:
        active = [bj for bj in spec.betas if bj > 0.0]
        angular = float(np.prod([kernels.power_law_ft_const(bj, 1) for bj in active]))
        angular *= 2.0 * float(np.prod([gamma_fn(bj / 2) for bj in active])) / gamma_fn(beta / 2)
    radial = (2.0 * math.pi) ** (-beta) * gamma_fn(beta / spec.alpha) / spec.alpha
    return angular * radial


def expected_H(spec: kernels.NoiseSpec, t: float) -> float:
    """Closed-form mean of H over one path of horizon t (full regime only)."""
    if kernels.dalang_check(spec) != kernels.REGIME_FULL:
        raise NotIntegrable("mean Hamiltonian is finite only in the full regime")
    q = spec.beta0 + spec.beta_total / spec.alpha
    time_factor = 2.0 * t ** (2.0 - q) / ((1.0 - q) * (2.0 - q))
    return expected_gamma_unit(spec) * time_factor


def scaling_exponent(spec: kernels.NoiseSpec) -> float:
    """H over horizon a*t matches a^e times H over horizon t in law."""
    return 2.0 - spec.beta_total / spec.alpha - spec.beta0


def n_moment_exponent(paths: list[stable.Path], spec: kernels.NoiseSpec, rho: float,
                      rule: QuadratureRule | None = None) -> float:
    """Exponent of the n-path moment formula:

    (1/2) sum_{j,k} H_jk - (rho/2) sum_j H_jj, with the diagonal terms never
    evaluated when rho = 1 (their coefficient vanishes), which keeps
    Skorohod-only specs usable.
    """
    rule = rule or QuadratureRule()
    if not (0.0 <= rho <= 1.0):
        raise ConfigInvalid("rho must lie in [0, 1]")
    regime = kernels.dalang_check(spec)
    if regime == kernels.REGIME_NONE:
        raise RegimeMismatch("no admissible regime for this spec")
    if regime == kernels.REGIME_SKOROHOD and rho != 1.0:
        raise DivergentDiagonal("diagonal terms require the full regime unless rho = 1")
    n = len(paths)
    total = 0.0
    for j in range(n):
        for k in range(j + 1, n):
            total += hamiltonian(paths[j], paths[k], spec, rule, pair=(j, k)).H
    if rho < 1.0:
        for j in range(n):
            total += 0.5 * (1.0 - rho) * hamiltonian(paths[j], paths[j], spec, rule,
                                                     pair=(j, j)).H
    return total


def hamiltonian_sample(spec: kernels.NoiseSpec, t: float, n_samples: int,
                       n_steps: int, master_seed: int, rule: QuadratureRule | None = None,
                       stream: int = 0, batch: int | None = None) -> np.ndarray:
    """Same-path H over independent replicas, vectorized in seed-stable batches."""
    rule = rule or QuadratureRule()
    if kernels.dalang_check(spec) != kernels.REGIME_FULL:
        raise DivergentDiagonal("single-path sampling needs the full regime")
    if batch is None:
        nc = rule.n_cells or n_steps
        batch = max(1, int(2.0e7 / (nc * nc * max(spec.d, 1))))
    out = np.empty(n_samples)
    for lo in range(0, n_samples, batch):
        hi = min(lo + batch, n_samples)
        pos = stable.sample_position_batch(spec.alpha, spec.d, t, n_steps,
                                           master_seed, range(lo, hi), stream)
        out[lo:hi], _ = hamiltonian_batch(pos, pos, t, spec, rule, same_path=True)
    return out


def scaling_witness(spec: kernels.NoiseSpec, t: float, a: float, n_samples: int,
                    seed: int, n_steps: int = 128,
                    rule: QuadratureRule | None = None) -> tuple[np.ndarray, np.ndarray]:
    """Two samples that agree in law: H at horizon a*t, and a^e H at horizon t."""
    if a <= 0:
        raise ConfigInvalid("scale factor must be positive")
    h_long = hamiltonian_sample(spec, a * t, n_samples, n_steps, seed, rule, stream=1)
    h_base = hamiltonian_sample(spec, t, n_samples, n_steps, seed, rule, stream=2)
    return h_long, a ** scaling_exponent(spec) * h_base
