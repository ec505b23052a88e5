"""Symmetric alpha-stable path sampling and the torus quotient.

Increments are exact in law for the normalization E exp(i l . X_t) =
exp(-t |l|^alpha): dimension one uses the Chambers-Mallows-Stuck transform,
higher dimensions subordinate a Brownian displacement to a positive
(alpha/2)-stable time, and alpha = 2 falls through to a plain Gaussian.
The only discretization on a sampled path is the time grid itself; paths
are never interpolated between grid points.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigInvalid


@dataclass(frozen=True)
class PathSpec:
    d: int
    alpha: float
    horizon: float
    n_steps: int
    seed: int

    def __post_init__(self):
        if self.n_steps < 1:
            raise ConfigInvalid("n_steps must be >= 1")
        if self.horizon <= 0:
            raise ConfigInvalid("horizon must be positive")
        if not (0.0 < self.alpha <= 2.0):
            raise ConfigInvalid("alpha must lie in (0, 2]")

    def to_json_dict(self) -> dict:
        return {"d": self.d, "alpha": self.alpha, "horizon": self.horizon,
                "n_steps": self.n_steps, "seed": self.seed}


@dataclass(frozen=True)
class Path:
    """Trajectory on a uniform grid; positions[0] is the origin."""

    times: np.ndarray       # shape (n_steps + 1,)
    positions: np.ndarray   # shape (n_steps + 1, d)

    @property
    def n_steps(self) -> int:
        return len(self.times) - 1

    @property
    def d(self) -> int:
        return self.positions.shape[1]

    @property
    def horizon(self) -> float:
        return float(self.times[-1])


@dataclass(frozen=True)
class TorusPath:
    """Path reduced modulo the period, coordinate-wise into [0, M)."""

    period: float
    times: np.ndarray
    positions: np.ndarray


def replica_rng(master_seed: int, replica: int, stream: int = 0) -> np.random.Generator:
    """Independent generator for one replica; reproducible and order-free."""
    return np.random.default_rng(
        np.random.SeedSequence(entropy=master_seed, spawn_key=(stream, replica)))


def _cms_symmetric(alpha: float, rng: np.random.Generator, size) -> np.ndarray:
    """Standard symmetric stable draw, char. function exp(-|l|^alpha)."""
    if alpha == 2.0:
        return rng.standard_normal(size) * np.sqrt(2.0)
    if alpha == 1.0:
        return rng.standard_cauchy(size)
    u = rng.uniform(-np.pi / 2, np.pi / 2, size)
    e = rng.exponential(1.0, size)
    s = np.sin(alpha * u) / np.cos(u) ** (1.0 / alpha)
    return s * (np.cos((1.0 - alpha) * u) / e) ** ((1.0 - alpha) / alpha)


def _positive_stable(a: float, rng: np.random.Generator, size) -> np.ndarray:
    """One-sided a-stable draw with Laplace transform exp(-u^a), 0 < a < 1."""
    u = rng.uniform(0.0, np.pi, size)
    w = rng.exponential(1.0, size)
    return (np.sin(a * u) / np.sin(u) ** (1.0 / a)) \
        * (np.sin((1.0 - a) * u) / w) ** ((1.0 - a) / a)


def sample_increment(alpha: float, d: int, dt: float, rng: np.random.Generator,
                     size: int | None = None) -> np.ndarray:
    """Increments of the process over a step dt: E exp(i l . X) = exp(-dt |l|^alpha).

    Returns shape (d,) for size None, else (size, d).
    """
    if dt <= 0:
        raise ConfigInvalid("dt must be positive")
    n = 1 if size is None else size
    if alpha == 2.0:
        out = rng.standard_normal((n, d)) * np.sqrt(2.0 * dt)
    elif d == 1:
        out = (dt ** (1.0 / alpha) * _cms_symmetric(alpha, rng, n)).reshape(n, 1)
    else:
        s = dt ** (2.0 / alpha) * _positive_stable(alpha / 2.0, rng, n)
        out = np.sqrt(2.0 * s)[:, None] * rng.standard_normal((n, d))
    return out[0] if size is None else out


def sample_path(spec: PathSpec, rng: np.random.Generator | None = None) -> Path:
    """Cumulative sum of exact increments on the uniform grid, from the origin."""
    if rng is None:
        rng = np.random.default_rng(np.random.SeedSequence(entropy=spec.seed))
    dt = spec.horizon / spec.n_steps
    inc = sample_increment(spec.alpha, spec.d, dt, rng, size=spec.n_steps)
    pos = np.vstack([np.zeros((1, spec.d)), np.cumsum(inc, axis=0)])
    times = np.linspace(0.0, spec.horizon, spec.n_steps + 1)
    return Path(times=times, positions=pos)


def sample_position_batch(alpha: float, d: int, horizon: float, n_steps: int,
                          master_seed: int, replicas: range,
                          stream: int = 0) -> np.ndarray:
    """Positions for a batch of independent paths, shape (len(replicas), n_steps+1, d).

    Replica r always consumes the generator derived from (master_seed, stream, r),
    so any batching of the same replica range reproduces identical paths.
    """
    dt = horizon / n_steps
    out = np.empty((len(replicas), n_steps + 1, d))
    out[:, 0, :] = 0.0
    for i, r in enumerate(replicas):
        rng = replica_rng(master_seed, r, stream)
        inc = sample_increment(alpha, d, dt, rng, size=n_steps)
        np.cumsum(inc, axis=0, out=out[i, 1:, :])
    return out


def to_torus(path: Path, M: float) -> TorusPath:
    """Quotient map: coordinates reduced modulo M into [0, M)."""
    if M <= 0:
        raise ConfigInvalid("period must be positive")
    return TorusPath(period=M, times=path.times, positions=np.mod(path.positions, M))


def export_path_csv(path: Path, spec: PathSpec, fname: str) -> None:
    """Columnar dump (t, x1..xd) with a JSON header line carrying the PathSpec."""
    import json
    header = "# " + json.dumps(spec.to_json_dict(), sort_keys=True)
    cols = np.column_stack([path.times, path.positions])
    names = ",".join(["t"] + [f"x{j + 1}" for j in range(path.d)])
    with open(fname, "w") as fh:
        fh.write(header + "\n" + names + "\n")
        np.savetxt(fh, cols, delimiter=",", fmt="%.17g")


def load_path_csv(fname: str) -> tuple[Path, PathSpec]:
    import json
    with open(fname) as fh:
        header = fh.readline()
        if not header.startswith("# "):
            raise ConfigInvalid(f"{fname} lacks the JSON header line")
        doc = json.loads(header[2:])
        fh.readline()  # column names
        data = np.loadtxt(fh, delimiter=",", ndmin=2)
    spec = PathSpec(**doc)
    return Path(times=data[:, 0], positions=data[:, 1:]), spec
