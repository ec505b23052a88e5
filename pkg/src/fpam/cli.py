"""Command-line orchestration: pipelines, run manifests, plot data and figures.

Every invocation owns one run directory.  Records are canonical JSON
(volatile timings live only in the manifest), so identical config + seed
reruns produce byte-identical record files.  Exit codes: 0 success,
1 numerical failure, 2 configuration error.
"""

from __future__ import annotations

import argparse
import csv
import datetime
import hashlib
import json
import os
import sys
import time
from concurrent.futures import ThreadPoolExecutor

import numpy as np

import matplotlib
matplotlib.use("Agg")
import matplotlib.pyplot as plt

from . import __version__, functionals, kernels, montecarlo, spectral, stable, variational
from .errors import (ConfigInvalid, FpamError, MissingRecords, RegimeMismatch)
from .functionals import QuadratureRule
from .kernels import NoiseSpec
from .montecarlo import ExperimentConfig, FrequencyLattice, GridFunction

PIPELINES = ("kernels-validate", "sample-paths", "estimate-hamiltonian",
             "exp-moment", "moment", "lyapunov", "lower-bound", "fk-check",
             "lambda", "solve-variational", "full-theorem-check")


# ---------------------------------------------------------------------------
# Config plumbing
# ---------------------------------------------------------------------------

def _load_config(path: str) -> dict:
    try:
        with open(path) as fh:
            return json.load(fh)
    except FileNotFoundError as exc:
        raise ConfigInvalid(f"config file not found: {path}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigInvalid(f"config is not valid JSON: {exc}") from exc


def _require(cfg: dict, key: str, pipeline: str):
    if key not in cfg:
        raise ConfigInvalid(f"pipeline {pipeline!r} needs config field {key!r}")
    return cfg[key]


def _spec_from_config(cfg: dict) -> NoiseSpec:
    return NoiseSpec.from_json_dict(_require(cfg, "spec", cfg.get("pipeline", "?")))


def _rule_from_config(cfg: dict) -> QuadratureRule:
    doc = cfg.get("rule", {})
    return QuadratureRule(
        n_cells=doc.get("n_cells"),
        diagonal_policy=doc.get("diagonal_policy", functionals.POLICY_POWER_LAW),
        band_width=doc.get("band_width", 1),
        kernel_cap=doc.get("kernel_cap", 1e12))


def _mc_config(cfg: dict, seed: int) -> ExperimentConfig:
    mc = cfg.get("mc", {})
    return ExperimentConfig(
        spec=_spec_from_config(cfg),
        p=cfg.get("p", 1.0), rho=cfg.get("rho", 1.0),
        t_grid=tuple(cfg.get("t_grid", [cfg.get("t", 1.0)])),
        n_replicas=mc.get("n_replicas", 1000),
        n_steps=mc.get("n_steps", 128),
        master_seed=seed, rule=_rule_from_config(cfg))


# ---------------------------------------------------------------------------
# Run directory, manifest, records
# ---------------------------------------------------------------------------

def _sha256(path: str) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(65536), b""):
            h.update(chunk)
    return h.hexdigest()


class RunDir:
    """Output sink for one invocation: files, hashes, append-only manifest."""

    def __init__(self, root: str, pipeline: str, config: dict, seed: int):
        self.root = root
        os.makedirs(root, exist_ok=True)
        self.pipeline = pipeline
        self.config = config
        self.seed = seed
        self.outputs: list[dict] = []
        self.started = datetime.datetime.now(datetime.timezone.utc).isoformat()
        self.timings: dict[str, float] = {}

    def path(self, name: str) -> str:
        full = os.path.join(self.root, name)
        os.makedirs(os.path.dirname(full), exist_ok=True)
        return full

    def register(self, name: str) -> None:
        self.outputs.append({"file": name, "sha256": _sha256(self.path(name))})

    def write_text(self, name: str, text: str) -> None:
        with open(self.path(name), "w") as fh:
            fh.write(text)
        self.register(name)

    def write_record(self, name: str, record) -> None:
        self.write_text(name, record.to_json() + "\n")
        self.timings[name] = record.wall_time

    def write_csv(self, name: str, header: list[str], rows) -> None:
        with open(self.path(name), "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(header)
            for row in rows:
                w.writerow(row)
        self.register(name)

    def finalize(self) -> None:
        manifest_path = os.path.join(self.root, "manifest.json")
        entry = {
            "tool_version": __version__,
            "pipeline": self.pipeline,
            "config": self.config,
            "master_seed": self.seed,
            "started": self.started,
            "ended": datetime.datetime.now(datetime.timezone.utc).isoformat(),
            "outputs": self.outputs,
            "wall_times": self.timings,
        }
        existing = []
        if os.path.exists(manifest_path):
            with open(manifest_path) as fh:
                existing = json.load(fh)
        existing.append(entry)
        with open(manifest_path, "w") as fh:
            json.dump(existing, fh, indent=2, sort_keys=True)


def verify_outputs(run_dir: str) -> list[str]:
    """Hash-check every manifest-listed output; returns the bad file names."""
    manifest_path = os.path.join(run_dir, "manifest.json")
    if not os.path.exists(manifest_path):
        raise MissingRecords(f"{run_dir} has no manifest")
    with open(manifest_path) as fh:
        entries = json.load(fh)
    bad = []
    for entry in entries:
        for out in entry["outputs"]:
            full = os.path.join(run_dir, out["file"])
            if not os.path.exists(full) or _sha256(full) != out["sha256"]:
                bad.append(out["file"])
    return bad


def _load_records(run_dir: str, prefix: str = "records/") -> list[dict]:
    recdir = os.path.join(run_dir, "records")
    if not os.path.isdir(recdir):
        raise MissingRecords(f"{run_dir} holds no records")
    docs = []
    for name in sorted(os.listdir(recdir)):
        if name.endswith(".json"):
            with open(os.path.join(recdir, name)) as fh:
                docs.append(json.load(fh))
    if not docs:
        raise MissingRecords(f"{run_dir} holds no records")
    return docs


def _parallel_map(fn, items, threads: int):
    if threads <= 1 or len(items) <= 1:
        return [fn(it) for it in items]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, items))


# ---------------------------------------------------------------------------
# Potential / field generators shared by fk-check and lambda
# ---------------------------------------------------------------------------

def _bump_values(cfg: dict, M: float, N: int) -> np.ndarray:
    amp = cfg.get("amplitude", 0.8)
    kappa = cfg.get("concentration", 2.0)
    center = cfg.get("center", 0.5) * M
    x = np.arange(N) * M / N
    return amp * np.exp(kappa * (np.cos(2 * np.pi * (x - center) / M) - 1.0))


def _potential_from_config(cfg: dict, M: float, N: int) -> np.ndarray:
    pot = cfg.get("potential", {})
    if "file" in pot:
        vals = np.loadtxt(pot["file"], delimiter=",", ndmin=2)
        return vals
    base = _bump_values(pot, M, N)
    profile = pot.get("time_profile")
    if profile is None:
        return base[None, :]
    coeffs = np.asarray(profile, dtype=float)
    n_slices = int(pot.get("n_slices", 9))
    s = np.linspace(0.0, 1.0, n_slices)
    scale = np.polynomial.polynomial.polyval(s, coeffs)
    return scale[:, None] * base[None, :]


# ---------------------------------------------------------------------------
# Pipelines
# ---------------------------------------------------------------------------

def _run_kernels_validate(cfg: dict, run: RunDir, seed: int, threads: int) -> int:
    spec = _spec_from_config(cfg)
    quad_tol = cfg.get("quad_tol", 1e-8)
    tol = cfg.get("tolerance", 1e-4)
    consts = kernels.compute_constants(spec, quad_tol)
    rows = []
    ok = True
    if not consts.flat_time:
        for s, r in ((1.0, 0.0), (2.0, 0.7), (0.3, -0.4), (5.0, 4.2), (-1.0, 1.5)):
            res = kernels.time_decomposition_residual(spec, consts.C0, s, r)
            rows.append(("time", f"({s},{r})", res, res <= tol))
            ok &= res <= tol
    if not consts.flat_space:
        rng = np.random.default_rng(seed)
        for _ in range(5):
            x = rng.uniform(0.3, 3.0, spec.d) * rng.choice([-1, 1], spec.d)
            res = kernels.space_decomposition_residual(spec, consts.C_gamma, x)
            rows.append(("space", np.array2string(x, precision=3), res, res <= tol))
            ok &= res <= tol
    run.write_csv("kernels_validate.csv", ["kind", "probe", "residual", "pass"], rows)
    doc = {"spec": spec.to_json_dict(), "C0": consts.C0, "C_gamma": consts.C_gamma,
           "mu0_density_const": consts.mu0_density_const,
           "mu_density_const": consts.mu_density_const,
           "flat_time": consts.flat_time, "flat_space": consts.flat_space,
           "regime": kernels.dalang_check(spec), "all_pass": bool(ok)}
    run.write_text("kernels_validate.json", json.dumps(doc, indent=2, sort_keys=True))
    return 0 if ok else 1


def _run_sample_paths(cfg: dict, run: RunDir, seed: int, threads: int) -> int:
    pcfg = _require(cfg, "path", "sample-paths")
    n_paths = cfg.get("n_paths", 1)
    for i in range(n_paths):
        spec = stable.PathSpec(d=pcfg["d"], alpha=pcfg["alpha"],
                               horizon=pcfg["horizon"], n_steps=pcfg["n_steps"],
                               seed=seed + i)
        path = stable.sample_path(spec)
        name = f"paths/path_{i:04d}.csv"
        stable.export_path_csv(path, spec, run.path(name))
        run.register(name)
    return 0


def _run_estimate_hamiltonian(cfg: dict, run: RunDir, seed: int, threads: int) -> int:
    spec = _spec_from_config(cfg)
    rule = _rule_from_config(cfg)
    files = _require(cfg, "paths", "estimate-hamiltonian")
    paths = [stable.load_path_csv(f)[0] for f in files]
    rows = []
    for i in range(len(paths)):
        for j in range(i, len(paths)):
            hv = functionals.hamiltonian(paths[i], paths[j], spec, rule, pair=(i, j))
            rows.append((i, j, hv.H, hv.Z if hv.Z is not None else "",
                         hv.diagonal_correction))
    run.write_csv("hamiltonian.csv", ["i", "j", "H", "Z", "diagonal_correction"], rows)
    return 0


def _run_exp_moment(cfg: dict, run: RunDir, seed: int, threads: int) -> int:
    config = _mc_config(cfg, seed)
    thetas = cfg.get("theta_grid", [cfg.get("theta", 1e-3)])
    rows = []
    for t in config.t_grid:
        recs = _parallel_map(lambda th: montecarlo.exp_moment(config, th, t),
                             list(thetas), threads)
        for th, rec in zip(thetas, recs):
            run.write_record(f"records/exp_moment_t{t:g}_theta{th:g}.json", rec)
            rows.append((t, th, rec.log_estimate, rec.log_stderr,
                         rec.effective_sample_size))
    run.write_csv("exp_moment.csv",
                  ["t", "theta", "log_estimate", "log_stderr", "ess"], rows)
    return 0


def _run_moment(cfg: dict, run: RunDir, seed: int, threads: int) -> int:
    config = _mc_config(cfg, seed)
    rows = []
    recs = _parallel_map(lambda t: montecarlo.moment_u_rho(config, t),
                         list(config.t_grid), threads)
    for t, rec in zip(config.t_grid, recs):
        run.write_record(f"records/moment_t{t:g}.json", rec)
        rows.append((t, rec.log_estimate, rec.log_stderr, rec.effective_sample_size))
    run.write_csv("moment.csv", ["t", "log_estimate", "log_stderr", "ess"], rows)
    return 0


def _run_lyapunov(cfg: dict, run: RunDir, seed: int, threads: int) -> int:
    config = _mc_config(cfg, seed)
    recs = _parallel_map(lambda t: montecarlo.moment_u_rho(config, t),
                         list(config.t_grid), threads)
    for t, rec in zip(config.t_grid, recs):
        run.write_record(f"records/moment_t{t:g}.json", rec)
    fit = montecarlo.lyapunov_fit(recs, config.spec, config.p, config.rho)
    chi = fit.chi
    rows = [(t, t ** chi, r.log_estimate, r.log_stderr) for t, r in
            zip(config.t_grid, recs)]
    run.write_csv("lyapunov.csv", ["t", "tchi", "log_estimate", "log_stderr"], rows)
    run.write_text("lyapunov_fit.json", json.dumps(
        {"slope": fit.slope, "intercept": fit.intercept, "r2": fit.r2,
         "chi": fit.chi, "slope_over_p": fit.slope_over_p, "n_used": fit.n_used},
        indent=2, sort_keys=True))
    return 0


def _lattice_from_config(cfg: dict, spec: NoiseSpec) -> FrequencyLattice:
    lat = cfg.get("lattice", {})
    K_tau = lat.get("K_tau", 2)
    K_xi = lat.get("K_xi", 2)
    dtau = lat.get("dtau", 0.5)
    dxi = lat.get("dxi", 0.5)
    amp = lat.get("amplitude", 0.1)
    width = lat.get("width", 1.0)

    def fill(tau, xi):
        xi = np.atleast_1d(xi)
        return amp * np.exp(-(tau * tau + float(xi @ xi)) / (width * width))

    return FrequencyLattice.build(K_tau, K_xi, spec.d, dtau, dxi, fill)


def _run_lower_bound(cfg: dict, run: RunDir, seed: int, threads: int) -> int:
    config = _mc_config(cfg, seed)
    t = config.t_grid[0]
    lat = _lattice_from_config(cfg, config.spec)
    rec = montecarlo.variational_lower_bound_mc(lat, config, t)
    run.write_record("records/lower_bound.json", rec)
    rows = [(t, rec.log_estimate, rec.log_stderr, rec.params["norm_sq"])]
    if cfg.get("compare_moment", True):
        mom = montecarlo.moment_u_rho(config, t)
        run.write_record(f"records/moment_t{t:g}.json", mom)
        bound_log = rec.log_estimate
        norm_log = mom.log_estimate / config.p
        slack = norm_log - bound_log
        combined = rec.log_stderr + mom.log_stderr / config.p
        doc = {"bound_log": bound_log, "p_norm_log": norm_log, "slack": slack,
               "combined_stderr": combined,
               "consistent": bool(slack >= -3.0 * combined)}
        run.write_text("lower_bound_check.json", json.dumps(doc, indent=2, sort_keys=True))
        run.write_csv("lower_bound.csv",
                      ["t", "bound_log", "bound_stderr", "norm_sq"], rows)
        return 0 if doc["consistent"] else 1
    run.write_csv("lower_bound.csv", ["t", "bound_log", "bound_stderr", "norm_sq"], rows)
    return 0


def _run_fk_check(cfg: dict, run: RunDir, seed: int, threads: int) -> int:
    config = _mc_config(cfg, seed)
    M = cfg.get("M", 1.0)
    t = cfg.get("t", 50.0)
    N = cfg.get("spectral", {}).get("N", 256)
    K_trunc = cfg.get("spectral", {}).get("K_trunc", N // 4)
    vals = _potential_from_config(cfg, M, N)
    f = GridFunction(period=M, values=vals)
    rec = montecarlo.fk_limit_mc(f, M, t, config)
    run.write_record("records/fk_limit.json", rec)
    grid = spectral.TorusGrid(M=M, N=N, d=config.spec.d)
    fields = [spectral.TorusField.from_values(grid, v) for v in vals]
    lam = spectral.lambda_time_integral(fields, config.spec.alpha, K_trunc)
    gap = abs(rec.log_estimate - lam)
    budget = 3.0 * rec.log_stderr + 0.5 / t
    doc = {"mc_rate": rec.log_estimate, "mc_stderr": rec.log_stderr,
           "spectral_rate": lam, "gap": gap, "budget": budget,
           "consistent": bool(gap <= budget), "t": t, "K_trunc": K_trunc}
    run.write_text("fk_check.json", json.dumps(doc, indent=2, sort_keys=True))
    run.write_csv("fk_check.csv",
                  ["t", "mc_rate", "mc_stderr", "spectral_rate", "gap", "budget"],
                  [(t, rec.log_estimate, rec.log_stderr, lam, gap, budget)])
    return 0 if doc["consistent"] else 1


def _run_lambda(cfg: dict, run: RunDir, seed: int, threads: int) -> int:
    spec = _spec_from_config(cfg)
    M = cfg.get("M", 1.0)
    N = cfg.get("N", 256)
    vals = _potential_from_config(cfg, M, N)
    grid = spectral.TorusGrid(M=M, N=N, d=spec.d)
    field = spectral.TorusField.from_values(grid, vals[0])
    sweep = cfg.get("K_trunc_sweep", [4, 8, 16, 32, N // 4])
    rows = [(K, spectral.lambda_M(field, spec.alpha, K)) for K in sweep]
    run.write_csv("lambda.csv", ["K_trunc", "lambda"], rows)
    return 0


def _variational_setup(cfg: dict, seed: int):
    spec = _spec_from_config(cfg)
    grid = variational.BoxGrid(box=cfg.get("box", 16.0), N=cfg.get("grid", 512),
                               d=spec.d, n_t=cfg.get("slices", 16))
    opts = variational.AscentOptions(
        step=cfg.get("step", 1e-2), max_iter=cfg.get("max_iter", 60000),
        tol=cfg.get("tol", 1e-12), patience=cfg.get("patience", 30),
        restarts=cfg.get("restarts", 4), seed=seed,
        ceiling=cfg.get("ceiling", 1e6))
    return spec, grid, opts


def _variational_result_doc(res: variational.VariationalResult) -> dict:
    return {"M_estimate": res.M_estimate, "iterations": res.iterations,
            "final_gradient_norm": res.final_gradient_norm,
            "converged": res.converged, "kernel_scale": res.kernel_scale,
            "grid": {"box": res.grid.box, "N": res.grid.N, "d": res.grid.d,
                     "n_t": res.grid.n_t}, "restarts": res.restarts}


def _run_solve_variational(cfg: dict, run: RunDir, seed: int, threads: int) -> int:
    spec, grid, opts = _variational_setup(cfg, seed)
    res = variational.maximize_M(spec, grid, opts,
                                 kernel_scale=cfg.get("kernel_scale", 1.0))
    run.write_text("variational_result.json",
                   json.dumps(_variational_result_doc(res), indent=2, sort_keys=True))
    g = res.field.values
    rows = [[i] + list(g[i]) for i in range(g.shape[0])] if spec.d == 1 else None
    if rows is not None:
        run.write_csv("maximizer.csv",
                      ["slice"] + [f"x{j}" for j in range(g.shape[1])], rows)
    else:
        np.save(run.path("maximizer.npy"), g)
        run.register("maximizer.npy")
    return 0 if res.converged else 1


def _run_full_theorem_check(cfg: dict, run: RunDir, seed: int, threads: int) -> int:
    spec, grid, opts = _variational_setup(cfg, seed)
    res = variational.maximize_M(spec, grid, opts)
    run.write_text("variational_result.json",
                   json.dumps(_variational_result_doc(res), indent=2, sort_keys=True))
    rho = cfg.get("rho", 1.0)
    config = _mc_config(cfg, seed)
    rows = []
    for p in cfg.get("p_values", [1, 2, 3]):
        if p == 1 and rho == 1.0:
            continue
        pred = variational.lyapunov_prediction(spec, p, rho, res.M_estimate)
        pcfg = ExperimentConfig(spec=spec, p=p, rho=rho, t_grid=config.t_grid,
                                n_replicas=config.n_replicas, n_steps=config.n_steps,
                                master_seed=seed, rule=config.rule)
        for t in config.t_grid:
            rec = montecarlo.moment_u_rho(pcfg, t)
            run.write_record(f"records/moment_p{p}_t{t:g}.json", rec)
            tchi = t ** montecarlo.chi_exponent(spec)
            rows.append((p, t, tchi, rec.log_estimate / p, rec.log_stderr / p,
                         pred, pred * tchi))
    run.write_csv("theorem_check.csv",
                  ["p", "t", "tchi", "log_pnorm", "stderr", "predicted_coefficient",
                   "predicted_log_pnorm"], rows)
    return 0


_PIPELINE_FNS = {
    "kernels-validate": _run_kernels_validate,
    "sample-paths": _run_sample_paths,
    "estimate-hamiltonian": _run_estimate_hamiltonian,
    "exp-moment": _run_exp_moment,
    "moment": _run_moment,
    "lyapunov": _run_lyapunov,
    "lower-bound": _run_lower_bound,
    "fk-check": _run_fk_check,
    "lambda": _run_lambda,
    "solve-variational": _run_solve_variational,
    "full-theorem-check": _run_full_theorem_check,
}


def run_experiment(config_path: str, out_dir: str | None = None,
                   seed: int | None = None, threads: int = 1,
                   pipeline: str | None = None) -> tuple[str, int]:
    """Execute one named pipeline from a JSON config; returns (run_dir, exit code)."""
    cfg = _load_config(config_path)
    pipe = pipeline or cfg.get("pipeline")
    if pipe not in _PIPELINE_FNS:
        raise ConfigInvalid(f"unknown or missing pipeline {pipe!r}")
    if seed is None:
        seed = int(cfg.get("seed", 0))
    out = out_dir or cfg.get("out") or os.environ.get("FPAM_OUT") \
        or f"runs/{pipe}-{seed}"
    # regime gate before any work
    if "spec" in cfg:
        spec = _spec_from_config(cfg)
        regime = kernels.dalang_check(spec)
        needs_full = pipe in ("exp-moment",) or \
            (pipe in ("moment", "lyapunov", "full-theorem-check")
             and cfg.get("rho", 1.0) < 1.0)
        if regime == kernels.REGIME_NONE and pipe not in ("kernels-validate",
                                                          "sample-paths", "lambda"):
            raise RegimeMismatch(f"spec admits no solution regime (flags: {regime})")
        if needs_full and regime != kernels.REGIME_FULL:
            raise RegimeMismatch(
                f"pipeline {pipe!r} needs the full regime, spec gives {regime!r}")
    run = RunDir(out, pipe, cfg, seed)
    code = _PIPELINE_FNS[pipe](cfg, run, seed, threads)
    run.finalize()
    return out, code


# ---------------------------------------------------------------------------
# Plot data + figures
# ---------------------------------------------------------------------------

PLOT_SCHEMAS = {
    "lyapunov": ["t", "tchi", "log_estimate", "stderr", "prediction"],
    "scaling": ["theta", "M_estimate", "predicted_ratio"],
    "fk": ["t", "mc_rate", "mc_stderr", "spectral_rate"],
    "lambda": ["K_trunc", "lambda"],
}


def emit_plot_data(run_dir: str, plot: str) -> str:
    """Write the flat CSV for one named plot from a finished run; returns its path."""
    bad = verify_outputs(run_dir)
    if bad:
        raise MissingRecords(f"outputs failed hash verification: {bad}")
    out = os.path.join(run_dir, f"plot_{plot}.csv")
    if plot == "lyapunov":
        docs = [d for d in _load_records(run_dir) if d["estimator"] == "moment"]
        if not docs:
            raise MissingRecords("no moment records in run")
        spec = NoiseSpec.from_json_dict(docs[0]["config"]["spec"])
        chi = montecarlo.chi_exponent(spec)
        pred = None
        fit_path = os.path.join(run_dir, "lyapunov_fit.json")
        if os.path.exists(fit_path):
            with open(fit_path) as fh:
                pred = json.load(fh)["slope"]
        rows = []
        for d in sorted(docs, key=lambda d: d["params"]["t"]):
            t = d["params"]["t"]
            rows.append([t, t ** chi, d["log_estimate"], d["log_stderr"],
                         pred * t ** chi if pred is not None else ""])
    elif plot == "scaling":
        path = os.path.join(run_dir, "scaling.csv")
        if not os.path.exists(path):
            raise MissingRecords("run has no scaling sweep")
        with open(path) as fh:
            rows = list(csv.reader(fh))[1:]
    elif plot == "fk":
        path = os.path.join(run_dir, "fk_check.csv")
        if not os.path.exists(path):
            raise MissingRecords("run has no fk-check output")
        with open(path) as fh:
            raw = list(csv.reader(fh))[1:]
        rows = [r[:4] for r in raw]
    elif plot == "lambda":
        path = os.path.join(run_dir, "lambda.csv")
        if not os.path.exists(path):
            raise MissingRecords("run has no lambda sweep")
        with open(path) as fh:
            rows = list(csv.reader(fh))[1:]
    else:
        raise ConfigInvalid(f"unknown plot {plot!r}; choose from {sorted(PLOT_SCHEMAS)}")
    with open(out, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(PLOT_SCHEMAS[plot])
        for row in rows:
            w.writerow(row)
    return out


def render_figure(run_dir: str, plot: str) -> str:
    """Render the matplotlib figure next to the plot CSV; returns the PNG path."""
    csv_path = emit_plot_data(run_dir, plot)
    data = np.genfromtxt(csv_path, delimiter=",", names=True, dtype=float,
                         encoding="utf-8")
    data = np.atleast_1d(data)
    fig, ax = plt.subplots(figsize=(6, 4))
    if plot == "lyapunov":
        ax.errorbar(data["tchi"], data["log_estimate"], yerr=data["stderr"],
                    fmt="o", capsize=3, label="MC estimate")
        if not np.all(np.isnan(data["prediction"])):
            ax.plot(data["tchi"], data["prediction"], "-", label="fit")
        ax.set_xlabel(r"$t^{\chi}$")
        ax.set_ylabel("log moment estimate")
    elif plot == "scaling":
        ax.loglog(data["theta"], data["M_estimate"], "o-", label="solver")
        ax.set_xlabel(r"$\theta$")
        ax.set_ylabel("M estimate")
    elif plot == "fk":
        ax.errorbar(data["t"], data["mc_rate"], yerr=3 * data["mc_stderr"],
                    fmt="o", capsize=3, label="MC rate")
        ax.plot(data["t"], data["spectral_rate"], "s", label="spectral rate")
        ax.set_xlabel("t")
        ax.set_ylabel("growth rate")
    elif plot == "lambda":
        ax.plot(data["K_trunc"], data["lambda"], "o-")
        ax.set_xlabel("lattice truncation")
        ax.set_ylabel(r"$\lambda_M$")
    if plot != "lambda":
        ax.legend(loc="best")
    ax.grid(alpha=0.3)
    fig.tight_layout()
    png = os.path.join(run_dir, f"plot_{plot}.png")
    fig.savefig(png, dpi=150)
    plt.close(fig)
    return png


# ---------------------------------------------------------------------------
# Entry point
# ---------------------------------------------------------------------------

def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="fpam",
        description="Numerical laboratory for stable-process exponential "
                    "functionals: kernels, Hamiltonians, spectral limits and "
                    "the growth-rate variational problem.")
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(p):
        p.add_argument("--config", required=False, help="JSON config file")
        p.add_argument("--out", default=None, help="run directory")
        p.add_argument("--seed", type=int, default=None, help="master seed override")
        p.add_argument("--threads", type=int,
                       default=int(os.environ.get("FPAM_THREADS", "1")))

    for name in PIPELINES:
        p = sub.add_parser(name)
        add_common(p)
        if name == "solve-variational":
            p.add_argument("--alpha", type=float)
            p.add_argument("--beta0", type=float, default=0.0)
            p.add_argument("--kernel", default="riesz:0.4",
                           help="riesz:<beta> or product:<b1,b2,...>")
            p.add_argument("--dim", type=int, default=1)
            p.add_argument("--box", type=float, default=16.0)
            p.add_argument("--grid", type=int, default=512)
            p.add_argument("--slices", type=int, default=16)
            p.add_argument("--restarts", type=int, default=4)

    rep = sub.add_parser("report", help="emit plot CSV + figure from a run")
    rep.add_argument("--run", required=True)
    rep.add_argument("--plot", required=True, choices=sorted(PLOT_SCHEMAS))

    args = parser.parse_args(argv)

    try:
        if args.command == "report":
            png = render_figure(args.run, args.plot)
            print(png)
            return 0
        if args.command == "solve-variational" and args.config is None:
            if args.alpha is None:
                raise ConfigInvalid("solve-variational needs --config or --alpha")
            kind, _, param = args.kernel.partition(":")
            kern = {"type": kind}
            if kind == "riesz":
                kern["beta"] = float(param)
            else:
                kern["betas"] = [float(x) for x in param.split(",")]
            cfg = {"pipeline": "solve-variational",
                   "spec": {"alpha": args.alpha, "beta0": args.beta0,
                            "kernel": kern, "dim": args.dim},
                   "box": args.box, "grid": args.grid, "slices": args.slices,
                   "restarts": args.restarts, "seed": args.seed or 0}
            import tempfile
            with tempfile.NamedTemporaryFile("w", suffix=".json", delete=False) as fh:
                json.dump(cfg, fh)
                cfg_path = fh.name
            run_dir, code = run_experiment(cfg_path, args.out, args.seed,
                                           args.threads, pipeline=args.command)
            os.unlink(cfg_path)
        else:
            if args.config is None:
                raise ConfigInvalid(f"{args.command} needs --config")
            run_dir, code = run_experiment(args.config, args.out, args.seed,
                                           args.threads, pipeline=args.command)
        print(run_dir)
        return code
    except (ConfigInvalid, RegimeMismatch) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except FpamError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
