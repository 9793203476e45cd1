"""Experiment orchestration: versioned configs, per-level pipelines, report
and CSV persistence, and the `thetalab` command line entry point."""

import argparse
import concurrent.futures
import json
import os
import sys
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .abelian import (
    AbelianVariety,
    bergman_density_grid,
    gaussian_decay_check,
    gram_matrix,
    section_basis,
)
from .convergence import (
    distortion_report,
    fiber_collapse,
    map_deviation_sup,
    rate_fit,
)
from .embedding import amoeba_sample, cloud_to_csv
from .errors import ConfigError, ThetaLabError
from .kummer import KummerVariety, invariant_basis, kummer_gram_matrix
from .metrics import error_field_to_csv, metric_error_field
from .theta import Characteristic, PeriodMatrix, TruncationPolicy, theta

_GRID_KEYS = ("quadrature", "amoeba", "fiber", "metric")


@dataclass(frozen=True)
class ExperimentConfig:
    """Validated, versioned description of one k-sweep experiment."""

    schema_version: int
    n: int
    omega: np.ndarray
    family: str
    k_list: tuple
    grids: dict
    eps: float
    delta_policy: tuple
    output_dir: str
    seed: int

    @property
    def echo(self):
        return {
            "schema_version": self.schema_version,
            "n": self.n,
            "omega": [[v.real, v.imag] for v in self.omega.ravel()],
            "family": self.family,
            "k_list": list(self.k_list),
            "grids": dict(self.grids),
            "eps": self.eps,
            "delta_policy": list(self.delta_policy),
            "output_dir": self.output_dir,
            "seed": self.seed,
        }


def _cfg_get(raw, key, default=None, required=False):
    if key in raw:
        return raw[key]
    if required:
        raise ConfigError(f"missing required field {key!r}", field=key)
    return default


def parse_config(raw: dict) -> ExperimentConfig:
    sv = int(_cfg_get(raw, "schema_version", required=True))
    if sv != 1:
        raise ConfigError(f"unsupported schema_version {sv}",
                          field="schema_version")
    n = int(_cfg_get(raw, "n", required=True))
    if n < 1:
        raise ConfigError("n must be >= 1", field="n")
    pairs = _cfg_get(raw, "omega", required=True)
    if len(pairs) != n * n:
        raise ConfigError(f"omega needs {n * n} row-major [re, im] pairs",
                          field="omega")
    try:
        omega = np.array([complex(p[0], p[1]) for p in pairs]).reshape(n, n)
    except (TypeError, IndexError) as exc:
        raise ConfigError(f"malformed omega entry: {exc}", field="omega")
    family = _cfg_get(raw, "family", required=True)
    if family not in ("abelian", "kummer"):
        raise ConfigError(f"family must be abelian|kummer, got {family!r}",
                          field="family")
    k_list = [int(k) for k in _cfg_get(raw, "k_list", required=True)]
    if not k_list or any(b <= a for a, b in zip(k_list, k_list[1:])):
        raise ConfigError("k_list must be nonempty and strictly ascending",
                          field="k_list")
    if any(k < 1 for k in k_list):
        raise ConfigError("k values must be >= 1", field="k_list")
    grids_raw = _cfg_get(raw, "grids", default={})
    grids = {"quadrature": 64, "amoeba": 48, "fiber": 256, "metric": 16}
    if n >= 2:
        grids = {"quadrature": 16, "amoeba": 10, "fiber": 32, "metric": 8}
    grids.update({k: int(v) for k, v in grids_raw.items()})
    for key in grids:
        if key not in _GRID_KEYS:
            raise ConfigError(f"unknown grid key {key!r}", field="grids")
        if grids[key] < 8:
            raise ConfigError(f"grid {key!r} must be >= 8", field="grids")
    eps = float(_cfg_get(raw, "eps", default=1e-12))
    if not 0 < eps < 1:
        raise ConfigError("eps must lie in (0, 1)", field="eps")
    dp = _cfg_get(raw, "delta_policy", default="fitted")
    if dp == "fitted":
        delta_policy = ("fitted", 0.0)
    elif isinstance(dp, (list, tuple)) and len(dp) == 2 and dp[0] == "fixed":
        val = float(dp[1])
        if val <= 0:
            raise ConfigError("fixed delta must be positive",
                              field="delta_policy")
        delta_policy = ("fixed", val)
    else:
        raise ConfigError("delta_policy must be 'fitted' or ['fixed', value]",
                          field="delta_policy")
    output_dir = str(_cfg_get(raw, "output_dir", default="."))
    seed = int(_cfg_get(raw, "seed", default=0))
    try:
        PeriodMatrix(omega)
    except ThetaLabError as exc:
        raise ConfigError(f"invalid omega: {exc}", field="omega")
    return ExperimentConfig(schema_version=sv, n=n, omega=omega,
                            family=family, k_list=tuple(k_list), grids=grids,
                            eps=eps, delta_policy=delta_policy,
                            output_dir=output_dir, seed=seed)


def load_config(path) -> ExperimentConfig:
    path = Path(path)
    try:
        text = path.read_bytes()
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc}")
    if path.suffix == ".json":
        try:
            raw = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"invalid JSON config: {exc}")
    else:
        try:
            import tomllib
        except ModuleNotFoundError:
            import tomli as tomllib

        try:
            raw = tomllib.loads(text.decode())
        except tomllib.TOMLDecodeError as exc:
            raise ConfigError(f"invalid TOML config: {exc}")
    return parse_config(raw)


# ---------------------------------------------------------------------------
# Pipelines (one per subcommand; each returns a JSON-serializable row)
# ---------------------------------------------------------------------------

def _variety(cfg: ExperimentConfig):
    return AbelianVariety(PeriodMatrix(cfg.omega))


def _basis(cfg: ExperimentConfig, A: AbelianVariety, k: int):
    pol = TruncationPolicy(eps=cfg.eps)
    if cfg.family == "kummer":
        return invariant_basis(A, k, pol=pol)
    return section_basis(A, k, pol=pol)


def _delta(cfg: ExperimentConfig, A: AbelianVariety) -> float:
    if cfg.delta_policy[0] == "fixed":
        return cfg.delta_policy[1]
    fit = gaussian_decay_check(A, section_basis(A, max(cfg.k_list)),
                               grid_per_dim=min(cfg.grids["quadrature"], 32))
    return fit.c / 2.0


def pipe_theta_eval(cfg, A, k, out_dir):
    rng = np.random.default_rng(cfg.seed)
    P = A.P
    rows = []
    for _ in range(5):
        z = rng.standard_normal(cfg.n) * 0.3 + 1j * rng.standard_normal(cfg.n) * 0.1
        ch = Characteristic(a=rng.integers(0, 2, cfg.n) / 2.0,
                            b=rng.integers(0, 2, cfg.n) / 2.0)
        val = theta(ch, P, z)
        rows.append({
            "a": ch.a.tolist(), "b": ch.b.tolist(),
            "z_re": z.real.tolist(), "z_im": z.imag.tolist(),
            "theta_re": val.real, "theta_im": val.imag,
        })
    return {"k": k, "values": rows}


def pipe_gram(cfg, A, k, out_dir):
    g = cfg.grids["quadrature"]
    if cfg.family == "kummer":
        basis = _basis(cfg, A, k)
        G = kummer_gram_matrix(A, basis, g)
    else:
        basis = _basis(cfg, A, k)
        G = gram_matrix(A, basis, g)
    dev = float(np.max(np.abs(G - np.eye(G.shape[0]))))
    return {"k": k, "basis_size": int(G.shape[0]), "gram_max_dev": dev}


def pipe_bergman(cfg, A, k, out_dir):
    from .abelian import _torus_grid

    basis = _basis(cfg, A, k)
    X, Y = _torus_grid(cfg.n, cfg.grids["quadrature"])
    if cfg.family == "kummer":
        from .kummer import invariant_h_norms

        rho = invariant_h_norms(A, basis, X, Y).sum(axis=1)
    else:
        rho = bergman_density_grid(A, basis, X, Y)
    scale = float(k) ** cfg.n
    return {"k": k, "rho_over_kn_mean": float(rho.mean() / scale),
            "rho_over_kn_min": float(rho.min() / scale),
            "rho_over_kn_max": float(rho.max() / scale)}


def pipe_amoeba(cfg, A, k, out_dir):
    basis = _basis(cfg, A, k)
    cloud = amoeba_sample(A, basis, cfg.grids["amoeba"])
    path = out_dir / f"amoeba_k{k}.csv"
    with open(path, "w", newline="") as fh:
        cloud_to_csv(cloud, fh)
    return {"k": k, "cloud_size": cloud.size, "csv": path.name}


def pipe_metric_convergence(cfg, A, k, out_dir):
    basis = _basis(cfg, A, k)
    if cfg.family == "kummer":
        variety = KummerVariety(A)
    else:
        variety = A
    f = metric_error_field(variety, basis, grid_per_dim=cfg.grids["metric"],
                           q=0)
    path = out_dir / f"metric_error_k{k}.csv"
    with open(path, "w", newline="") as fh:
        error_field_to_csv(f, fh)
    return {"k": k, "err_c0_max": float(np.max(f["err_c0"])),
            "err_c0_mean": float(np.mean(f["err_c0"])), "csv": path.name}


def _base_samples(cfg, rng):
    m = 48 if cfg.n == 1 else 7
    axes = [np.linspace(0.0, 1.0, m, endpoint=False)] * cfg.n
    return np.stack(np.meshgrid(*axes, indexing="ij"), -1).reshape(-1, cfg.n)


def pipe_gh_convergence(cfg, A, k, out_dir):
    rng = np.random.default_rng(cfg.seed)
    basis = _basis(cfg, A, k)
    cloud = amoeba_sample(A, basis, cfg.grids["amoeba"])
    rep = distortion_report(A, basis, _base_samples(cfg, rng), cloud)
    return {"k": k, "distortion": rep.distortion,
            "covering_radius": rep.covering_radius, "eps": rep.eps,
            "gh_upper": rep.gh_upper}


def pipe_fiber_collapse(cfg, A, k, out_dir):
    rng = np.random.default_rng(cfg.seed)
    basis = _basis(cfg, A, k)
    y = 0.1 + 0.8 * rng.random(cfg.n)
    fg = cfg.grids["fiber"] if cfg.n == 1 else min(cfg.grids["fiber"], 32)
    diam = fiber_collapse(A, basis, y, fiber_grid=fg)
    md = map_deviation_sup(A, basis, cfg.grids["amoeba"])
    return {"k": k, "y": y.tolist(), "fiber_diameter": diam,
            "map_deviation_sup": md}


_PIPELINES = {
    "theta-eval": pipe_theta_eval,
    "gram": pipe_gram,
    "bergman": pipe_bergman,
    "amoeba": pipe_amoeba,
    "metric-convergence": pipe_metric_convergence,
    "gh-convergence": pipe_gh_convergence,
    "fiber-collapse": pipe_fiber_collapse,
}


def _rate_sections(rows_by_cmd):
    """Fit every positive per-k series with >= 3 rows against each model."""
    fits = {}
    series = {
        "eps": ("gh-convergence", "eps"),
        "fiber_diameter": ("fiber-collapse", "fiber_diameter"),
        "map_deviation_sup": ("fiber-collapse", "map_deviation_sup"),
        "err_c0_max": ("metric-convergence", "err_c0_max"),
    }
    for name, (cmd, key) in series.items():
        rows = rows_by_cmd.get(cmd, [])
        table = [(r["k"], r[key]) for r in rows
                 if isinstance(r.get(key), float) and r[key] > 0]
        if len(table) < 3:
            continue
        fits[name] = {}
        for model in ("sqrt_logk_over_k", "inv_k", "inv_sqrt_k"):
            rt = rate_fit(table, model)
            fits[name][model] = {"slope": rt.slope,
                                 "intercept": rt.intercept,
                                 "residual": rt.residual}
    return fits


def _write_rate_csvs(rows_by_cmd, out_dir):
    series = {
        "eps": ("gh-convergence", "eps"),
        "fiber_diameter": ("fiber-collapse", "fiber_diameter"),
        "map_deviation_sup": ("fiber-collapse", "map_deviation_sup"),
        "err_c0_max": ("metric-convergence", "err_c0_max"),
    }
    for name, (cmd, key) in series.items():
        rows = rows_by_cmd.get(cmd, [])
        table = [(r["k"], r[key]) for r in rows
                 if isinstance(r.get(key), float) and r[key] > 0]
        if len(table) < 3:
            continue
        rt = rate_fit(table, "sqrt_logk_over_k")
        with open(out_dir / f"rate_{name}.csv", "w", newline="") as fh:
            rt.to_csv(fh)


def run_pipelines(cfg: ExperimentConfig, commands, jobs: int):
    """Execute the selected pipelines for every k; returns (rows, failures)."""
    A = _variety(cfg)
    out_dir = Path(cfg.output_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    tasks = [(cmd, k) for cmd in commands for k in cfg.k_list]
    results = {}
    failures = {}

    def work(item):
        cmd, k = item
        return _PIPELINES[cmd](cfg, A, k, out_dir)

    if jobs > 1:
        with concurrent.futures.ThreadPoolExecutor(max_workers=jobs) as ex:
            futs = {ex.submit(work, t): t for t in tasks}
            for fut in concurrent.futures.as_completed(futs):
                cmd, k = futs[fut]
                try:
                    results[(cmd, k)] = fut.result()
                except ThetaLabError as exc:
                    failures[(cmd, k)] = str(exc)
    else:
        for t in tasks:
            try:
                results[t] = work(t)
            except ThetaLabError as exc:
                failures[t] = str(exc)
    rows_by_cmd = {cmd: [results[(cmd, k)] for k in cfg.k_list
                         if (cmd, k) in results]
                   for cmd in commands}
    fail_rows = [{"command": cmd, "k": k, "error": msg}
                 for (cmd, k), msg in sorted(failures.items())]
    return rows_by_cmd, fail_rows


def build_report(cfg: ExperimentConfig, rows_by_cmd, fail_rows) -> dict:
    return {
        "config": cfg.echo,
        "rows": rows_by_cmd,
        "failures": fail_rows,
        "rate_fits": _rate_sections(rows_by_cmd),
        "tool_version": __version__,
        "wall_clock": time.time(),
    }


# ---------------------------------------------------------------------------
# Output encoding
# ---------------------------------------------------------------------------

def _flatten(row, prefix=""):
    out = {}
    for key, val in row.items():
        name = f"{prefix}{key}"
        if isinstance(val, dict):
            out.update(_flatten(val, prefix=name + "."))
        elif isinstance(val, list):
            out[name] = json.dumps(val)
        else:
            out[name] = val
    return out


def emit(rows, fmt: str, fh):
    if fmt == "json":
        json.dump(rows, fh, indent=2, sort_keys=True)
        fh.write("\n")
        return
    import csv as _csv

    flat = [_flatten(r) for r in rows]
    keys = sorted({k for r in flat for k in r})
    w = _csv.DictWriter(fh, fieldnames=keys)
    w.writeheader()
    for r in flat:
        w.writerow({k: (f"{v:.17g}" if isinstance(v, float) else v)
                    for k, v in r.items()})


# ---------------------------------------------------------------------------
# Entry point
# ---------------------------------------------------------------------------

def _parser():
    p = argparse.ArgumentParser(prog="thetalab",
                                description="theta-embedding laboratory")
    sub = p.add_subparsers(dest="command", required=True)
    names = list(_PIPELINES) + ["rate-table", "run"]
    for name in names:
        sp = sub.add_parser(name)
        sp.add_argument("--config", required=True)
        sp.add_argument("--k", type=int, default=None,
                        help="restrict to a single level")
        sp.add_argument("--out", default=None,
                        help="output directory override")
        sp.add_argument("--format", choices=("csv", "json"), default="json")
        sp.add_argument("--jobs", type=int,
                        default=int(os.environ.get("THETA_LAB_JOBS", "1")))
    return p


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    try:
        cfg = load_config(args.config)
        if args.k is not None:
            if args.k < 1:
                raise ConfigError("--k must be >= 1", field="k")
            cfg = ExperimentConfig(**{**cfg.__dict__, "k_list": (args.k,)})
        if args.out is not None:
            cfg = ExperimentConfig(**{**cfg.__dict__, "output_dir": args.out})
    except ConfigError as exc:
        loc = f" (field: {exc.field})" if exc.field else ""
        print(f"config error: {exc}{loc}", file=sys.stderr)
        return 1

    if args.command == "run":
        commands = list(_PIPELINES)
    elif args.command == "rate-table":
        commands = ["gh-convergence", "fiber-collapse", "metric-convergence"]
    else:
        commands = [args.command]

    rows_by_cmd, fail_rows = run_pipelines(cfg, commands, jobs=args.jobs)
    out_dir = Path(cfg.output_dir)
    if args.command == "rate-table":
        _write_rate_csvs(rows_by_cmd, out_dir)
    report = build_report(cfg, rows_by_cmd, fail_rows)
    with open(out_dir / "report.json", "w") as fh:
        json.dump(report, fh, indent=2, sort_keys=True)
        fh.write("\n")
    display = [r for rows in rows_by_cmd.values() for r in rows]
    emit(display, args.format, sys.stdout)
    total = len(cfg.k_list) * len(commands)
    if fail_rows and len(fail_rows) >= total:
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
