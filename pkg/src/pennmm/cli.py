"""Command-line front end.

Subcommands
-----------
fit        fit one penalized model to a CSV file
select     choose lambda by GCV over a grid, then fit
simulate   run a named simulation design and write the report TSV
diagnose   fit, then report the MM map's eigenvalues and observed contraction

CSV layout: a header row is required.  For linear, logistic and Poisson
models the first column is the response and the rest are covariates; for
Cox models the columns are ``time``, ``status``, then covariates.  No
intercept is added.

Exit codes: 0 success, 1 solver did not converge, 2 bad input.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import json
import logging
import math
import os
import sys
from dataclasses import asdict, dataclass, field
from typing import List, Optional, Sequence

import numpy as np

from . import __version__
from .inference import sandwich_cov
from .likelihood import CURVATURES, FAMILIES, Dataset, LikelihoodError, make_model
from .penalty import KINDS, PenaltySpec
from .selection import default_lambda_grid, gcv_select
from .simulation import CENSORING, EXAMPLES, METHODS, GeneratorSpec, run_experiment
from .solver import FitConfig, contraction_ratios, fit, fit_mle, rate_diagnostic

__all__ = ["RunConfig", "InputError", "read_csv", "write_csv", "main", "build_parser", "parse_grid"]

logger = logging.getLogger("pennmm")

EXIT_OK, EXIT_NONCONVERGED, EXIT_INPUT = 0, 1, 2
SEED_ENV = "PENNMM_SEED"
DEFAULT_SEED = 20050801


class InputError(ValueError):
    """Bad file, bad value or inconsistent options; maps to exit code 2."""


def fmt(x) -> str:
    if isinstance(x, (bool, np.bool_)):
        return "1" if x else "0"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return "%.17g" % float(x)


@dataclass
class RunConfig:
    """Fully resolved options of one invocation; serialized into the manifest."""

    command: str
    input_path: Optional[str] = None
    family: str = "linear"
    penalty: str = "scad"
    a: float = 3.7
    q: float = 0.5
    lam: Optional[float] = None
    grid: Optional[str] = None
    tau: float = 1e-8
    max_iter: int = 500
    curvature: str = "observed"
    seed: int = DEFAULT_SEED
    replicates: int = 100
    threads: int = 1
    output_dir: str = "."
    example: Optional[str] = None
    n: Optional[int] = None
    rho: Optional[float] = None
    beta_extra: float = 0.2
    censoring: str = "hazard"
    mc_draws: int = 50_000
    methods: List[str] = field(default_factory=lambda: list(METHODS))

    def validate(self):
        if self.command in ("fit", "select", "diagnose") and not self.input_path:
            raise InputError(f"{self.command} requires --input-path")
        if self.command == "simulate" and self.example not in EXAMPLES:
            raise InputError(f"simulate requires an example name, one of {EXAMPLES}")
        if self.family not in FAMILIES:
            raise InputError(f"unknown family {self.family!r}; expected one of {FAMILIES}")
        if self.penalty not in KINDS:
            raise InputError(f"unknown penalty {self.penalty!r}; expected one of {KINDS}")
        if self.command in ("fit", "diagnose") and self.lam is None:
            raise InputError(f"{self.command} requires --lambda")
        if self.threads < 1 or self.replicates < 1 or self.max_iter < 1 or self.mc_draws < 1:
            raise InputError("threads, replicates, max-iter and mc-draws must be positive")
        bad = [m for m in self.methods if m not in METHODS]
        if bad:
            raise InputError(f"unknown methods {bad}; expected a subset of {METHODS}")

    def penalty_spec(self, lam: float) -> PenaltySpec:
        try:
            return PenaltySpec(self.penalty, lam, a=self.a, q=self.q)
        except ValueError as exc:
            raise InputError(str(exc)) from None

    def fit_config(self) -> FitConfig:
        try:
            return FitConfig(tau=self.tau, max_iter=self.max_iter, curvature=self.curvature)
        except ValueError as exc:
            raise InputError(str(exc)) from None


def parse_grid(text: str) -> np.ndarray:
    """``lo:hi:num`` (log-spaced, inclusive) or a comma-separated list."""
    try:
        if ":" in text:
            lo, hi, num = text.split(":")
            lo, hi, num = float(lo), float(hi), int(num)
            if not (0 < lo <= hi) or num < 1:
                raise ValueError
            return np.geomspace(lo, hi, num)
        vals = np.array([float(v) for v in text.split(",") if v.strip()])
        if vals.size == 0 or np.any(vals < 0):
            raise ValueError
        return vals
    except ValueError:
        raise InputError(f"cannot parse grid {text!r}; use lo:hi:num or a comma-separated list") from None


def read_csv(path: str, family: str) -> Dataset:
    """Load a CSV in the documented layout; errors cite the offending line."""
    if not os.path.isfile(path):
        raise InputError(f"input file not found: {path}")
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise InputError(f"{path}: empty file (a header row is required)")
    header = [h.strip() for h in rows[0]]
    min_cols = 3 if family == "cox" else 2
    if len(header) < min_cols:
        raise InputError(f"{path}: line 1: expected at least {min_cols} columns, got {len(header)}")
    if family == "cox" and [h.lower() for h in header[:2]] != ["time", "status"]:
        raise InputError(f"{path}: line 1: Cox input must start with columns 'time,status'")
    values = []
    for lineno, row in enumerate(rows[1:], start=2):
        if not row or all(not c.strip() for c in row):
            continue
        if len(row) != len(header):
            raise InputError(f"{path}: line {lineno}: expected {len(header)} fields, got {len(row)}")
        try:
            vals = [float(c) for c in row]
        except ValueError:
            raise InputError(f"{path}: line {lineno}: non-numeric field in {row!r}") from None
        if not all(math.isfinite(v) for v in vals):
            raise InputError(f"{path}: line {lineno}: non-finite value")
        values.append(vals)
    if not values:
        raise InputError(f"{path}: no data rows")
    arr = np.array(values)
    try:
        if family == "cox":
            return Dataset(arr[:, 2:], arr[:, 0], arr[:, 1], header[2:])
        return Dataset(arr[:, 1:], arr[:, 0], None, header[1:])
    except ValueError as exc:
        raise InputError(f"{path}: {exc}") from None


def write_csv(data: Dataset, path: str, response_name: str = "y") -> None:
    """Write ``data`` in the layout :func:`read_csv` expects (17 significant digits)."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        if data.status is not None:
            w.writerow(["time", "status", *data.column_names])
            for z, s, x in zip(data.response, data.status, data.design):
                w.writerow([fmt(z), fmt(s), *map(fmt, x)])
        else:
            w.writerow([response_name, *data.column_names])
            for y, x in zip(data.response, data.design):
                w.writerow([fmt(y), *map(fmt, x)])


def _sha256(path):
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 16), b""):
            h.update(chunk)
    return h.hexdigest()


def _write_tsv(path, header, rows):
    with open(path, "w") as fh:
        fh.write("\t".join(header) + "\n")
        for r in rows:
            fh.write("\t".join(v if isinstance(v, str) else fmt(v) for v in r) + "\n")


def _write_manifest(cfg: RunConfig, extra: dict):
    body = {"version": __version__, "config": asdict(cfg), **extra}
    if cfg.input_path:
        body["input_sha256"] = _sha256(cfg.input_path)
    path = os.path.join(cfg.output_dir, "manifest.json")
    with open(path, "w") as fh:
        json.dump(body, fh, indent=2, sort_keys=True, default=_jsonable)
        fh.write("\n")
    return path


def _jsonable(x):
    if isinstance(x, np.ndarray):
        return [_jsonable(v) for v in x.tolist()]
    if isinstance(x, (np.floating, float)):
        return fmt(x)
    if isinstance(x, np.integer):
        return int(x)
    if isinstance(x, np.bool_):
        return bool(x)
    return str(x)


def _fit_outputs(cfg, data, model, result):
    cov = sandwich_cov(model, result.spec, result)
    _write_tsv(
        os.path.join(cfg.output_dir, "coefficients.tsv"),
        ["name", "estimate", "se", "active"],
        [[name, b, se if ok else float("nan"), bool(act)]
         for name, b, se, ok, act in zip(data.column_names, result.beta_hat, cov.se, cov.available, result.active)],
    )
    _write_tsv(
        os.path.join(cfg.output_dir, "trace.tsv"),
        ["iteration", "q_eps", "alpha", "grad_max"],
        [[r.iteration, r.q_eps, r.alpha, r.grad_max] for r in result.trace],
    )
    return {
        "epsilon": fmt(result.epsilon),
        "epsilon_degenerate": bool(result.epsilon_degenerate),
        "status": result.status,
        "iterations": result.iterations,
        "method": result.method,
        "lambda": fmt(result.spec.lam),
        "n": data.n,
        "d": data.d,
        "column_names": list(data.column_names),
    }


def _load(cfg):
    data = read_csv(cfg.input_path, cfg.family)
    try:
        return data, make_model(cfg.family, data)
    except ValueError as exc:
        raise InputError(str(exc)) from None


def _fit_one(cfg, model):
    if cfg.lam == 0:
        return fit_mle(model, cfg.fit_config())
    return fit(model, cfg.penalty_spec(cfg.lam), config=cfg.fit_config())


def cmd_fit(cfg: RunConfig) -> int:
    data, model = _load(cfg)
    result = _fit_one(cfg, model)
    info = _fit_outputs(cfg, data, model, result)
    _write_manifest(cfg, {"result": info})
    if not result.converged:
        print(f"solver did not converge: {result.status} after {result.iterations} iterations", file=sys.stderr)
        return EXIT_NONCONVERGED
    return EXIT_OK


def cmd_select(cfg: RunConfig) -> int:
    data, model = _load(cfg)
    grid = parse_grid(cfg.grid) if cfg.grid else default_lambda_grid(model.n)
    curve, best = gcv_select(model, cfg.penalty_spec(1.0), grid, cfg.fit_config())
    _write_tsv(
        os.path.join(cfg.output_dir, "gcv.tsv"),
        ["lambda", "gcv", "dof"],
        list(zip(curve.lambdas, curve.scores, curve.dof)),
    )
    info = _fit_outputs(cfg, data, model, best)
    info["lambda_grid"] = [fmt(v) for v in curve.lambdas]
    info["chosen_lambda"] = fmt(curve.best_lambda)
    _write_manifest(cfg, {"result": info})
    if not best.converged:
        print(f"solver did not converge at the chosen lambda: {best.status}", file=sys.stderr)
        return EXIT_NONCONVERGED
    return EXIT_OK


def cmd_diagnose(cfg: RunConfig) -> int:
    data, model = _load(cfg)
    result = _fit_one(cfg, model)
    info = _fit_outputs(cfg, data, model, result)
    if not result.converged:
        _write_manifest(cfg, {"result": info})
        print(f"solver did not converge: {result.status}", file=sys.stderr)
        return EXIT_NONCONVERGED
    eig, rho = rate_diagnostic(model, result.spec, result.beta_eps, cfg.tau, cfg.curvature)
    ratios, _ = contraction_ratios(model, result.spec, result.beta0, result.beta_eps, config=cfg.fit_config())
    _write_tsv(os.path.join(cfg.output_dir, "eigenvalues.tsv"), ["index", "eigenvalue"], list(enumerate(eig)))
    _write_tsv(os.path.join(cfg.output_dir, "contraction.tsv"), ["step", "ratio"], list(enumerate(ratios)))
    tail = ratios[-5:]
    info["rho"] = fmt(rho)
    info["empirical_ratio"] = fmt(float(np.median(tail))) if tail.size else "nan"
    _write_manifest(cfg, {"result": info})
    print(f"rho = {rho:.6g}; empirical contraction = {info['empirical_ratio']}")
    return EXIT_OK


def cmd_simulate(cfg: RunConfig) -> int:
    try:
        gspec = GeneratorSpec(
            cfg.example, n=cfg.n, rho=cfg.rho, seed=cfg.seed, replicates=cfg.replicates,
            beta_extra=cfg.beta_extra, censoring=cfg.censoring,
        )
    except ValueError as exc:
        raise InputError(str(exc)) from None
    grid = parse_grid(cfg.grid) if cfg.grid else None
    report = run_experiment(gspec, cfg.methods, grid, cfg.mc_draws, cfg.fit_config(), cfg.threads)
    tsv, _ = report.write(cfg.output_dir, stem=f"{cfg.example}")
    _write_manifest(cfg, {"generator": asdict(gspec), "constants": report.constants, "failed_replicates": report.failed_replicates})
    sys.stdout.write(report.to_tsv())
    if report.failed_replicates:
        print(f"{len(report.failed_replicates)} replicate(s) failed; see manifest", file=sys.stderr)
    return EXIT_OK


COMMANDS = {"fit": cmd_fit, "select": cmd_select, "simulate": cmd_simulate, "diagnose": cmd_diagnose}


def _common(p, with_input=True):
    if with_input:
        p.add_argument("--input-path", required=True, help="CSV file (header row required)")
        p.add_argument("--family", choices=FAMILIES, default="linear")
    p.add_argument("--penalty", choices=KINDS, default="scad")
    p.add_argument("--a", type=float, default=3.7, help="SCAD shape constant")
    p.add_argument("--q", type=float, default=0.5, help="exponent for the lq penalty")
    p.add_argument("--tau", type=float, default=1e-8)
    p.add_argument("--max-iter", type=int, default=500)
    p.add_argument("--curvature", choices=CURVATURES, default="observed")
    p.add_argument("--output-dir", default=".")
    p.add_argument("--seed", type=int, default=None, help=f"default: ${SEED_ENV} or {DEFAULT_SEED}")
    p.add_argument("-v", "--verbose", action="store_true")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="pennmm", description="Penalized likelihood variable selection by perturbed MM iterations.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("fit", help="fit at one lambda")
    _common(p)
    p.add_argument("--lambda", dest="lam", type=float, required=True)

    p = sub.add_parser("select", help="choose lambda by GCV")
    _common(p)
    p.add_argument("--grid", help="lo:hi:num (log-spaced) or comma list; default scales with sqrt(log n / n)")

    p = sub.add_parser("diagnose", help="rate of convergence at the fitted point")
    _common(p)
    p.add_argument("--lambda", dest="lam", type=float, required=True)

    p = sub.add_parser("simulate", help="run a named simulation design")
    p.add_argument("example", choices=EXAMPLES)
    _common(p, with_input=False)
    p.add_argument("--n", type=int)
    p.add_argument("--rho", type=float)
    p.add_argument("--beta-extra", type=float, default=0.2)
    p.add_argument("--censoring", choices=CENSORING, default="hazard")
    p.add_argument("--replicates", type=int, default=100)
    p.add_argument("--threads", type=int, default=1)
    p.add_argument("--mc-draws", type=int, default=50_000)
    p.add_argument("--grid")
    p.add_argument("--methods", default=",".join(METHODS), help="comma-separated subset of " + ",".join(METHODS))
    return parser


def _resolve_seed(value):
    if value is not None:
        return value
    env = os.environ.get(SEED_ENV)
    if env is None:
        return DEFAULT_SEED
    try:
        return int(env)
    except ValueError:
        raise InputError(f"{SEED_ENV}={env!r} is not an integer") from None


def config_from_args(ns: argparse.Namespace) -> RunConfig:
    kw = {k: v for k, v in vars(ns).items() if k in RunConfig.__dataclass_fields__ and v is not None}
    if "methods" in kw:
        kw["methods"] = [m.strip() for m in kw["methods"].split(",") if m.strip()]
    kw["seed"] = _resolve_seed(ns.seed)
    cfg = RunConfig(**kw)
    cfg.validate()
    return cfg


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    try:
        ns = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_INPUT if exc.code else EXIT_OK
    logging.basicConfig(level=logging.INFO if ns.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = config_from_args(ns)
        os.makedirs(cfg.output_dir, exist_ok=True)
        return COMMANDS[cfg.command](cfg)
    except InputError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except (np.linalg.LinAlgError, LikelihoodError, RuntimeError) as exc:
        print(f"solver error: {exc}", file=sys.stderr)
        return EXIT_NONCONVERGED


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
