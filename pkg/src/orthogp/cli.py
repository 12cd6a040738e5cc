"""Command line front end.

Subcommands::

    orthogp fit DATA.csv CONFIG.json [-o fit.json]
    orthogp predict FIT.json POINTS.csv [-o predictions.csv]
    orthogp eigen [--family F] [--lengthscale PSI] [--basis none|constant|linear] ...
    orthogp effects-check
    orthogp bench {table1,borehole,multifidelity,effects-check} [--out-dir D] ...

Exit codes: 0 success, 2 input error, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
from pathlib import Path

import numpy as np
from pydantic import ValidationError

from . import __version__
from .config import RunConfig, SCHEMA_VERSION, load_config
from .estimators import Dataset, build_predictor, fit_fixed, fit_mle, make_covariance
from .exceptions import (
    ConfigurationError,
    DomainError,
    NumericalError,
    OptimizationError,
    QuadratureBudgetError,
)
from .experiments import (
    config_fingerprint,
    effects_check,
    multifidelity_demo,
    study_1d,
    study_borehole,
)
from .geometry import (
    Domain,
    beta_to_original,
    constant_basis,
    linear_basis,
    map_to_canonical,
    model_matrix,
)
from .kernels import KernelSpec
from .ortho import assemble_ortho
from .spectra import eigenfunction_table, nystrom_eigensystem

EXIT_OK, EXIT_INPUT, EXIT_NUMERIC = 0, 2, 3
STUDIES = ("table1", "borehole", "multifidelity", "effects-check")


class InputError(Exception):
    """Bad user input; mapped to exit code 2."""


# --------------------------------------------------------------------------
# CSV helpers
# --------------------------------------------------------------------------


def read_csv(path, need_y: bool):
    """Read ``x1..xd[,y]`` columns; returns ``(X, y or None, header)``."""
    try:
        fh = open(path, newline="")
    except OSError as exc:
        raise InputError(f"cannot read {path}: {exc}") from None
    with fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if not header:
            raise InputError(f"{path}: no header")
        header = [h.strip() for h in header]
        xcols = [h for h in header if h != "y"]
        expected = [f"x{i}" for i in range(1, len(xcols) + 1)]
        if xcols != expected or (need_y and header[-1] != "y"):
            want = ",".join(expected + (["y"] if need_y else []))
            raise InputError(f"{path}: header must be {want}, got {','.join(header)}")
        rows = []
        for lineno, row in enumerate(reader, start=2):
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) != len(header):
                raise InputError(f"{path}: line {lineno}: expected {len(header)} fields, got {len(row)}")
            try:
                vals = [float(c) for c in row]
            except ValueError:
                raise InputError(f"{path}: line {lineno}: malformed number in {row}") from None
            if not all(np.isfinite(vals)):
                raise InputError(f"{path}: line {lineno}: non-finite value")
            rows.append(vals)
    if not rows:
        raise InputError(f"{path}: no data rows")
    arr = np.array(rows)
    d = len(xcols)
    return arr[:, :d], (arr[:, d] if need_y else None), header


def write_csv(path, header, columns) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for row in zip(*columns):
            writer.writerow([repr(float(v)) for v in row])


# --------------------------------------------------------------------------
# Commands
# --------------------------------------------------------------------------


def cmd_fit(args) -> int:
    try:
        cfg = load_config(args.config)
    except (OSError, json.JSONDecodeError) as exc:
        raise InputError(f"cannot load config {args.config}: {exc}") from None
    X, y, _ = read_csv(args.data, need_y=True)
    if X.shape[1] != cfg.dim:
        raise InputError(f"data has d={X.shape[1]} but kernel has {cfg.dim} lengthscales")
    dom = cfg.make_domain()
    basis = cfg.make_basis()
    kernel = cfg.make_kernel()
    data = Dataset(map_to_canonical(dom, X), y)
    mode, order = cfg.orthogonalization.mode, cfg.orthogonalization.order
    if cfg.mle.enabled:
        fit = fit_mle(data, cfg.method, basis, kernel.family, bounds=cfg.mle.bounds,
                      starts=cfg.mle.starts, seed=cfg.mle.seed,
                      max_evals=cfg.mle.max_evals, mode=mode, order=order)
    else:
        fit = fit_fixed(data, cfg.method, basis, kernel, mode=mode, order=order)
    resolved = cfg.resolved()
    beta_orig = beta_to_original(basis, dom, fit.beta_hat)
    out = {
        "schema_version": SCHEMA_VERSION,
        "config": resolved,
        "config_fingerprint": config_fingerprint(resolved),
        "method": fit.method,
        "orthogonalization": {"mode": mode, "order": order} if fit.method == "OGP" else None,
        "beta_hat": fit.beta_hat.tolist(),
        "beta_hat_original": None if beta_orig is None else beta_orig.tolist(),
        "psi_hat": fit.psi_hat.tolist(),
        "sigma2_hat": fit.sigma2_hat,
        "neg_log_lik": fit.neg_log_lik,
        "diagnostics": fit.diagnostics,
        "data": {"x": X.tolist(), "y": y.tolist()},
    }
    text = json.dumps(out, indent=2, default=float)
    if args.output:
        Path(args.output).write_text(text)
    else:
        print(text)
    return EXIT_OK


def _load_fit(path) -> dict:
    try:
        fit = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise InputError(f"cannot load fit {path}: {exc}") from None
    if fit.get("schema_version") != SCHEMA_VERSION:
        raise InputError(f"{path}: unsupported schema_version {fit.get('schema_version')}")
    return fit


def cmd_predict(args) -> int:
    fit = _load_fit(args.fit)
    cfg = RunConfig.model_validate(fit["config"])
    dom = cfg.make_domain()
    X, _, _ = read_csv(args.points, need_y=False)
    if X.shape[1] != dom.dim:
        raise InputError(f"points have d={X.shape[1]} but the fit has d={dom.dim}")
    basis = cfg.make_basis()
    kernel = KernelSpec(cfg.kernel.family, fit["sigma2_hat"], fit["psi_hat"])
    ortho = cfg.orthogonalization
    cov = make_covariance(fit["method"], kernel, basis, ortho.mode, ortho.order)
    data = Dataset(map_to_canonical(dom, np.array(fit["data"]["x"])), fit["data"]["y"])
    pred = build_predictor(fit["method"], data, basis, cov, beta=fit["beta_hat"])
    U = map_to_canonical(dom, X)
    mean, trend, stoch = pred.decompose(U)
    var = pred.variance(U)
    header = [f"x{i}" for i in range(1, dom.dim + 1)] + ["mean", "variance", "trend", "stochastic"]
    cols = [X[:, j] for j in range(dom.dim)] + [mean, var, trend, stoch]
    if args.output:
        write_csv(args.output, header, cols)
    else:
        w = csv.writer(sys.stdout)
        w.writerow(header)
        for row in zip(*cols):
            w.writerow([repr(float(v)) for v in row])
    return EXIT_OK


def cmd_eigen(args) -> int:
    kernel = KernelSpec(args.family, args.variance, [args.lengthscale])
    if args.basis == "none":
        cov = kernel
    else:
        basis = constant_basis(1) if args.basis == "constant" else linear_basis(1)
        cov = assemble_ortho(kernel, basis, args.mode, args.order)
    es = nystrom_eigensystem(cov, 1, args.quad_order, args.k)
    grid = np.linspace(-1.0, 1.0, args.grid_points)
    table = eigenfunction_table(es, grid)
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    header = ["u"] + [f"f{i}" for i in range(1, es.k + 1)]
    write_csv(out / "eigenfunctions.csv", header, [grid] + [table[:, i] for i in range(es.k)])
    meta = {
        "schema_version": SCHEMA_VERSION,
        "kernel": kernel.to_dict(),
        "basis": args.basis,
        "quad_order": args.quad_order,
        "eigenvalues": es.eigenvalues.tolist(),
    }
    meta["config_fingerprint"] = config_fingerprint(meta)
    (out / "eigenvalues.json").write_text(json.dumps(meta, indent=2))
    print(f"wrote {out / 'eigenfunctions.csv'} and {out / 'eigenvalues.json'}")
    return EXIT_OK


def _print_effects(report) -> None:
    for family, err in report.summary.items():
        print(f"{family:>20s}  max relative error {err:.3e}")


def cmd_effects_check(args) -> int:
    report = effects_check()
    _print_effects(report)
    if getattr(args, "out_dir", None):
        report.write(args.out_dir)
    return EXIT_OK


def cmd_bench(args) -> int:
    if args.study not in STUDIES:
        raise InputError(f"unknown study {args.study!r}; available: {', '.join(STUDIES)}")
    if args.study == "effects-check":
        return cmd_effects_check(args)
    if args.study == "table1":
        report = study_1d()
        for r in report.rows:
            print(f"{r['method']:>3s} {r['kernel']:<20s} scheme {r['scheme']}  "
                  f"rmspe {r['rmspe']:.4e}  beta ({r['beta'][0]:.3f}, {r['beta'][1]:.3f})")
    elif args.study == "borehole":
        cfg = {"seed": args.seed, "full": args.full, "workers": args.workers}
        if args.n:
            cfg["sizes"] = args.n
        if args.reps:
            cfg["replicates"] = args.reps
        report = study_borehole(cfg)
        for n, per in report.summary["by_size"].items():
            for m, s in per.items():
                if s.get("replicates"):
                    print(f"n={n:>4s} {m:>3s} std(beta_2)={s['beta_canonical_std'][1]:.4g} "
                          f"mean rmspe={s['rmspe_mean']:.4g}")
    else:
        report = multifidelity_demo(seeds=range(args.seed, args.seed + (args.reps or 10)))
        for m in ("LS", "OGP", "UK"):
            print(f"{m:>3s} max |beta - truth| = {report.summary[m]['max_abs_error']}")
    paths = report.write(args.out_dir)
    print("wrote " + ", ".join(str(p) for p in paths))
    return EXIT_OK


# --------------------------------------------------------------------------
# Entry point
# --------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="orthogp", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("fit", help="fit a model to CSV data")
    p.add_argument("data")
    p.add_argument("config")
    p.add_argument("-o", "--output")
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("predict", help="predict at new points from a fit.json")
    p.add_argument("fit")
    p.add_argument("points")
    p.add_argument("-o", "--output")
    p.set_defaults(func=cmd_predict)

    p = sub.add_parser("eigen", help="Nystrom eigenfunctions on [-1, 1]")
    p.add_argument("--family", default="squared_exponential")
    p.add_argument("--lengthscale", type=float, default=1.0)
    p.add_argument("--variance", type=float, default=1.0)
    p.add_argument("--basis", choices=("none", "constant", "linear"), default="linear")
    p.add_argument("--mode", choices=("closed_form", "quadrature"), default="closed_form")
    p.add_argument("--order", type=int, default=None)
    p.add_argument("--quad-order", type=int, default=128)
    p.add_argument("--k", type=int, default=3)
    p.add_argument("--grid-points", type=int, default=201)
    p.add_argument("--out-dir", default="eigen_out")
    p.set_defaults(func=cmd_eigen)

    p = sub.add_parser("effects-check", help="closed-form effects vs quadrature")
    p.add_argument("--out-dir", default=None)
    p.set_defaults(func=cmd_effects_check)

    p = sub.add_parser("bench", help="run a benchmark study")
    p.add_argument("study")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out-dir", default="bench_out")
    p.add_argument("--full", action="store_true", help="full-scale borehole study (50 replicates, n up to 160)")
    p.add_argument("--n", type=int, nargs="+", help="borehole sample sizes")
    p.add_argument("--reps", type=int, help="replicates (borehole) or seeds (multifidelity)")
    p.add_argument("--workers", type=int, default=1)
    p.set_defaults(func=cmd_bench)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (InputError, ValidationError, ConfigurationError, DomainError,
            QuadratureBudgetError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except (NumericalError, OptimizationError, ArithmeticError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
