"""Command-line interface: simulate / fit / infer / experiment.

Any flag may also be supplied through a key-value config file
(``--config path``; lines of ``key = value``, '#' comments); explicit
command-line flags override file entries.  Exit codes: 0 success, 1 input
error, 2 numerical failure.
"""
from __future__ import annotations

import argparse
import sys

import numpy as np

from .covariance import residuals, sigma_blocks
from .debias import desparsify
from .dgp import DgpConfig, simulate_panel
from .exceptions import NumericalError
from .experiments import EXPERIMENTS, run_experiment
from .inference import confidence_interval, wald_chi2
from .model import build_design, response_vector
from .nodewise import fit_nodewise
from .panel_io import dumps_json, load_panel, save_json, save_panel
from .solver import panel_problem, select_lambda, solve_weighted_lasso


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # exit code 1 instead of argparse's 2
        raise UsageError(message)


def _int_list(text: str):
    return [int(v) for v in text.split(",") if v.strip() != ""]


def _float_list(text: str):
    return [float(v) for v in text.split(",") if v.strip() != ""]


def _add_lambda_flags(sub):
    sub.add_argument("--lambda", dest="lam", type=float, default=None,
                     help="fixed penalty level (overrides --lambda-mode)")
    sub.add_argument("--lambda-mode", choices=["bic", "theoretical"],
                     default="bic")
    sub.add_argument("--m-const", type=float, default=1.0,
                     help="constant M in the theoretical penalty")
    sub.add_argument("--grid-size", type=int, default=50)
    sub.add_argument("--grid-ratio", type=float, default=None)
    sub.add_argument("--tol", type=float, default=1e-8)
    sub.add_argument("--max-iter", type=int, default=10_000)


def build_parser() -> _Parser:
    parser = _Parser(prog="dlpanel",
                     description="High-dimensional dynamic panel estimation "
                                 "with debiased-lasso inference")
    subs = parser.add_subparsers(dest="command", required=True)

    sim = subs.add_parser("simulate", help="simulate a panel to CSV")
    sim.add_argument("--config", default=None)
    sim.add_argument("--n-units", type=int, default=20)
    sim.add_argument("--n-periods", type=int, default=10)
    sim.add_argument("--p-x", type=int, default=100)
    sim.add_argument("--alpha", type=_float_list, default=None,
                     help="true lag coefficients, comma separated")
    sim.add_argument("--lags", type=int, default=5,
                     help="pre-sample lags to emit (fitting lag order)")
    sim.add_argument("--beta-indices", type=_int_list, default=None,
                     help="0-based covariate support, comma separated")
    sim.add_argument("--beta-count", type=int, default=5)
    sim.add_argument("--beta-value", type=float, default=1.0)
    sim.add_argument("--ar-x", type=float, default=0.5)
    sim.add_argument("--rho-x", type=float, default=0.75)
    sim.add_argument("--error-kind", default="gaussian",
                     choices=["gaussian", "hetero", "t3_hetero", "none"])
    sim.add_argument("--burn-in", type=int, default=1000)
    sim.add_argument("--fix-b-eta", action="store_true")
    sim.add_argument("--seed", type=int, default=0)
    sim.add_argument("--out", required=True)
    sim.set_defaults(func=_cmd_simulate)

    fit = subs.add_parser("fit", help="fit the panel lasso on a CSV panel")
    fit.add_argument("--config", default=None)
    fit.add_argument("--data", required=True)
    fit.add_argument("--lags", type=int, default=None,
                     help="lag order (default: all pre-sample lags present)")
    _add_lambda_flags(fit)
    fit.add_argument("--out", default=None)
    fit.set_defaults(func=_cmd_fit)

    inf = subs.add_parser("infer", help="debiased intervals and joint test")
    inf.add_argument("--config", default=None)
    inf.add_argument("--data", required=True)
    inf.add_argument("--indices", type=_int_list, required=True,
                     help="0-based gamma coordinates to test")
    inf.add_argument("--null", type=_float_list, default=None,
                     help="joint null values (defaults to all-zero)")
    inf.add_argument("--level", type=float, default=0.95)
    inf.add_argument("--lags", type=int, default=None)
    _add_lambda_flags(inf)
    inf.add_argument("--node-lambda-mode", default="bic",
                     help="'bic', 'theoretical', or a number")
    inf.add_argument("--out", default=None)
    inf.set_defaults(func=_cmd_infer)

    exp = subs.add_parser("experiment", help="run a Monte Carlo experiment")
    exp.add_argument("--config", default=None)
    exp.add_argument("--name", required=True,
                     help=f"one of {', '.join(sorted(EXPERIMENTS))}")
    exp.add_argument("--replications", type=int, default=200)
    exp.add_argument("--seed", type=int, default=0)
    exp.add_argument("--parallelism", type=int, default=None,
                     help="worker threads (default: DLPANEL_PARALLELISM or 1)")
    exp.add_argument("--grid-size", type=int, default=50)
    exp.add_argument("--grid-ratio", type=float, default=None)
    exp.add_argument("--tol", type=float, default=1e-8)
    exp.add_argument("--max-iter", type=int, default=10_000)
    exp.add_argument("--out", default=None)
    exp.set_defaults(func=_cmd_experiment)

    return parser


def _load_config_file(path: str) -> list[str]:
    """Translate key = value lines into synthetic argv tokens."""
    tokens: list[str] = []
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" in line:
                key, _, value = line.partition("=")
            elif ":" in line:
                key, _, value = line.partition(":")
            else:
                raise ValueError(f"{path}:{lineno}: expected 'key = value'")
            key = key.strip().replace("_", "-")
            value = value.strip()
            if not key:
                raise ValueError(f"{path}:{lineno}: empty key")
            if value.lower() in ("true", "false"):
                if value.lower() == "true":
                    tokens.append(f"--{key}")
                continue
            tokens.extend([f"--{key}", value])
    return tokens


def _expand_config(argv: list[str]) -> list[str]:
    """Splice config-file tokens in right after the subcommand, so later
    (explicit) flags win."""
    if "--config" not in argv:
        return argv
    pos = argv.index("--config")
    if pos + 1 >= len(argv):
        raise UsageError("--config needs a path")
    path = argv[pos + 1]
    rest = argv[:pos] + argv[pos + 2:]
    if not rest:
        raise UsageError("missing subcommand")
    tokens = _load_config_file(path)
    return rest[:1] + tokens + rest[1:]


def _emit(payload: dict, out: str | None) -> None:
    if out is None:
        sys.stdout.write(dumps_json(payload))
    else:
        save_json(payload, out)


def _fit_pipeline(args):
    panel = load_panel(args.data)
    design = build_design(panel, args.lags)
    y = response_vector(panel)
    if args.lam is not None:
        lam = float(args.lam)
        warm = None
    else:
        lam, path = select_lambda(design, y, mode=args.lambda_mode,
                                  m_const=args.m_const,
                                  grid_size=args.grid_size,
                                  grid_ratio=args.grid_ratio, tol=args.tol,
                                  max_iter=args.max_iter)
        warm = None
        if path is not None:
            warm = next(pt.coefficients for pt in path if pt.lam == lam)
    fit = solve_weighted_lasso(panel_problem(design, y, lam), tol=args.tol,
                               max_iter=args.max_iter, warm_start=warm)
    return panel, design, y, lam, fit


def _cmd_simulate(args) -> int:
    alpha = tuple(args.alpha) if args.alpha is not None else (0.9, 0.0, 0.0, -0.3)
    cfg = DgpConfig(n_units=args.n_units, n_periods=args.n_periods,
                    p_x=args.p_x, alpha_true=alpha, n_lags_fit=args.lags,
                    beta_indices=args.beta_indices, beta_count=args.beta_count,
                    beta_value=args.beta_value, ar_x=args.ar_x,
                    rho_x=args.rho_x, error_kind=args.error_kind,
                    burn_in=args.burn_in, seed=args.seed,
                    fix_b_eta=args.fix_b_eta)
    panel = simulate_panel(cfg)
    save_panel(panel, args.out)
    print(f"wrote {cfg.n_units}x{cfg.n_periods} panel with p_x={cfg.p_x} "
          f"to {args.out}")
    return 0


def _cmd_fit(args) -> int:
    panel, design, y, lam, fit = _fit_pipeline(args)
    payload = {
        "config": {"data": args.data, "lags": design.n_lags,
                   "lambda_mode": args.lambda_mode if args.lam is None
                   else "fixed", "grid_size": args.grid_size,
                   "tol": args.tol},
        "seed": None,
        "results": {
            "lambda": lam,
            "coefficients": fit.coefficients,
            "active_set": fit.active_set,
            "objective_value": fit.objective_value,
            "iterations": fit.iterations,
            "converged": fit.converged,
            "kkt_max": fit.kkt_max,
        },
    }
    _emit(payload, args.out)
    return 0


def _cmd_infer(args) -> int:
    panel, design, y, lam, fit = _fit_pipeline(args)
    indices = tuple(args.indices)
    mode = args.node_lambda_mode
    if mode not in ("bic", "theoretical"):
        mode = float(mode)
    inv = fit_nodewise(design, [h for h in indices if h < design.p], mode,
                       m_const=args.m_const, grid_size=args.grid_size,
                       grid_ratio=args.grid_ratio, tol=args.tol,
                       max_iter=args.max_iter)
    est = desparsify(fit, design, y, inv, indices)
    cov = sigma_blocks(design, residuals(fit, design, y))
    intervals = []
    for h in indices:
        ci = confidence_interval(h, est, inv, cov, args.level)
        intervals.append({"index": h, "estimate": ci.estimate,
                          "std_error": ci.std_error, "ci_lower": ci.ci_lower,
                          "ci_upper": ci.ci_upper,
                          "degenerate": ci.degenerate})
    null = args.null if args.null is not None else [0.0] * len(indices)
    test = wald_chi2(indices, null, est, inv, cov)
    payload = {
        "config": {"data": args.data, "indices": list(indices),
                   "level": args.level, "lambda_mode": args.lambda_mode
                   if args.lam is None else "fixed",
                   "node_lambda_mode": args.node_lambda_mode},
        "seed": None,
        "results": {
            "lambda": lam,
            "lambda_node": inv.lam,
            "intervals": intervals,
            "joint_test": {"statistic": test.statistic, "dof": test.dof,
                           "p_value": test.p_value,
                           "null_values": list(test.null_values)},
        },
    }
    _emit(payload, args.out)
    return 0


def _cmd_experiment(args) -> int:
    report = run_experiment(args.name, args.replications, args.seed,
                            parallelism=args.parallelism,
                            grid_size=args.grid_size,
                            grid_ratio=args.grid_ratio, tol=args.tol,
                            max_iter=args.max_iter)
    _emit(report.to_dict(), args.out)
    if args.out is not None:
        dl = report.results["dl"]
        print(f"{args.name}: coverage="
              f"{['%.3f' % c for c in dl['coverage']]} size={dl['size']:.3f} "
              f"power={dl['power']:.3f} excluded={report.excluded['count']} "
              f"-> {args.out}")
    return 0


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        argv = _expand_config(argv)
        args = parser.parse_args(argv)
        return args.func(args)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return 1
    except NumericalError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 2
    except (ValueError, KeyError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
