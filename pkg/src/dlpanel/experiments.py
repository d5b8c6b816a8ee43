"""Monte Carlo harness: named experiment configurations, replication
runner, and aggregation into coverage / length / size / power tables.

Each replication simulates a panel, runs the debiased-lasso pipeline
(BIC-tuned panel lasso, nodewise rows for the tested coordinates,
debiasing, robust covariance, intervals and joint chi-square tests) and
the two least-squares baselines, then the per-replication records are
reduced in replication order so results do not depend on the worker pool
size.
"""
from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace

import numpy as np

from .baselines import baseline_inference
from .covariance import residuals, sigma_blocks
from .debias import desparsify
from .dgp import DgpConfig, replication_rng, simulate_panel
from .inference import confidence_interval, wald_chi2
from .model import build_design, response_vector
from .nodewise import fit_nodewise
from .solver import panel_problem, select_lambda, solve_weighted_lasso

PARALLELISM_ENV = "DLPANEL_PARALLELISM"


@dataclass
class ExperimentSpec:
    """A named experiment: DGP, tested coordinates, and null values."""

    name: str
    dgp: DgpConfig
    hypothesis: tuple[int, ...]
    power_shift: float = 0.4
    level: float = 0.95

    def null_true(self) -> tuple[float, ...]:
        return (0.0,) * len(self.hypothesis)

    def null_false(self) -> tuple[float, ...]:
        return (self.power_shift,) + (0.0,) * (len(self.hypothesis) - 1)


def _make_spec(name, n_units, n_periods, p_x, beta_count, hypothesis, kind):
    dgp = DgpConfig(n_units=n_units, n_periods=n_periods, p_x=p_x,
                    beta_count=beta_count, error_kind=kind)
    return ExperimentSpec(name=name, dgp=dgp, hypothesis=hypothesis)


def _registry() -> dict[str, ExperimentSpec]:
    # tested coordinates are true zeros in the covariate block (0-based
    # gamma indices; the first n_lags_fit coordinates are the lags)
    layouts = {
        "exp1": (20, 10, 100, 5, (6, 26, 46)),
        "exp2": (20, 10, 400, 5, (6, 86, 166)),
        "exp3": (20, 40, 400, 5, (6, 86, 166)),
        "exp4": (40, 10, 400, 5, (6, 86, 166)),
        "exp5": (20, 40, 1005, 15, (6, 73, 140)),
    }
    kinds = {"a": "gaussian", "b": "hetero", "c": "t3_hetero"}
    out = {}
    for base, (n, t, p_x, count, hyp) in layouts.items():
        for letter, kind in kinds.items():
            name = base + letter
            out[name] = _make_spec(name, n, t, p_x, count, hyp, kind)
    return out


EXPERIMENTS = _registry()


def _run_replication(spec: ExperimentSpec, seed: int, rep: int,
                     grid_size: int, grid_ratio, tol: float,
                     max_iter: int) -> dict:
    """One replication; returns per-method records."""
    cfg = replace(spec.dgp, seed=seed)
    rng = replication_rng(seed, rep)
    panel = simulate_panel(cfg, rng)
    design = build_design(panel, cfg.n_lags_fit)
    y = response_vector(panel)
    gamma_true = panel.gamma_true
    H = spec.hypothesis
    p, n = design.p, design.n_units
    alpha_test = 1.0 - spec.level
    truth = [float(gamma_true[h]) for h in H]

    def summarise(coef, intervals, tests):
        err = coef - gamma_true
        rec = {
            "sq_alpha": float(err[:p] @ err[:p]),
            "sq_eta": float(err[p:] @ err[p:]),
            "cover": [bool(intervals[h].ci_lower <= tv <= intervals[h].ci_upper)
                      for h, tv in zip(H, truth)],
            "length": [float(intervals[h].ci_upper - intervals[h].ci_lower)
                       for h in H],
            "p_true": float(tests["true"].p_value),
            "p_false": float(tests["false"].p_value),
        }
        rec["reject_true"] = bool(rec["p_true"] < alpha_test)
        rec["reject_false"] = bool(rec["p_false"] < alpha_test)
        return rec

    # debiased lasso
    lam, path = select_lambda(design, y, mode="bic", grid_size=grid_size,
                              grid_ratio=grid_ratio, tol=tol,
                              max_iter=max_iter)
    warm = next(pt.coefficients for pt in path if pt.lam == lam)
    fit = solve_weighted_lasso(panel_problem(design, y, lam), tol=tol,
                               max_iter=max_iter, warm_start=warm)
    inv = fit_nodewise(design, [h for h in H if h < p], "bic",
                       grid_size=grid_size, grid_ratio=grid_ratio, tol=tol,
                       max_iter=max_iter)
    est = desparsify(fit, design, y, inv, H)
    cov = sigma_blocks(design, residuals(fit, design, y))
    dl_ci = {h: confidence_interval(h, est, inv, cov, spec.level) for h in H}
    dl_tests = {
        "true": wald_chi2(H, spec.null_true(), est, inv, cov),
        "false": wald_chi2(H, spec.null_false(), est, inv, cov),
    }
    dl = summarise(fit.coefficients, dl_ci, dl_tests)

    nulls = {"true": spec.null_true(), "false": spec.null_false()}

    # full least squares (within estimator); not applicable when p+N > NT
    ls = None
    if p + n <= design.n_obs:
        coef, cis, tests = baseline_inference(design, y, np.arange(p), H,
                                              nulls, spec.level)
        ls = summarise(coef, cis, tests)

    # oracle least squares: true support plus the tested coordinates
    support = set(np.flatnonzero(gamma_true[:p]).tolist())
    support.update(h for h in H if h < p)
    coef, cis, tests = baseline_inference(design, y, sorted(support), H,
                                          nulls, spec.level)
    oracle = summarise(coef, cis, tests)

    return {"dl": dl, "ls": ls, "oracle": oracle}


def _aggregate(records: list, n_hyp: int) -> dict:
    """Reduce per-replication records for one method, in order."""
    if not records or all(r is None for r in records):
        return {"applicable": False}
    rows = [r for r in records if r is not None]
    reps = len(rows)
    cover = np.array([r["cover"] for r in rows], dtype=float)
    length = np.array([r["length"] for r in rows], dtype=float)
    out = {
        "applicable": True,
        "replications_used": reps,
        "rmse_alpha": float(np.sqrt(np.mean([r["sq_alpha"] for r in rows]))),
        "rmse_eta": float(np.sqrt(np.mean([r["sq_eta"] for r in rows]))),
        "coverage": [float(v) for v in cover.mean(axis=0)],
        "ci_length": [float(v) for v in length.mean(axis=0)],
        "size": float(np.mean([r["reject_true"] for r in rows])),
        "power": float(np.mean([r["reject_false"] for r in rows])),
        "p_true_null": [r["p_true"] for r in rows],
        "p_false_null": [r["p_false"] for r in rows],
    }
    return out


def _halfwidth(p_hat: float, reps: int) -> float:
    if reps <= 0:
        return float("nan")
    return float(1.96 * np.sqrt(p_hat * (1.0 - p_hat) / reps))


@dataclass
class ExperimentReport:
    """Aggregated Monte Carlo results with full config echo."""

    config: dict
    seed: int
    results: dict
    mc_error: dict
    excluded: dict

    def to_dict(self) -> dict:
        return {"config": self.config, "seed": self.seed,
                "results": self.results, "mc_error": self.mc_error,
                "excluded": self.excluded}


def default_parallelism() -> int:
    """Worker count from the DLPANEL_PARALLELISM env var (default 1)."""
    raw = os.environ.get(PARALLELISM_ENV)
    if raw is None:
        return 1
    try:
        value = int(raw)
    except ValueError as exc:
        raise ValueError(f"{PARALLELISM_ENV} must be an integer; got {raw!r}"
                         ) from exc
    return max(1, value)


def run_experiment(spec, replications: int, seed: int,
                   parallelism: int | None = None, *, grid_size: int = 50,
                   grid_ratio: float | None = None, tol: float = 1e-8,
                   max_iter: int = 10_000) -> ExperimentReport:
    """Run a Monte Carlo experiment.

    Parameters
    ----------
    spec : ExperimentSpec or str
        An experiment, or the name of a registered one (e.g. "exp1a").
    replications : int
    seed : int
        Base seed; replication r uses the counter-based stream keyed by
        seed XOR r.
    parallelism : int, optional
        Worker threads.  Defaults to the DLPANEL_PARALLELISM environment
        variable (or 1).  Results are reduced in replication order, so
        the report is identical for any worker count.

    Returns
    -------
    ExperimentReport
        Failed replications are recorded under ``excluded`` and skipped
        in the aggregates.
    """
    if isinstance(spec, str):
        try:
            spec = EXPERIMENTS[spec]
        except KeyError:
            raise ValueError(f"unknown experiment {spec!r}; known: "
                             f"{sorted(EXPERIMENTS)}") from None
    if replications < 1:
        raise ValueError("replications must be positive")
    workers = default_parallelism() if parallelism is None else max(1, int(parallelism))

    def job(rep: int):
        try:
            return rep, _run_replication(spec, seed, rep, grid_size,
                                         grid_ratio, tol, max_iter), None
        except Exception as exc:  # noqa: BLE001 - recorded, not swallowed
            return rep, None, f"{type(exc).__name__}: {exc}"

    if workers == 1:
        outcomes = [job(r) for r in range(replications)]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            outcomes = list(pool.map(job, range(replications)))
    outcomes.sort(key=lambda item: item[0])

    failures = [(rep, msg) for rep, _, msg in outcomes if msg is not None]
    n_hyp = len(spec.hypothesis)
    results = {}
    for method in ("ls", "dl", "oracle"):
        records = [rec[method] if rec is not None else None
                   for _, rec, msg in outcomes if msg is None]
        results[method] = _aggregate(records, n_hyp)

    mc_error = {}
    for method, res in results.items():
        if not res.get("applicable"):
            continue
        reps = res["replications_used"]
        mc_error[method] = {
            "coverage": [_halfwidth(c, reps) for c in res["coverage"]],
            "size": _halfwidth(res["size"], reps),
            "power": _halfwidth(res["power"], reps),
        }
    used = results["dl"].get("replications_used", 0)
    mc_error["halfwidth_at_coverage_090"] = _halfwidth(0.90, used)

    config = {
        "experiment": spec.name,
        "n_units": spec.dgp.n_units,
        "n_periods": spec.dgp.n_periods,
        "p_x": spec.dgp.p_x,
        "alpha_true": list(spec.dgp.alpha_true),
        "n_lags_fit": spec.dgp.n_lags_fit,
        "beta_indices": list(spec.dgp.beta_indices),
        "beta_value": spec.dgp.beta_value,
        "ar_x": spec.dgp.ar_x,
        "rho_x": spec.dgp.rho_x,
        "error_kind": spec.dgp.error_kind,
        "burn_in": spec.dgp.burn_in,
        "fix_b_eta": spec.dgp.fix_b_eta,
        "hypothesis": list(spec.hypothesis),
        "power_shift": spec.power_shift,
        "level": spec.level,
        "replications": replications,
        "lambda_grid_size": grid_size,
        "solver_tol": tol,
    }
    excluded = {"count": len(failures),
                "replications": [{"replication": rep, "error": msg}
                                 for rep, msg in failures]}
    return ExperimentReport(config=config, seed=int(seed), results=results,
                            mc_error=mc_error, excluded=excluded)
