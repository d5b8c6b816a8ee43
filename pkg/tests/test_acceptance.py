"""End-to-end acceptance checks.

One test per acceptance criterion, ordered a01..a09; run with ``-v`` to
get one pass/fail line per criterion.  Every test prints the measured
numbers next to the bound it must satisfy, so a failing run shows how far
off the implementation is.  The Monte Carlo criteria (a04-a07, a09) share
three 200-replication experiment runs at a pinned seed; they take a few
minutes on one core, dominated by the over-parameterised design.
"""
import itertools
import time

import numpy as np
import pytest

from dlpanel import (
    DgpConfig,
    StackedRegressors,
    WeightedLassoProblem,
    approx_inverse_check,
    build_design,
    chi2_cdf,
    chi2_sf,
    desparsify,
    dumps_json,
    fit_nodewise,
    gram,
    kkt_report,
    norm_cdf,
    norm_quantile,
    panel_problem,
    replication_rng,
    response_vector,
    run_experiment,
    select_lambda,
    simulate_panel,
    solve_weighted_lasso,
)
from dlpanel.solver import LassoFit, lambda_max_gram

SEED = 7
REPLICATIONS = 200


def check(label, ok, detail):
    print(f"{label}: {detail} -> {'PASS' if ok else 'FAIL'}")
    assert ok, f"{label}: {detail}"


# ---------------------------------------------------------------------------
# shared experiment runs (materialised once per session)


@pytest.fixture(scope="module")
def exp1a():
    return run_experiment("exp1a", REPLICATIONS, SEED, parallelism=8)


@pytest.fixture(scope="module")
def exp1a_serial():
    return run_experiment("exp1a", REPLICATIONS, SEED, parallelism=1)


@pytest.fixture(scope="module")
def exp1b():
    return run_experiment("exp1b", REPLICATIONS, SEED, parallelism=8)


@pytest.fixture(scope="module")
def exp2a():
    return run_experiment("exp2a", REPLICATIONS, SEED, parallelism=8)


# ---------------------------------------------------------------------------
# a01: solver against exhaustive sign enumeration


def _enumeration_oracle(X, y, lam, weights, scale, slack=1e-9):
    n, m = X.shape
    best_b, best_obj = None, np.inf
    for signs in itertools.product((-1.0, 0.0, 1.0), repeat=m):
        s = np.array(signs)
        active = np.flatnonzero(s)
        b = np.zeros(m)
        if active.size:
            xa = X[:, active]
            try:
                ba = np.linalg.solve(
                    xa.T @ xa,
                    xa.T @ y - (lam / scale) * (weights[active] * s[active]))
            except np.linalg.LinAlgError:
                continue
            if np.any(ba * s[active] <= 0):
                continue
            b[active] = ba
        r = y - X @ b
        grad = X.T @ r
        inactive = s == 0
        if np.any(scale * np.abs(grad[inactive])
                  > lam * weights[inactive] + slack * (1.0 + lam)):
            continue
        obj = scale * float(r @ r) + 2.0 * lam * float(weights @ np.abs(b))
        if obj < best_obj:
            best_obj, best_b = obj, b
    return best_b


def _random_small_instance(rng):
    n = int(rng.integers(3, 13))
    m = int(rng.integers(1, 5))
    X = rng.standard_normal((n, m)) * rng.uniform(0.5, 2.0)
    b0 = rng.standard_normal(m) * (rng.random(m) < 0.7)
    y = X @ b0 + 0.5 * rng.standard_normal(n)
    weights = rng.uniform(0.3, 2.0, size=m)
    scale = float(rng.choice([1.0, 1.0 / n, 2.5]))
    lam_max = lambda_max_gram(X.T @ y, weights, scale)
    lam = float(rng.uniform(0.02, 1.1) * lam_max)
    return X, y, lam, weights, scale


def test_a01_solver_agrees_with_sign_enumeration_oracle():
    rng = np.random.default_rng(20250814)
    # trigger jit compilation outside the timed region
    X, y, lam, w, sc = _random_small_instance(rng)
    solve_weighted_lasso(WeightedLassoProblem(
        response=y, regressors=StackedRegressors(X), objective_scale=sc,
        penalty_weights=w, lam=lam))

    worst_coef = 0.0
    worst_kkt = 0.0
    start = time.perf_counter()
    for _ in range(200):
        X, y, lam, weights, scale = _random_small_instance(rng)
        problem = WeightedLassoProblem(
            response=y, regressors=StackedRegressors(X),
            objective_scale=scale, penalty_weights=weights, lam=lam)
        fit = solve_weighted_lasso(problem)
        oracle = _enumeration_oracle(X, y, lam, weights, scale)
        assert oracle is not None
        worst_coef = max(worst_coef,
                         float(np.max(np.abs(fit.coefficients - oracle))))
        _, kkt = kkt_report(problem, fit)
        worst_kkt = max(worst_kkt, kkt / (1.0 + lam))
    elapsed = time.perf_counter() - start

    check("a01 solver vs enumeration",
          worst_coef <= 1e-6 and worst_kkt <= 1e-8 and elapsed < 10.0,
          f"max |coef diff| {worst_coef:.2e} (<=1e-6), "
          f"max scaled KKT {worst_kkt:.2e} (<=1e-8), "
          f"time {elapsed:.2f}s (<10s) over 200 instances")


# ---------------------------------------------------------------------------
# a02: nodewise row certificates on a spread of designs


def test_a02_nodewise_rows_satisfy_kkt_certificates():
    rng = np.random.default_rng(314)
    # jit warmup outside the timed region
    cfg0 = DgpConfig(n_units=4, n_periods=6, p_x=3, alpha_true=(0.5,),
                     n_lags_fit=1, beta_indices=(0,), burn_in=40, seed=0)
    d0 = build_design(simulate_panel(cfg0, replication_rng(0, 0)))
    fit_nodewise(d0, [0], 0.5)

    worst_diag = 0.0
    worst_excess = -np.inf
    start = time.perf_counter()
    for trial in range(50):
        n = int(rng.integers(4, 11))
        t = int(rng.integers(5, min(20, 200 // n) + 1))
        lags = int(rng.integers(1, 3))
        p_x = int(rng.integers(3, 31 - lags))
        cfg = DgpConfig(n_units=n, n_periods=t, p_x=p_x, alpha_true=(0.5,),
                        n_lags_fit=lags, beta_indices=(p_x - 1,),
                        burn_in=40, seed=1000 + trial)
        design = build_design(simulate_panel(cfg, replication_rng(cfg.seed, 0)))
        assert design.p <= 30 and design.n_obs <= 200
        rows = sorted(rng.choice(design.p, size=3, replace=False).tolist())
        mode = ("bic", "theoretical")[trial % 2]
        inv = fit_nodewise(design, rows, mode)
        report = approx_inverse_check(inv, design)
        for j in rows:
            worst_diag = max(worst_diag, abs(report[j]["diag_gap"]))
            worst_excess = max(worst_excess,
                               report[j]["kkt_sup"] - report[j]["bound"])
    elapsed = time.perf_counter() - start

    check("a02 nodewise certificates",
          worst_diag <= 1e-8 and worst_excess <= 1e-8 and elapsed < 30.0,
          f"max |diag gap| {worst_diag:.2e} (<=1e-8), max KKT excess "
          f"{worst_excess:.2e} (<=1e-8), time {elapsed:.2f}s (<30s) "
          f"over 50 designs")


# ---------------------------------------------------------------------------
# a03: debiasing with the exact inverse reproduces least squares


def test_a03_exact_inverse_debiasing_reproduces_least_squares():
    cfg = DgpConfig(n_units=5, n_periods=10, p_x=8, alpha_true=(0.5,),
                    n_lags_fit=2, beta_indices=(2, 6), burn_in=60, seed=17)
    panel = simulate_panel(cfg, replication_rng(17, 0))
    design = build_design(panel)
    y = response_vector(panel)
    assert design.p + design.n_units <= 20 and design.n_obs >= 40

    dense = np.hstack([design.Z, np.kron(np.eye(design.n_units),
                                         np.ones((design.n_periods, 1)))])
    target, *_ = np.linalg.lstsq(dense, y, rcond=None)
    theta = np.linalg.inv(gram(design))
    indices = range(design.n_coef)

    lam, _ = select_lambda(design, y, mode="bic")
    lasso = solve_weighted_lasso(panel_problem(design, y, lam))
    rng = np.random.default_rng(3)
    arbitrary = LassoFit(coefficients=rng.standard_normal(design.n_coef) * 2.0,
                         lam=1.0, active_set=np.arange(design.n_coef),
                         objective_value=np.nan, iterations=0, converged=True)

    worst = 0.0
    for fit in (lasso, arbitrary):
        est = desparsify(fit, design, y, theta, indices)
        worst = max(worst, max(abs(est[h] - target[h]) for h in indices))

    check("a03 exact-inverse debiasing",
          worst <= 1e-8,
          f"max |debiased - OLS| {worst:.2e} (<=1e-8) from a tuned and an "
          f"arbitrary starting fit, all {design.n_coef} coordinates")


# ---------------------------------------------------------------------------
# a04-a07, a09: Monte Carlo criteria


def test_a04_dense_gaussian_experiment_metrics_within_bands(exp1a):
    dl = exp1a.results["dl"]
    ls = exp1a.results["ls"]
    oracle = exp1a.results["oracle"]
    cov_ok = all(0.84 <= c <= 0.97 for c in dl["coverage"])
    len_ok = all(0.32 <= v <= 0.48 for v in dl["ci_length"])
    size_ok = dl["size"] <= 0.23
    power_ok = dl["power"] >= 0.72
    rmse_ok = oracle["rmse_alpha"] < dl["rmse_alpha"] < ls["rmse_alpha"]
    check("a04 dense gaussian experiment",
          cov_ok and len_ok and size_ok and power_ok and rmse_ok,
          f"coverage {[round(c, 3) for c in dl['coverage']]} (in [0.84,0.97]), "
          f"length {[round(v, 3) for v in dl['ci_length']]} (in [0.32,0.48]), "
          f"size {dl['size']:.3f} (<=0.23), power {dl['power']:.3f} (>=0.72), "
          f"rmse oracle {oracle['rmse_alpha']:.3f} < debiased "
          f"{dl['rmse_alpha']:.3f} < least-squares {ls['rmse_alpha']:.3f}")


def test_a05_heteroskedastic_metrics_track_gaussian(exp1a, exp1b):
    a, b = exp1a.results["dl"], exp1b.results["dl"]
    cov_delta = max(abs(x - y) for x, y in zip(a["coverage"], b["coverage"]))
    size_delta = abs(a["size"] - b["size"])
    check("a05 heteroskedastic vs gaussian",
          cov_delta <= 0.06 and size_delta <= 0.06,
          f"max coverage delta {cov_delta:.3f} (<=0.06), "
          f"size delta {size_delta:.3f} (<=0.06)")


def test_a06_null_p_values_are_near_uniform(exp1a):
    pv = np.sort(np.asarray(exp1a.results["dl"]["p_true_null"]))
    n = pv.size
    grid = np.arange(1, n + 1) / n
    ks = float(max(np.max(grid - pv), np.max(pv - (grid - 1.0 / n))))
    check("a06 null p-value uniformity",
          ks <= 0.15,
          f"KS distance {ks:.4f} (<=0.15) over {n} joint-test p-values")


def test_a07_overparameterised_experiment_covers(exp2a):
    dl = exp2a.results["dl"]
    ls = exp2a.results["ls"]
    used = dl.get("replications_used", 0)
    cov_ok = all(c >= 0.82 for c in dl["coverage"])
    check("a07 over-parameterised design",
          used == REPLICATIONS and cov_ok and ls["applicable"] is False,
          f"replications used {used}/{REPLICATIONS}, coverage "
          f"{[round(c, 3) for c in dl['coverage']]} (each >=0.82), "
          f"least-squares applicable {ls['applicable']} (expected False)")


# ---------------------------------------------------------------------------
# a08: distribution kernels against frozen references


def test_a08_distribution_kernels_match_references():
    cdf_points = [
        (-5.0, 2.866515718791933e-07),
        (-1.0, 0.15865525393145707),
        (0.0, 0.5),
        (1.0, 0.8413447460685429),
        (1.959963984540054, 0.975),
        (4.0, 0.9999683287581669),
    ]
    quantile_points = [
        (0.001, -3.090232306167813),
        (0.05, -1.6448536269514729),
        (0.5, 0.0),
        (0.9, 1.2815515655446004),
        (0.99, 2.3263478740408408),
    ]
    chi2_points = [
        (3.841458820694124, 1, 0.9500000000000001),
        (5.991464547107979, 2, 0.95),
        (7.8147, 3, 0.94999937471524),
        (1.0, 2, 0.3934693402873665),
    ]
    worst = 0.0
    for x, ref in cdf_points:
        worst = max(worst, abs(norm_cdf(x) - ref))
    for prob, ref in quantile_points:
        worst = max(worst, abs(norm_quantile(prob) - ref))
    for x, k, ref in chi2_points:
        worst = max(worst, abs(chi2_cdf(x, k) - ref))
    z_err = abs(norm_quantile(0.975) - 1.959963984540054)
    tail_err = abs(chi2_sf(7.8147, 3) - 0.05)
    check("a08 distribution kernels",
          worst <= 1e-6 and z_err <= 1e-5 and tail_err <= 1e-4,
          f"max reference error {worst:.2e} (<=1e-6), two-sided 5% normal "
          f"quantile error {z_err:.2e} (<=1e-5), chi-square(3) tail error "
          f"{tail_err:.2e} (<=1e-4)")


def test_a09_reports_identical_across_worker_counts(exp1a, exp1a_serial):
    serial = dumps_json(exp1a_serial.to_dict())
    threaded = dumps_json(exp1a.to_dict())
    check("a09 worker-count invariance",
          serial == threaded,
          f"serialised reports identical across 1 and 8 workers: "
          f"{serial == threaded} ({len(serial)} bytes)")
