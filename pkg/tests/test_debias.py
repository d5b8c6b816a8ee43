"""Debiasing step: one-step correction of the penalized estimator.

Key algebra under test: with the exact scaled-Gram inverse the corrected
estimator collapses to full OLS from any starting fit, and without noise
the scaled estimation error equals minus the remainder diagnostic.
"""
import numpy as np
import pytest

from dlpanel import (
    DgpConfig,
    build_design,
    delta_diagnostic,
    desparsify,
    fit_nodewise,
    gram,
    panel_problem,
    replication_rng,
    response_vector,
    select_lambda,
    simulate_panel,
    solve_weighted_lasso,
)
from dlpanel.solver import LassoFit

from conftest import dense_design_matrix


def olsgamma(design, y):
    dense = dense_design_matrix(design)
    coef, *_ = np.linalg.lstsq(dense, y, rcond=None)
    return coef


def fit_panel(design, y, lam=None):
    if lam is None:
        lam, _ = select_lambda(design, y, mode="bic")
    return solve_weighted_lasso(panel_problem(design, y, lam))


def exact_theta(design):
    return np.linalg.inv(gram(design))


def test_exact_inverse_recovers_ols_from_lasso_fit(small_panel, small_design):
    y = response_vector(small_panel)
    fit = fit_panel(small_design, y)
    theta = exact_theta(small_design)
    indices = range(small_design.n_coef)
    est = desparsify(fit, small_design, y, theta, indices)
    target = olsgamma(small_design, y)
    for h in indices:
        assert est[h] == pytest.approx(target[h], abs=1e-8)


def test_exact_inverse_recovers_ols_from_arbitrary_fit(small_panel,
                                                       small_design):
    # the one-step correction with the exact inverse is exact regardless
    # of the starting point
    y = response_vector(small_panel)
    rng = np.random.default_rng(7)
    coef = rng.standard_normal(small_design.n_coef) * 2.0
    fake = LassoFit(coefficients=coef, lam=1.0,
                    active_set=np.flatnonzero(coef), objective_value=np.nan,
                    iterations=0, converged=True)
    est = desparsify(fake, small_design, y, exact_theta(small_design),
                     range(small_design.n_coef))
    target = olsgamma(small_design, y)
    for h in range(small_design.n_coef):
        assert est[h] == pytest.approx(target[h], abs=1e-8)


def test_fixed_effect_correction_is_residual_mean(small_panel, small_design):
    y = response_vector(small_panel)
    fit = fit_panel(small_design, y)
    inv = fit_nodewise(small_design, [0], lambda_mode=0.1)
    p, n, t = small_design.p, small_design.n_units, small_design.n_periods
    est = desparsify(fit, small_design, y, inv, [p, p + n - 1])
    resid = y - small_design.matvec(fit.coefficients)
    for i in (0, n - 1):
        expected = fit.coefficients[p + i] + resid.reshape(n, t)[i].mean()
        assert est[p + i] == pytest.approx(expected, abs=1e-12)


def test_common_coefficient_correction_formula(small_panel, small_design):
    y = response_vector(small_panel)
    fit = fit_panel(small_design, y)
    inv = fit_nodewise(small_design, [1, 3], lambda_mode="bic")
    est = desparsify(fit, small_design, y, inv, [1, 3])
    resid = y - small_design.matvec(fit.coefficients)
    nt = small_design.n_obs
    for h in (1, 3):
        expected = fit.coefficients[h] \
            + inv.row(h) @ (small_design.Z.T @ resid) / nt
        assert est[h] == pytest.approx(expected, abs=1e-12)
    assert est.lam_node == inv.lam


def test_unpenalized_fit_needs_no_correction(small_panel):
    # at an interior optimum the gradient Pi'r vanishes, so the
    # correction term is identically zero whatever inverse is used
    config = DgpConfig(n_units=4, n_periods=12, p_x=2, alpha_true=(0.4,),
                       n_lags_fit=1, beta_indices=(0,), burn_in=40, seed=3)
    panel = simulate_panel(config, replication_rng(3, 0))
    design = build_design(panel)
    y = response_vector(panel)
    fit = fit_panel(design, y, lam=0.0)
    inv = fit_nodewise(design, [0, 1], lambda_mode=0.2)
    est = desparsify(fit, design, y, inv, [0, 1, design.p])
    for h in (0, 1, design.p):
        assert est[h] == pytest.approx(fit.coefficients[h], abs=1e-6)


def test_delta_identity_without_noise():
    """With eps = 0, S_h (est_h - gamma_h) = -Delta_h exactly."""
    config = DgpConfig(n_units=5, n_periods=10, p_x=3, alpha_true=(0.5,),
                       n_lags_fit=2, beta_indices=(1,), burn_in=60,
                       error_kind="none", seed=21)
    panel = simulate_panel(config, replication_rng(21, 0))
    design = build_design(panel)
    y = response_vector(panel)
    fit = fit_panel(design, y)
    inv = fit_nodewise(design, [0, 2], lambda_mode=0.05)
    idx = [0, 2, design.p + 1]
    est = desparsify(fit, design, y, inv, idx)
    delta = delta_diagnostic(fit, design, panel.gamma_true, inv, idx)
    s = design.s_diag()
    for h in idx:
        lhs = s[h] * (est[h] - panel.gamma_true[h])
        assert lhs == pytest.approx(-delta[h], abs=1e-8)


def test_delta_zero_with_exact_inverse(small_panel, small_design):
    y = response_vector(small_panel)
    fit = fit_panel(small_design, y)
    delta = delta_diagnostic(fit, small_design, small_panel.gamma_true,
                             exact_theta(small_design),
                             range(small_design.n_coef))
    assert max(abs(v) for v in delta.values()) < 1e-8


def test_delta_shrinks_with_longer_panels():
    # the remainder is the price of the approximate inverse; more
    # periods per unit must shrink it
    def median_abs_delta(n_periods, seed):
        config = DgpConfig(n_units=10, n_periods=n_periods, p_x=20,
                           burn_in=200, seed=seed)
        panel = simulate_panel(config, replication_rng(seed, 0))
        design = build_design(panel)
        y = response_vector(panel)
        fit = fit_panel(design, y)
        inv = fit_nodewise(design, [0, 6, 12], lambda_mode="bic")
        delta = delta_diagnostic(fit, design, panel.gamma_true, inv,
                                 [0, 6, 12])
        return float(np.median(np.abs(list(delta.values()))))

    short = [median_abs_delta(10, s) for s in range(6)]
    long = [median_abs_delta(40, s) for s in range(6)]
    assert np.median(long) < np.median(short)
