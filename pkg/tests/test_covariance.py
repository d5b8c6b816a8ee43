"""Heteroskedasticity-robust covariance blocks against naive loops."""
import numpy as np
import pytest

from dlpanel import (
    asy_variance,
    fit_nodewise,
    gram,
    panel_problem,
    residuals,
    sigma_blocks,
    solve_weighted_lasso,
    response_vector,
)


def naive_blocks(design, resid):
    """Triple-loop reference for the three covariance blocks."""
    n, t, p = design.n_units, design.n_periods, design.p
    nt = n * t
    Z = design.Z
    e2 = resid ** 2
    s1 = np.zeros((p, p))
    for r in range(nt):
        s1 += e2[r] * np.outer(Z[r], Z[r])
    s1 /= nt
    s2 = np.zeros((p, n))
    for i in range(n):
        for k in range(t):
            r = i * t + k
            s2[:, i] += e2[r] * Z[r]
    s2 /= np.sqrt(n) * t
    s3 = np.array([e2[i * t:(i + 1) * t].sum() / t for i in range(n)])
    return s1, s2, s3


@pytest.fixture(scope="module")
def cov_setup(small_panel, small_design):
    y = response_vector(small_panel)
    fit = solve_weighted_lasso(panel_problem(small_design, y, 3.0))
    resid = residuals(fit, small_design, y)
    cov = sigma_blocks(small_design, resid)
    return fit, resid, cov


def test_blocks_match_naive_loops(small_design, cov_setup):
    _, resid, cov = cov_setup
    s1, s2, s3 = naive_blocks(small_design, resid)
    np.testing.assert_allclose(cov.sigma1, s1, atol=1e-10)
    np.testing.assert_allclose(cov.sigma2, s2, atol=1e-10)
    np.testing.assert_allclose(cov.sigma3_diag, s3, atol=1e-10)


def test_residuals_definition(small_panel, small_design, cov_setup):
    fit, resid, _ = cov_setup
    y = response_vector(small_panel)
    np.testing.assert_allclose(
        resid, y - small_design.matvec(fit.coefficients), atol=1e-14)


def test_sigma1_positive_semidefinite(cov_setup):
    _, _, cov = cov_setup
    assert np.linalg.eigvalsh(cov.sigma1).min() > -1e-10


def test_dense_assembly_blocks(small_design, cov_setup):
    _, _, cov = cov_setup
    p, n = small_design.p, small_design.n_units
    dense = cov.dense()
    assert dense.shape == (p + n, p + n)
    np.testing.assert_array_equal(dense[:p, :p], cov.sigma1)
    np.testing.assert_array_equal(dense[:p, p:], cov.sigma2)
    np.testing.assert_array_equal(dense[p:, :p], cov.sigma2.T)
    np.testing.assert_array_equal(dense[p:, p:], np.diag(cov.sigma3_diag))


def test_asy_variance_against_dense_sandwich(small_design, cov_setup):
    _, _, cov = cov_setup
    p, n = small_design.p, small_design.n_units
    inv = fit_nodewise(small_design, range(p), lambda_mode=0.05)
    theta = np.zeros((p + n, p + n))
    for j in range(p):
        theta[j, :p] = inv.row(j)
    theta[p:, p:] = np.eye(n)
    rng = np.random.default_rng(40)
    for _ in range(5):
        rho = rng.standard_normal(p + n)
        rho[rng.random(p + n) < 0.6] = 0.0
        if not rho.any():
            rho[0] = 1.0
        rho /= np.linalg.norm(rho)
        expected = float(rho @ theta @ cov.dense() @ theta.T @ rho)
        assert asy_variance(rho, inv, cov) == pytest.approx(expected,
                                                            abs=1e-10)


def test_basis_vector_variances(small_design, cov_setup):
    _, _, cov = cov_setup
    p, n = small_design.p, small_design.n_units
    inv = fit_nodewise(small_design, [2], lambda_mode=0.1)
    rho = np.zeros(p + n)
    rho[2] = 1.0
    expected = float(inv.row(2) @ cov.sigma1 @ inv.row(2))
    assert asy_variance(rho, inv, cov) == pytest.approx(expected, abs=1e-12)
    rho = np.zeros(p + n)
    rho[p + 3] = 1.0
    assert asy_variance(rho, inv, cov) == pytest.approx(
        float(cov.sigma3_diag[3]), abs=1e-12)


def test_non_unit_contrast_rejected(small_design, cov_setup):
    _, _, cov = cov_setup
    inv = fit_nodewise(small_design, [0], lambda_mode=0.1)
    rho = np.zeros(small_design.n_coef)
    rho[0] = 2.0
    with pytest.raises(ValueError):
        asy_variance(rho, inv, cov)
