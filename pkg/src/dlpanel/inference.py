"""Honest confidence intervals and joint chi-square tests.

For a common coefficient j the interval is
gamma_tilde_j +/- z_{1-d/2} sigma_j / sqrt(NT) with
sigma_j^2 = [Theta_Z Sigma1 Theta_Z']_{jj}; for a fixed effect i it is
gamma_tilde_{p+i} +/- z_{1-d/2} sqrt(Sigma3_ii) / sqrt(T).  A group
H of coordinates is tested with

    [S_H (gamma_tilde_H - gamma0_H)]' (Theta Sigma Theta')_H^{-1} [...]

referred to a chi-square distribution with |H| degrees of freedom.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .covariance import RobustCovariance, _quadform
from .debias import DebiasedEstimate
from .distributions import chi2_sf, norm_quantile
from .exceptions import NumericalError
from .nodewise import NodewiseInverse


@dataclass
class InferenceResult:
    """A single confidence interval on the natural coefficient scale."""

    index: int | None
    estimate: float
    std_error: float
    ci_lower: float
    ci_upper: float
    level: float
    degenerate: bool = False


@dataclass
class WaldTest:
    """A joint chi-square test of a group null."""

    statistic: float
    dof: int
    p_value: float
    indices: tuple[int, ...]
    null_values: tuple[float, ...]


def _scale_for(h: int, cov: RobustCovariance) -> float:
    nt = cov.n_units * cov.n_periods
    return float(np.sqrt(nt)) if h < cov.p else float(np.sqrt(cov.n_periods))


def _scaled_se(h: int, inv, cov: RobustCovariance) -> float:
    """sqrt of the asymptotic variance of the scaled coordinate h."""
    if h < cov.p:
        row = inv.row(h)
        return float(np.sqrt(max(row @ cov.sigma1 @ row, 0.0)))
    return float(np.sqrt(max(cov.sigma3_diag[h - cov.p], 0.0)))


def contrast_zstat(rho: np.ndarray, null_scaled: float,
                   estimate: DebiasedEstimate, inv: NodewiseInverse,
                   cov: RobustCovariance) -> float:
    """z statistic for a unit-norm sparse contrast of the scaled estimator.

    The tested quantity is rho' S gamma; ``null_scaled`` is its
    hypothesised value.  Every support coordinate of rho must have been
    debiased.
    """
    rho = np.asarray(rho, dtype=np.float64)
    m = cov.p + cov.n_units
    if rho.shape != (m,):
        raise ValueError("rho must have length p + N")
    if abs(np.linalg.norm(rho) - 1.0) > 1e-8:
        raise ValueError("rho must have unit norm")
    support = np.flatnonzero(rho)
    val = 0.0
    for h in support:
        val += rho[h] * _scale_for(int(h), cov) * estimate.values[int(h)]
    var = _quadform(rho, inv, cov)
    if var <= 0.0:
        raise NumericalError("contrast variance is not positive")
    return float((val - null_scaled) / np.sqrt(var))


def confidence_interval(h: int, estimate: DebiasedEstimate,
                        inv, cov: RobustCovariance,
                        level: float = 0.95) -> InferenceResult:
    """Two-sided confidence interval for one coefficient.

    Parameters
    ----------
    h : int
        Coefficient index (0-based; h >= p addresses fixed effects).
    estimate : DebiasedEstimate
        Must contain index h.
    inv : NodewiseInverse
        Needs row h when h < p; unused for fixed effects.
    cov : RobustCovariance
    level : float
        Coverage level in (0, 1).

    Returns
    -------
    InferenceResult
        ``degenerate`` is set when the standard error is exactly zero, in
        which case the interval collapses to the point estimate.
    """
    if not 0.0 < level < 1.0:
        raise ValueError("level must lie in (0, 1)")
    h = int(h)
    est = estimate.values[h]
    se_scaled = _scaled_se(h, inv, cov)
    se = se_scaled / _scale_for(h, cov)
    if se == 0.0:
        return InferenceResult(index=h, estimate=est, std_error=0.0,
                               ci_lower=est, ci_upper=est, level=level,
                               degenerate=True)
    z = norm_quantile(1.0 - (1.0 - level) / 2.0)
    return InferenceResult(index=h, estimate=est, std_error=se,
                           ci_lower=est - z * se, ci_upper=est + z * se,
                           level=level)


def wald_chi2(indices, null_values, estimate: DebiasedEstimate,
              inv, cov: RobustCovariance) -> WaldTest:
    """Joint chi-square test of gamma_H = gamma0_H.

    Raises
    ------
    NumericalError
        If the covariance submatrix of the tested group is not positive
        definite (the Cholesky factorisation fails).
    """
    idx = tuple(int(h) for h in indices)
    null = tuple(float(v) for v in null_values)
    if len(idx) != len(null):
        raise ValueError("indices and null_values must have equal length")
    if len(idx) == 0:
        raise ValueError("empty test group")
    if len(set(idx)) != len(idx):
        raise ValueError("duplicate indices in test group")
    k = len(idx)
    p = cov.p
    rows = {}
    for h in idx:
        if h < p:
            rows[h] = inv.row(h)
    m = np.empty((k, k))
    for a, ha in enumerate(idx):
        for b, hb in enumerate(idx):
            if b < a:
                m[a, b] = m[b, a]
                continue
            if ha < p and hb < p:
                m[a, b] = rows[ha] @ cov.sigma1 @ rows[hb]
            elif ha < p:
                m[a, b] = rows[ha] @ cov.sigma2[:, hb - p]
            elif hb < p:
                m[a, b] = rows[hb] @ cov.sigma2[:, ha - p]
            else:
                m[a, b] = cov.sigma3_diag[ha - p] if ha == hb else 0.0
    diff = np.array([_scale_for(h, cov) * (estimate.values[h] - v)
                     for h, v in zip(idx, null)])
    try:
        chol = np.linalg.cholesky(m)
    except np.linalg.LinAlgError as exc:
        raise NumericalError(
            "covariance of the tested group is not positive definite") from exc
    u = np.linalg.solve(chol, diff)
    stat = float(u @ u)
    return WaldTest(statistic=stat, dof=k, p_value=chi2_sf(stat, k),
                    indices=idx, null_values=null)
