"""Least-squares baselines: full (within) and oracle fits with dense
heteroskedasticity-robust inference.

The full baseline regresses y on all p + N columns and is only defined
when p + N <= N*T; the oracle baseline keeps a caller-supplied subset of
the common columns plus all fixed effects.  Both solve the normal
equations through the Schur complement of the analytic fixed-effect block
(D'D = T I_N), and both use the exact inverse of their scaled Gram matrix
in the sandwich variance, so the machinery mirrors the debiased estimator
with Theta replaced by the exact inverse.
"""
from __future__ import annotations

import numpy as np

from .covariance import sigma_blocks
from .distributions import chi2_sf, norm_quantile
from .exceptions import NumericalError
from .inference import InferenceResult, WaldTest
from .model import DesignSystem, gram


def _schur_solve(design: DesignSystem, y: np.ndarray) -> np.ndarray:
    """Least squares on (Z, D) via the fixed-effect Schur complement."""
    n, t, p = design.n_units, design.n_periods, design.p
    zz = design.Z.T @ design.Z
    zd = design.Z.reshape(n, t, p).sum(axis=1).T  # (p, N)
    zy = design.Z.T @ y
    dy = design.unit_sums(y)
    schur = zz - zd @ zd.T / t
    rhs = zy - zd @ dy / t
    try:
        chol = np.linalg.cholesky(schur)
    except np.linalg.LinAlgError as exc:
        raise NumericalError("least-squares design is rank deficient "
                             "(within-transformed Gram not positive definite)"
                             ) from exc
    alpha = np.linalg.solve(chol.T, np.linalg.solve(chol, rhs))
    eta = (dy - zd.T @ alpha) / t
    return np.concatenate([alpha, eta])


def _subdesign(design: DesignSystem, z_cols: np.ndarray) -> DesignSystem:
    """A design restricted to a subset of the common columns."""
    return DesignSystem(Z=np.ascontiguousarray(design.Z[:, z_cols]),
                        n_units=design.n_units, n_periods=design.n_periods,
                        n_lags=0, p_x=len(z_cols))


def ols_baselines(design: DesignSystem, y: np.ndarray, oracle_support=None):
    """Full and oracle least-squares coefficient vectors.

    Parameters
    ----------
    design : DesignSystem
    y : ndarray
        Stacked response.
    oracle_support : iterable of int, optional
        Common-coefficient indices kept by the oracle; all fixed effects
        are always included.  When omitted, only the full fit is computed.

    Returns
    -------
    (full, oracle) : (ndarray | None, ndarray | None)
        Each of length p + N.  ``full`` is None when p + N > N*T
        (not applicable); ``oracle`` is None when no support was given.

    Raises
    ------
    NumericalError
        On rank-deficient designs.
    """
    p, n = design.p, design.n_units
    full = None
    if p + n <= design.n_obs:
        full = _schur_solve(design, y)
    oracle = None
    if oracle_support is not None:
        cols = np.array(sorted(set(int(j) for j in oracle_support)), dtype=int)
        if cols.size and (cols[0] < 0 or cols[-1] >= p):
            raise ValueError("oracle support indices must lie in [0, p)")
        sub = _subdesign(design, cols)
        coef_sub = _schur_solve(sub, y)
        oracle = np.zeros(p + n)
        oracle[cols] = coef_sub[:cols.size]
        oracle[p:] = coef_sub[cols.size:]
    return full, oracle


def baseline_inference(design: DesignSystem, y: np.ndarray, z_cols,
                       h_indices, null_sets: dict, level: float = 0.95):
    """Robust least-squares inference on a column subset.

    Fits y on (Z[:, z_cols], D), builds the sandwich
    Psi^{-1} Sigma Psi^{-1} with the exact inverse of the scaled Gram
    matrix, and returns intervals for the requested gamma coordinates and
    a joint chi-square test per entry of ``null_sets``.

    Parameters
    ----------
    z_cols : iterable of int
        Common columns included in the regression (must contain every
        h < p in ``h_indices``).
    h_indices : iterable of int
        Full-gamma coordinates to report intervals for.
    null_sets : dict[str, sequence of float]
        Named null-value vectors for the joint test of ``h_indices``.

    Returns
    -------
    (coef, intervals, tests) where coef has length p + N with zeros off
    the included columns, intervals maps h -> InferenceResult and tests
    maps name -> WaldTest.
    """
    p, n, t = design.p, design.n_units, design.n_periods
    cols = np.array(sorted(set(int(j) for j in z_cols)), dtype=int)
    h_indices = tuple(int(h) for h in h_indices)
    pos = {}
    for h in h_indices:
        if h < p:
            where = np.flatnonzero(cols == h)
            if where.size == 0:
                raise ValueError(f"tested column {h} not in the included set")
            pos[h] = int(where[0])
        else:
            pos[h] = cols.size + (h - p)
    sub = _subdesign(design, cols)
    coef_sub = _schur_solve(sub, y)
    resid = y - sub.matvec(coef_sub)
    cov = sigma_blocks(sub, resid)
    psi = gram(sub)
    try:
        chol = np.linalg.cholesky(psi)
    except np.linalg.LinAlgError as exc:
        raise NumericalError("scaled Gram matrix of the baseline design is "
                             "not positive definite") from exc
    ident = np.eye(psi.shape[0])
    theta = np.linalg.solve(chol.T, np.linalg.solve(chol, ident))
    sandwich = theta @ cov.dense() @ theta.T

    s_sub = sub.s_diag()
    z = norm_quantile(1.0 - (1.0 - level) / 2.0)
    intervals = {}
    for h in h_indices:
        k = pos[h]
        est = float(coef_sub[k])
        se = float(np.sqrt(max(sandwich[k, k], 0.0)) / s_sub[k])
        if se == 0.0:
            intervals[h] = InferenceResult(index=h, estimate=est,
                                           std_error=0.0, ci_lower=est,
                                           ci_upper=est, level=level,
                                           degenerate=True)
        else:
            intervals[h] = InferenceResult(index=h, estimate=est,
                                           std_error=se,
                                           ci_lower=est - z * se,
                                           ci_upper=est + z * se, level=level)

    tests = {}
    sel = np.array([pos[h] for h in h_indices], dtype=int)
    m_sub = sandwich[np.ix_(sel, sel)]
    for name, null in null_sets.items():
        null = tuple(float(v) for v in null)
        if len(null) != len(h_indices):
            raise ValueError("null vector length mismatch")
        diff = np.array([s_sub[pos[h]] * (coef_sub[pos[h]] - v)
                         for h, v in zip(h_indices, null)])
        try:
            chol_m = np.linalg.cholesky(m_sub)
        except np.linalg.LinAlgError as exc:
            raise NumericalError("baseline test covariance is not positive "
                                 "definite") from exc
        u = np.linalg.solve(chol_m, diff)
        stat = float(u @ u)
        tests[name] = WaldTest(statistic=stat, dof=len(h_indices),
                               p_value=chi2_sf(stat, len(h_indices)),
                               indices=h_indices, null_values=null)

    coef = np.zeros(p + n)
    coef[cols] = coef_sub[:cols.size]
    coef[p:] = coef_sub[cols.size:]
    return coef, intervals, tests
