"""Heteroskedasticity-robust covariance blocks for the scaled estimator.

With penalised-fit residuals eps_hat the covariance of S^{-1} Pi' eps is
estimated blockwise:

    Sigma1 = (1/NT)  sum_{i,t} eps_hat^2 z z'        (p x p)
    Sigma2[:, i] = (1/(sqrt(N) T)) sum_t eps_hat^2_{i,t} z_{i,t}   (p x N)
    Sigma3 = diag( (1/T) sum_t eps_hat^2_{i,t} )      (N,)

No homoskedasticity or time-constancy is imposed.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .model import DesignSystem
from .nodewise import NodewiseInverse
from .solver import LassoFit


@dataclass
class RobustCovariance:
    """Blocks of the robust covariance estimate plus panel dimensions."""

    sigma1: np.ndarray
    sigma2: np.ndarray
    sigma3_diag: np.ndarray
    n_units: int
    n_periods: int

    @property
    def p(self) -> int:
        return self.sigma1.shape[0]

    def dense(self) -> np.ndarray:
        """Assembled (p+N, p+N) covariance matrix (testing/baseline use)."""
        p, n = self.p, self.n_units
        out = np.empty((p + n, p + n))
        out[:p, :p] = self.sigma1
        out[:p, p:] = self.sigma2
        out[p:, :p] = self.sigma2.T
        out[p:, p:] = np.diag(self.sigma3_diag)
        return out


def residuals(fit: LassoFit, design: DesignSystem, y: np.ndarray) -> np.ndarray:
    """Stacked residuals y - Pi gamma_hat of a penalised fit."""
    return y - design.matvec(fit.coefficients)


def sigma_blocks(design: DesignSystem, resid: np.ndarray) -> RobustCovariance:
    """Assemble the robust covariance blocks from residuals."""
    n, t, p = design.n_units, design.n_periods, design.p
    nt = float(n * t)
    if resid.shape != (n * t,):
        raise ValueError("residuals must be a stacked (N*T,) vector")
    e2 = resid ** 2
    zw = design.Z * e2[:, None]
    sigma1 = zw.T @ design.Z / nt
    unit_sums = zw.reshape(n, t, p).sum(axis=1)  # (N, p), row i = sum_t e2 z
    sigma2 = unit_sums.T / (np.sqrt(n) * t)
    sigma3 = e2.reshape(n, t).sum(axis=1) / t
    return RobustCovariance(sigma1=sigma1, sigma2=sigma2, sigma3_diag=sigma3,
                            n_units=n, n_periods=t)


def _quadform(rho: np.ndarray, inv, cov: RobustCovariance) -> float:
    """rho' Theta Sigma Theta' rho for a sparse rho over p+N coordinates.

    Theta is block diagonal: nodewise rows on the common block, identity
    on the fixed-effect block.
    """
    p, n = cov.p, cov.n_units
    rho1 = rho[:p]
    rho2 = rho[p:]
    support1 = np.flatnonzero(rho1)
    a = np.zeros(p)
    for j in support1:
        if isinstance(inv, NodewiseInverse):
            a += rho1[j] * inv.row(j)
        else:
            raise TypeError("inv must be a NodewiseInverse")
    val = float(a @ cov.sigma1 @ a)
    if np.any(rho2):
        val += 2.0 * float(a @ cov.sigma2 @ rho2)
        val += float(rho2 @ (cov.sigma3_diag * rho2))
    return val


def asy_variance(rho: np.ndarray, inv: NodewiseInverse,
                 cov: RobustCovariance) -> float:
    """Asymptotic variance of a unit-norm contrast of the scaled estimator.

    Parameters
    ----------
    rho : ndarray, shape (p + N,)
        Sparse contrast vector; must have unit Euclidean norm (1e-8).
    inv : NodewiseInverse
        Must contain rows for every common-coefficient index in the
        support of rho.
    cov : RobustCovariance

    Returns
    -------
    float
        rho1' Theta_Z Sigma1 Theta_Z' rho1 + 2 rho1' Theta_Z Sigma2 rho2
        + rho2' Sigma3 rho2.
    """
    rho = np.asarray(rho, dtype=np.float64)
    if rho.shape != (cov.p + cov.n_units,):
        raise ValueError("rho must have length p + N")
    nrm = float(np.linalg.norm(rho))
    if abs(nrm - 1.0) > 1e-8:
        raise ValueError(f"rho must have unit norm; got {nrm}")
    return _quadform(rho, inv, cov)
