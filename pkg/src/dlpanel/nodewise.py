"""Nodewise lasso rows of the approximate inverse of the scaled Gram matrix.

For a common-coefficient index j the nodewise regression solves

    phi_j = argmin (1/NT) ||z_j - Z_{-j} d||^2 + 2 lam_node ||d||_1

and sets tau_j^2 = (1/NT) ||z_j - Z_{-j} phi_j||^2 + lam_node ||phi_j||_1.
Row j of the approximate inverse Theta_Z has 1/tau_j^2 on the diagonal and
-phi_{j,k}/tau_j^2 elsewhere.  The fixed-effect block of the scaled Gram
matrix is exactly I_N, so the full approximate inverse is block diagonal
with an implicit identity lower block; only the requested Theta_Z rows are
ever formed.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .exceptions import NumericalError
from .model import DesignSystem
from .solver import _solve_gram, bic_path_gram


@dataclass
class NodewiseInverse:
    """Rows of Theta_Z for a set of common-coefficient indices."""

    p: int
    lam: float
    rows: dict[int, np.ndarray] = field(default_factory=dict)
    tau_sq: dict[int, float] = field(default_factory=dict)
    phi: dict[int, np.ndarray] = field(default_factory=dict)

    def row(self, j: int) -> np.ndarray:
        if j not in self.rows:
            raise KeyError(f"nodewise row {j} was not fitted "
                           f"(available: {sorted(self.rows)})")
        return self.rows[j]


def lambda_node_theoretical(n_units: int, p: int, m_const: float = 1.0) -> float:
    """Theoretical nodewise penalty sqrt(16 M (log p)^3 / N)."""
    return float(np.sqrt(16.0 * m_const * np.log(p) ** 3 / n_units))


def _row_quantities(zz: np.ndarray, j: int):
    """Gram pieces of the j-th nodewise problem from the full Z'Z."""
    idx = np.concatenate([np.arange(j), np.arange(j + 1, zz.shape[0])])
    G = np.ascontiguousarray(zz[np.ix_(idx, idx)])
    g0 = np.ascontiguousarray(zz[idx, j])
    yty = float(zz[j, j])
    return idx, G, g0, yty


def fit_nodewise(design: DesignSystem, target_rows, lambda_mode="bic", *,
                 m_const: float = 1.0, grid_size: int = 50,
                 grid_ratio: float | None = None, tol: float = 1e-8,
                 max_iter: int = 10_000) -> NodewiseInverse:
    """Fit nodewise regressions for the requested rows.

    Parameters
    ----------
    design : DesignSystem
    target_rows : iterable of int
        Common-coefficient indices (0 <= j < p) whose rows are needed.
    lambda_mode : {"bic", "theoretical"} or float
        "bic" selects one lambda per row by BIC and then shares the median
        across rows; "theoretical" evaluates the closed form; a float is
        used directly.

    Returns
    -------
    NodewiseInverse

    Raises
    ------
    NumericalError
        If some tau_j^2 is not strictly positive (degenerate fit).
    """
    rows = sorted(set(int(j) for j in target_rows))
    p = design.p
    for j in rows:
        if not 0 <= j < p:
            raise ValueError(f"nodewise rows must lie in [0, p); got {j}")
    if p < 2:
        raise ValueError("nodewise regression needs at least two Z columns")
    nt = float(design.n_obs)
    zz = design.Z.T @ design.Z
    scale = 1.0 / nt
    weights = np.ones(p - 1)

    if lambda_mode == "bic":
        per_row = []
        for j in rows:
            _, G, g0, yty = _row_quantities(zz, j)
            best, points = bic_path_gram(G, g0, yty, scale, weights,
                                         design.n_obs, grid_size=grid_size,
                                         grid_ratio=grid_ratio, tol=tol,
                                         max_iter=max_iter)
            per_row.append(points[best].lam)
        lam = float(np.median(per_row))
    elif lambda_mode == "theoretical":
        lam = lambda_node_theoretical(design.n_units, p, m_const)
    else:
        lam = float(lambda_mode)
        if lam < 0:
            raise ValueError("lambda must be non-negative")

    inv = NodewiseInverse(p=p, lam=lam)
    for j in rows:
        idx, G, g0, yty = _row_quantities(zz, j)
        fit = _solve_gram(G, g0, yty, scale, weights, lam, tol, max_iter)
        phi = fit.coefficients
        ssr = float(yty - 2.0 * phi @ g0 + phi @ (G @ phi))
        tau2 = max(ssr, 0.0) / nt + lam * float(np.abs(phi).sum())
        if tau2 <= 0.0:
            raise NumericalError(f"degenerate nodewise fit: tau^2 = {tau2} "
                                 f"for row {j}")
        row = np.zeros(p)
        row[j] = 1.0 / tau2
        row[idx] = -phi / tau2
        inv.rows[j] = row
        inv.tau_sq[j] = tau2
        inv.phi[j] = phi
    return inv


def approx_inverse_check(inv: NodewiseInverse, design: DesignSystem) -> dict:
    """Extended stationarity diagnostics for each fitted row.

    For row j returns d_j = (1/NT) z_j' Z theta_j - 1 (exactly zero in
    exact arithmetic), b_j = ||(1/NT) Z'Z theta_j - e_j||_inf, and the
    bound lam / tau_j^2 that b_j must not exceed.
    """
    nt = float(design.n_obs)
    zz = design.Z.T @ design.Z
    out = {}
    for j, theta in inv.rows.items():
        v = zz @ theta / nt
        d_j = float(v[j] - 1.0)
        e = v.copy()
        e[j] -= 1.0
        b_j = float(np.abs(e).max())
        out[j] = {"diag_gap": d_j, "kkt_sup": b_j,
                  "bound": inv.lam / inv.tau_sq[j]}
    return out
