"""Desparsified (debiased) coefficients from a penalised fit.

The one-step correction is gamma_tilde = gamma_hat +
S^{-1} Theta S^{-1} Pi'(y - Pi gamma_hat).  With the block-diagonal
approximate inverse this reduces to

    gamma_tilde_j   = alpha_hat_j + (1/NT) theta_j' Z' r      (j < p)
    gamma_tilde_p+i = eta_hat_i   + (1/T) sum_t r_{i,t}       (fixed effects)

where r is the penalised-fit residual.  Passing a dense (p+N, p+N) matrix
instead of a NodewiseInverse applies the same correction with explicit
Theta rows (with the exact inverse of the scaled Gram matrix this
reproduces full least squares on invertible designs).
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .model import DesignSystem, gram
from .nodewise import NodewiseInverse
from .solver import LassoFit


@dataclass
class DebiasedEstimate:
    """Debiased values for the requested coefficient indices."""

    values: dict[int, float]
    indices: tuple[int, ...]
    fit: LassoFit
    lam_node: float | None = None

    def __getitem__(self, h: int) -> float:
        return self.values[h]


def _theta_row(inv, h: int, p: int, n_units: int):
    """Row h of Theta as (z_part (p,), d_part (N,) or None meaning e_{h-p})."""
    if isinstance(inv, np.ndarray):
        if inv.shape != (p + n_units, p + n_units):
            raise ValueError("dense Theta must be (p+N, p+N)")
        return inv[h, :p], inv[h, p:]
    if h < p:
        return inv.row(h), None
    return None, None  # identity fixed-effect block


def desparsify(fit: LassoFit, design: DesignSystem, y: np.ndarray, inv,
               indices) -> DebiasedEstimate:
    """Debias the requested coordinates of a penalised panel fit.

    Parameters
    ----------
    fit : LassoFit
        Penalised fit on the panel design (coefficients of length p + N).
    design : DesignSystem
    y : ndarray
        Stacked response used for the fit.
    inv : NodewiseInverse or ndarray
        Approximate inverse rows, or a dense (p+N, p+N) matrix.
    indices : iterable of int
        Coordinates of gamma to debias (0-based; >= p are fixed effects).

    Returns
    -------
    DebiasedEstimate
    """
    indices = tuple(int(h) for h in indices)
    p, n, t = design.p, design.n_units, design.n_periods
    nt = float(n * t)
    for h in indices:
        if not 0 <= h < p + n:
            raise ValueError(f"index {h} outside [0, p+N)")
    r = y - design.matvec(fit.coefficients)
    # u = S^{-1} Pi' r, split into its Z and D parts
    uz = design.Z.T @ r / np.sqrt(nt)
    ud = design.unit_sums(r) / np.sqrt(t)
    s = design.s_diag()
    values = {}
    for h in indices:
        zrow, drow = _theta_row(inv, h, p, n)
        if zrow is None and drow is None:
            proj = ud[h - p]
        else:
            proj = zrow @ uz
            if drow is not None:
                proj += drow @ ud
        values[h] = float(fit.coefficients[h] + proj / s[h])
    lam_node = inv.lam if isinstance(inv, NodewiseInverse) else None
    return DebiasedEstimate(values=values, indices=indices, fit=fit,
                            lam_node=lam_node)


def delta_diagnostic(fit: LassoFit, design: DesignSystem, gamma_true: np.ndarray,
                     inv, indices) -> dict[int, float]:
    """Remainder Delta = (Theta Psi - I) S (gamma_hat - gamma) at the
    requested coordinates.

    This is the non-gaussian term in the decomposition
    S(gamma_tilde - gamma) = Theta S^{-1} Pi' eps - Delta and is the
    quantity that uniform validity drives to zero; it is exactly zero when
    Theta is the exact inverse of the scaled Gram matrix or when the
    penalised fit equals the truth.
    """
    indices = tuple(int(h) for h in indices)
    p, n = design.p, design.n_units
    s = design.s_diag()
    v = s * (fit.coefficients - np.asarray(gamma_true, dtype=np.float64))
    w = gram(design) @ v
    out = {}
    for h in indices:
        zrow, drow = _theta_row(inv, h, p, n)
        if zrow is None and drow is None:
            proj = w[p + (h - p)]
        else:
            proj = zrow @ w[:p]
            if drow is not None:
                proj += drow @ w[p:]
        out[h] = float(proj - v[h])
    return out
