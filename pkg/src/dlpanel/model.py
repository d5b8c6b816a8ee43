"""Panel data containers and stacked regressor construction.

The estimation problem is posed on a balanced panel with N units observed
over T periods.  Stacking observations unit-major (unit 1 periods 1..T,
then unit 2, ...) the model

    y_{i,t} = sum_l alpha_l y_{i,t-l} + x_{i,t}' beta + eta_i + eps_{i,t}

becomes y = Pi gamma + eps with Pi = (Z, D), where Z holds the lagged
responses and covariates and D = I_N kron iota_T carries the unit fixed
effects.  D is never materialised densely; its action is represented by
per-unit sums and repeats.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass
class PanelData:
    """A balanced panel with pre-sample lag values.

    Parameters
    ----------
    y : ndarray, shape (N, T)
        Observed responses for periods 1..T.
    x : ndarray, shape (N, T, p_x)
        Exogenous covariates for periods 1..T.
    y_init : ndarray, shape (N, L0)
        Pre-sample responses; column k holds y at period -k, so column 0
        is period 0, column 1 is period -1, and so on.
    gamma_true : ndarray, optional
        True coefficient vector (lags, covariates, fixed effects) when the
        panel was simulated.
    meta : dict, optional
        Simulation metadata (weight vectors, seed, ...).
    """

    y: np.ndarray
    x: np.ndarray
    y_init: np.ndarray
    gamma_true: np.ndarray | None = None
    meta: dict | None = None

    def __post_init__(self):
        self.y = np.asarray(self.y, dtype=np.float64)
        self.x = np.asarray(self.x, dtype=np.float64)
        self.y_init = np.asarray(self.y_init, dtype=np.float64)
        if self.y.ndim != 2:
            raise ValueError("y must be (N, T)")
        n, t = self.y.shape
        if n < 1 or t < 1:
            raise ValueError("panel needs at least one unit and one period")
        if self.x.ndim != 3 or self.x.shape[:2] != (n, t):
            raise ValueError("x must be (N, T, p_x) matching y")
        if self.y_init.ndim != 2 or self.y_init.shape[0] != n:
            raise ValueError("y_init must be (N, L0)")
        for name, arr in (("y", self.y), ("x", self.x), ("y_init", self.y_init)):
            if not np.all(np.isfinite(arr)):
                raise ValueError(f"{name} contains non-finite values")

    @property
    def n_units(self) -> int:
        return self.y.shape[0]

    @property
    def n_periods(self) -> int:
        return self.y.shape[1]

    @property
    def p_x(self) -> int:
        return self.x.shape[2]

    @property
    def n_init_lags(self) -> int:
        return self.y_init.shape[1]


@dataclass
class DesignSystem:
    """Stacked regressors for the fixed-effects dynamic panel model.

    Z is dense with p = n_lags + p_x columns; the fixed-effect block D is
    kept structural (one indicator per unit, constant within unit).  The
    scaling vector S has sqrt(N*T) on the p common coordinates and sqrt(T)
    on the N fixed-effect coordinates.
    """

    Z: np.ndarray
    n_units: int
    n_periods: int
    n_lags: int
    p_x: int

    def __post_init__(self):
        nt = self.n_units * self.n_periods
        if self.Z.shape != (nt, self.n_lags + self.p_x):
            raise ValueError("Z must be (N*T, n_lags + p_x)")

    @property
    def p(self) -> int:
        return self.n_lags + self.p_x

    @property
    def n_obs(self) -> int:
        return self.n_units * self.n_periods

    @property
    def n_coef(self) -> int:
        return self.p + self.n_units

    def s_diag(self) -> np.ndarray:
        """Diagonal of the scaling matrix S as a (p + N,) vector."""
        nt = float(self.n_obs)
        s = np.empty(self.n_coef)
        s[: self.p] = np.sqrt(nt)
        s[self.p:] = np.sqrt(float(self.n_periods))
        return s

    def unit_sums(self, v: np.ndarray) -> np.ndarray:
        """D'v: per-unit sums of a stacked (N*T,) vector."""
        return v.reshape(self.n_units, self.n_periods).sum(axis=1)

    def expand_units(self, u: np.ndarray) -> np.ndarray:
        """D u: repeat a per-unit (N,) vector across periods."""
        return np.repeat(u, self.n_periods)

    def matvec(self, gamma: np.ndarray) -> np.ndarray:
        """Pi gamma for a full coefficient vector (p + N,)."""
        if gamma.shape != (self.n_coef,):
            raise ValueError("gamma must have length p + N")
        return self.Z @ gamma[: self.p] + self.expand_units(gamma[self.p:])


def build_design(panel: PanelData, n_lags: int | None = None) -> DesignSystem:
    """Assemble the stacked design from a panel.

    Parameters
    ----------
    panel : PanelData
    n_lags : int, optional
        Number of response lags to include.  Defaults to the number of
        pre-sample columns available in ``panel.y_init``.

    Returns
    -------
    DesignSystem
        Row (i, t) of Z is (y_{i,t-1}, ..., y_{i,t-L}, x_{i,t}') with rows
        stacked unit-major.
    """
    if n_lags is None:
        n_lags = panel.n_init_lags
    if n_lags < 0:
        raise ValueError("n_lags must be non-negative")
    if n_lags > panel.n_init_lags:
        raise ValueError(
            f"need {n_lags} pre-sample lags but y_init provides {panel.n_init_lags}"
        )
    n, t = panel.n_units, panel.n_periods
    # extended series: column j holds y at period j - L, j = 0..L+T-1
    y_ext = np.concatenate([panel.y_init[:, ::-1][:, panel.n_init_lags - n_lags:],
                            panel.y], axis=1)
    lag_block = np.empty((n, t, n_lags))
    for lag in range(1, n_lags + 1):
        # y_{i,t-lag} for t = 1..T lives at extended columns L-lag .. L-lag+T-1
        lag_block[:, :, lag - 1] = y_ext[:, n_lags - lag: n_lags - lag + t]
    z = np.concatenate([lag_block.reshape(n * t, n_lags),
                        panel.x.reshape(n * t, panel.p_x)], axis=1)
    return DesignSystem(Z=z, n_units=n, n_periods=t, n_lags=n_lags, p_x=panel.p_x)


def response_vector(panel: PanelData) -> np.ndarray:
    """Stacked response (N*T,) in unit-major order."""
    return panel.y.reshape(-1).copy()


def gram(design: DesignSystem) -> np.ndarray:
    """Scaled Gram matrix Psi = S^{-1} Pi' Pi S^{-1}, dense (p+N, p+N).

    The lower-right fixed-effect block is exactly I_N; the off-diagonal
    block is Z'D / (T sqrt(N)).
    """
    n, t, p = design.n_units, design.n_periods, design.p
    nt = float(n * t)
    zz = design.Z.T @ design.Z
    zd = design.Z.reshape(n, t, p).sum(axis=1).T  # (p, N), column i = sum_t z_{i,t}
    g = np.empty((p + n, p + n))
    g[:p, :p] = zz / nt
    g[:p, p:] = zd / (t * np.sqrt(n))
    g[p:, :p] = g[:p, p:].T
    g[p:, p:] = np.eye(n)
    return g
