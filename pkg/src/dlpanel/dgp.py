"""Simulator for the dynamic fixed-effects panel data-generating process.

Responses follow an AR(L) recursion with exogenous AR(1) covariates whose
innovations carry a Toeplitz rho^|k-l| correlation.  Fixed effects load on
the first observed covariate vector, so they are correlated with the
regressors.  Error variants: standard gaussian, multiplicative
heteroskedastic, and heteroskedastic with raw t(3) draws (plus an internal
noise-free variant for degenerate tests).  The recursion is warmed up with
a long burn-in and the pre-sample lags of the observed window are taken
from the burned-in trajectory.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from numba import njit

from .model import PanelData

ERROR_KINDS = ("gaussian", "hetero", "t3_hetero", "none")


@njit(cache=True, nogil=True)
def _ar1_recursion(innov, a):
    """Forward AR(1) filter over axis 1, started at zero.  In place."""
    n, steps, p = innov.shape
    for i in range(n):
        for t in range(1, steps):
            for k in range(p):
                innov[i, t, k] += a * innov[i, t - 1, k]
    return innov


@njit(cache=True, nogil=True)
def _y_recursion(drive, alpha):
    """y_t = sum_j alpha_j y_{t-j} + drive_t along axis 1, zero pre-sample."""
    n, steps = drive.shape
    L = alpha.size
    y = np.empty((n, steps))
    for i in range(n):
        for s in range(steps):
            acc = drive[i, s]
            top = L if L < s else s
            for lag in range(1, top + 1):
                acc += alpha[lag - 1] * y[i, s - lag]
            y[i, s] = acc
    return y


def check_stability(alpha) -> float:
    """Spectral radius of the AR companion matrix.

    The recursion y_t = sum_j alpha_j y_{t-j} is stable (the lag
    polynomial has all roots outside the unit disc) iff this is < 1.
    """
    alpha = np.atleast_1d(np.asarray(alpha, dtype=np.float64))
    L = alpha.size
    if L == 0:
        return 0.0
    comp = np.zeros((L, L))
    comp[0, :] = alpha
    if L > 1:
        comp[np.arange(1, L), np.arange(L - 1)] = 1.0
    return float(np.max(np.abs(np.linalg.eigvals(comp))))


def equidistant_beta(p_x: int, count: int) -> tuple[int, ...]:
    """0-based indices of ``count`` equally spaced covariate coefficients."""
    if count < 1 or count > p_x:
        raise ValueError("count must lie in [1, p_x]")
    gap = p_x // count
    if gap < 1:
        raise ValueError("p_x too small for the requested count")
    return tuple((k + 1) * gap - 1 for k in range(count))


def hetero_loading(rho_x: float, ar_x: float) -> float:
    """Loading b_x on the second covariate in the heteroskedastic error.

    Chosen so that the multiplicative error has unit unconditional
    variance under gaussian draws:
    b_x = (-sqrt(2) rho + sqrt(2 rho^2 + 2 - 4 a^2)) / 2.
    """
    disc = 2.0 * rho_x ** 2 + 2.0 - 4.0 * ar_x ** 2
    if disc < 0:
        raise ValueError("no real heteroskedastic loading for these parameters")
    return float((-np.sqrt(2.0) * rho_x + np.sqrt(disc)) / 2.0)


@dataclass
class DgpConfig:
    """Parameters of the simulated panel.

    beta_indices are 0-based positions within the covariate block; when
    None, ``beta_count`` equally spaced positions are used.  b_eta (the
    fixed-effect loading on the initial covariates) is redrawn each
    replication by default; set ``fix_b_eta`` to draw it once from the
    base seed and reuse it across replications.
    """

    n_units: int = 20
    n_periods: int = 10
    p_x: int = 100
    alpha_true: tuple[float, ...] = (0.9, 0.0, 0.0, -0.3)
    n_lags_fit: int = 5
    beta_indices: tuple[int, ...] | None = None
    beta_value: float = 1.0
    beta_count: int = 5
    ar_x: float = 0.5
    rho_x: float = 0.75
    error_kind: str = "gaussian"
    burn_in: int = 1000
    seed: int = 0
    fix_b_eta: bool = False

    def __post_init__(self):
        if self.n_units < 1 or self.n_periods < 1:
            raise ValueError("need at least one unit and one period")
        if self.p_x < 1:
            raise ValueError("p_x must be positive")
        if self.error_kind not in ERROR_KINDS:
            raise ValueError(f"error_kind must be one of {ERROR_KINDS}")
        if self.error_kind in ("hetero", "t3_hetero") and self.p_x < 2:
            raise ValueError("heteroskedastic errors need p_x >= 2")
        radius = check_stability(self.alpha_true)
        if radius >= 1.0 - 1e-8:
            raise ValueError(f"alpha_true is not stable: spectral radius {radius}")
        if abs(self.ar_x) >= 1.0:
            raise ValueError("ar_x must lie in (-1, 1)")
        if not -1.0 < self.rho_x < 1.0:
            raise ValueError("rho_x must lie in (-1, 1)")
        if self.n_lags_fit < len(self.alpha_true):
            raise ValueError("n_lags_fit must cover the true lag order")
        if self.burn_in < self.n_lags_fit:
            raise ValueError("burn_in must be at least n_lags_fit")
        if self.beta_indices is None:
            self.beta_indices = equidistant_beta(self.p_x, self.beta_count)
        self.beta_indices = tuple(int(j) for j in self.beta_indices)
        for j in self.beta_indices:
            if not 0 <= j < self.p_x:
                raise ValueError(f"beta index {j} outside [0, p_x)")

    @property
    def p(self) -> int:
        return self.n_lags_fit + self.p_x

    def beta_vector(self) -> np.ndarray:
        beta = np.zeros(self.p_x)
        beta[list(self.beta_indices)] = self.beta_value
        return beta


def replication_rng(seed: int, replication: int) -> np.random.Generator:
    """Counter-based generator for one replication (key = seed XOR index)."""
    key = (int(seed) ^ int(replication)) & 0xFFFFFFFFFFFFFFFF
    return np.random.Generator(np.random.Philox(key=key))


def _toeplitz_chol(p_x: int, rho: float) -> np.ndarray:
    idx = np.arange(p_x)
    cov = rho ** np.abs(idx[:, None] - idx[None, :])
    return np.linalg.cholesky(cov)


def _x_path(config: DgpConfig, rng: np.random.Generator, steps: int) -> np.ndarray:
    """AR(1) covariate paths, (N, steps, p_x), started at zero."""
    n, p_x = config.n_units, config.p_x
    chol = _toeplitz_chol(p_x, config.rho_x)
    if config.error_kind == "t3_hetero":
        draws = rng.standard_t(3, size=(n, steps, p_x))
    else:
        draws = rng.standard_normal(size=(n, steps, p_x))
    innov = draws @ chol.T
    return _ar1_recursion(innov, config.ar_x)


def simulate_x(config: DgpConfig, rng: np.random.Generator) -> np.ndarray:
    """Observed-window covariates (N, T, p_x); the burn-in is discarded."""
    steps = config.burn_in + config.n_periods
    return _x_path(config, rng, steps)[:, config.burn_in:, :]


def _draw_b_eta(config: DgpConfig, rng: np.random.Generator) -> np.ndarray:
    """Standard-normal loading vector normalised to unit l1 norm."""
    b = rng.standard_normal(config.p_x)
    l1 = np.abs(b).sum()
    if l1 == 0.0:
        b[0] = 1.0
        l1 = 1.0
    return b / l1


def simulate_panel(config: DgpConfig,
                   rng: np.random.Generator | None = None) -> PanelData:
    """Simulate one panel.

    Draw order (fixed for reproducibility): the fixed-effect loading
    b_eta, then the covariate innovations, then the error draws u.  With
    ``fix_b_eta`` the loading comes from a dedicated stream keyed by the
    base seed, so it is identical across replications.

    Returns
    -------
    PanelData
        With ``gamma_true`` (length n_lags_fit + p_x + N) and ``meta``
        (b_eta, b_x, seed) attached.
    """
    if rng is None:
        rng = replication_rng(config.seed, 0)
    n, t, p_x = config.n_units, config.n_periods, config.p_x
    L_true = len(config.alpha_true)
    L_fit = config.n_lags_fit
    steps = config.burn_in + t

    if config.fix_b_eta:
        b_eta = _draw_b_eta(config, np.random.Generator(
            np.random.Philox(key=int(config.seed) & 0xFFFFFFFFFFFFFFFF)))
    else:
        b_eta = _draw_b_eta(config, rng)
    x = _x_path(config, rng, steps)
    if config.error_kind == "t3_hetero":
        u = rng.standard_t(3, size=(n, steps))
    elif config.error_kind == "none":
        u = np.zeros((n, steps))
    else:
        u = rng.standard_normal(size=(n, steps))

    b_x = 0.0
    if config.error_kind in ("hetero", "t3_hetero"):
        b_x = hetero_loading(config.rho_x, config.ar_x)
        eps = u * (x[:, :, 0] / np.sqrt(2.0) + b_x * x[:, :, 1])
    else:
        eps = u

    beta = config.beta_vector()
    denom = np.sqrt(np.log(p_x)) if p_x >= 2 else 1.0
    eta = x[:, config.burn_in, :] @ b_eta / denom
    xb = x @ beta

    alpha = np.asarray(config.alpha_true, dtype=np.float64)
    y = _y_recursion(xb + eta[:, None] + eps, alpha)

    y_obs = y[:, config.burn_in:]
    # column k of y_init is the burned-in value at period -k
    y_init = y[:, config.burn_in - L_fit: config.burn_in][:, ::-1].copy()
    x_obs = x[:, config.burn_in:, :]

    gamma_true = np.concatenate([
        alpha, np.zeros(L_fit - L_true), beta, eta])
    meta = {"b_eta": b_eta, "b_x": b_x, "seed": config.seed}
    return PanelData(y=y_obs, x=x_obs, y_init=y_init,
                     gamma_true=gamma_true, meta=meta)
