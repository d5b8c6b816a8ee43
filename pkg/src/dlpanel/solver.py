"""Weighted lasso solver via cyclic coordinate descent on the Gram system.

The generic objective is

    L(b) = c * ||y - X b||^2 + 2 * lam * sum_k w_k |b_k|

which covers both the panel problem (c = 1, unit weights on the common
coefficients, 1/sqrt(N) on the fixed effects) and the nodewise problems
(c = 1/(N*T), unit weights).  All updates run on the precomputed Gram
matrix G = X'X and right-hand side g0 = X'y, so the fixed-effect block is
handled through its analytic D'D = T*I_N block and per-unit sums of Z,
never through a dense indicator matrix.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from numba import njit

from .model import DesignSystem


@njit(cache=True, nogil=True)
def _sweep(G, g0, scale, weights, lam, beta, q):
    """One cyclic pass; maintains q = G @ beta.  Returns (max_delta, max_abs)."""
    m = G.shape[0]
    max_delta = 0.0
    max_abs = 0.0
    for k in range(m):
        gkk = G[k, k]
        if gkk <= 0.0:
            continue  # zero-variance column: coefficient pinned at its start
        bk = beta[k]
        rho = g0[k] - q[k] + gkk * bk
        thr = lam * weights[k] / scale
        if rho > thr:
            bnew = (rho - thr) / gkk
        elif rho < -thr:
            bnew = (rho + thr) / gkk
        else:
            bnew = 0.0
        d = bnew - bk
        if d != 0.0:
            beta[k] = bnew
            for j in range(m):
                q[j] += G[k, j] * d
        if abs(d) > max_delta:
            max_delta = abs(d)
        if abs(bnew) > max_abs:
            max_abs = abs(bnew)
    return max_delta, max_abs


@njit(cache=True, nogil=True)
def _objective_from_q(G, g0, yty, scale, weights, lam, beta, q):
    pen = 0.0
    bg0 = 0.0
    bgb = 0.0
    for k in range(G.shape[0]):
        pen += weights[k] * abs(beta[k])
        bg0 += beta[k] * g0[k]
        bgb += beta[k] * q[k]
    return scale * (yty - 2.0 * bg0 + bgb) + 2.0 * lam * pen


@njit(cache=True, nogil=True)
def _try_exact_active(Ga, g0a, wa, scale, lam, yty, ba, qa):
    """Fixed-sign stationarity solve on the currently nonzero coordinates.

    With the signs of the nonzero entries of ``ba`` held fixed (zeros stay
    zero), the stationarity conditions are the linear system
    G_nz b = g0_nz - (lam/scale) (w * sign)_nz.  Solve it by an unpivoted
    Cholesky; accept only when every sign is preserved and the penalized
    objective does not increase, so a near-singular solve can never make
    things worse.  Updates ba, qa in place on success.
    """
    na = ba.size
    nz = np.empty(na, dtype=np.int64)
    k = 0
    for a in range(na):
        if ba[a] != 0.0:
            nz[k] = a
            k += 1
    if k == 0:
        return False
    nz = nz[:k]
    Gn = np.empty((k, k))
    rhs = np.empty(k)
    for a in range(k):
        ia = nz[a]
        s = 1.0 if ba[ia] > 0.0 else -1.0
        rhs[a] = g0a[ia] - (lam / scale) * wa[ia] * s
        for b in range(k):
            Gn[a, b] = Ga[ia, nz[b]]
    L = np.zeros((k, k))
    for a in range(k):
        d = Gn[a, a]
        for c in range(a):
            d -= L[a, c] * L[a, c]
        if d <= 0.0:
            return False
        L[a, a] = np.sqrt(d)
        for b in range(a + 1, k):
            v = Gn[b, a]
            for c in range(a):
                v -= L[b, c] * L[a, c]
            L[b, a] = v / L[a, a]
    # forward then back substitution
    z = np.empty(k)
    for a in range(k):
        v = rhs[a]
        for c in range(a):
            v -= L[a, c] * z[c]
        z[a] = v / L[a, a]
    b_nz = np.empty(k)
    for a in range(k - 1, -1, -1):
        v = z[a]
        for c in range(a + 1, k):
            v -= L[c, a] * b_nz[c]
        b_nz[a] = v / L[a, a]
    for a in range(k):
        if ba[nz[a]] > 0.0:
            if b_nz[a] <= 0.0:
                return False
        elif b_nz[a] >= 0.0:
            return False
    b_try = np.zeros(na)
    for a in range(k):
        b_try[nz[a]] = b_nz[a]
    q_try = Ga.dot(b_try)
    cur = _objective_from_q(Ga, g0a, yty, scale, wa, lam, ba, qa)
    new = _objective_from_q(Ga, g0a, yty, scale, wa, lam, b_try, q_try)
    if new > cur:
        return False
    for a in range(na):
        ba[a] = b_try[a]
        qa[a] = q_try[a]
    return True


@njit(cache=True, nogil=True)
def _cd_gram(G, g0, yty, scale, weights, lam, beta, tol, max_iter):
    """Coordinate descent with active-set inner stages.  Mutates ``beta``.

    Alternates full cyclic sweeps with sweeps restricted to the current
    active set (on a gathered contiguous subproblem); convergence is
    declared only after a full sweep is quiet and the stationarity
    violations, recomputed from a fresh q, are within tol*(1 + lam).

    Returns (sweeps, converged, kkt_max, objective_history).
    """
    m = G.shape[0]
    q = G.dot(beta)
    obj_hist = np.empty(max_iter, dtype=np.float64)
    converged = False
    kkt_max = np.inf
    sweeps = 0
    while sweeps < max_iter:
        max_delta, max_abs = _sweep(G, g0, scale, weights, lam, beta, q)
        obj_hist[sweeps] = _objective_from_q(G, g0, yty, scale, weights, lam,
                                             beta, q)
        sweeps += 1
        if max_delta <= tol * (1.0 + max_abs):
            # refresh q against accumulated drift, then test stationarity
            for j in range(m):
                s = 0.0
                for k2 in range(m):
                    s += G[j, k2] * beta[k2]
                q[j] = s
            kkt_max = 0.0
            for k in range(m):
                grad = g0[k] - q[k]  # col_k' residual
                if beta[k] != 0.0:
                    sgn = 1.0 if beta[k] > 0.0 else -1.0
                    v = abs(-2.0 * scale * grad + 2.0 * lam * weights[k] * sgn)
                else:
                    v = scale * abs(grad) - lam * weights[k]
                    if v < 0.0:
                        v = 0.0
                if v > kkt_max:
                    kkt_max = v
            if kkt_max <= tol * (1.0 + lam):
                converged = True
                break
            continue
        na = 0
        for k in range(m):
            if beta[k] != 0.0:
                na += 1
        if na == 0 or na == m or sweeps >= max_iter:
            continue
        # gather the active subproblem into contiguous storage
        active = np.empty(na, dtype=np.int64)
        pos = 0
        for k in range(m):
            if beta[k] != 0.0:
                active[pos] = k
                pos += 1
        Ga = np.empty((na, na))
        g0a = np.empty(na)
        wa = np.empty(na)
        ba = np.empty(na)
        for a in range(na):
            ka = active[a]
            g0a[a] = g0[ka]
            wa[a] = weights[ka]
            ba[a] = beta[ka]
            for b in range(na):
                Ga[a, b] = G[ka, active[b]]
        qa = Ga.dot(ba)
        if _try_exact_active(Ga, g0a, wa, scale, lam, yty, ba, qa):
            obj_hist[sweeps] = _objective_from_q(Ga, g0a, yty, scale, wa, lam,
                                                 ba, qa)
            sweeps += 1
        else:
            # retry the exact solve periodically: signs typically settle
            # long before magnitudes do, and one accepted solve finishes
            # the stage
            attempt_gap = 10 if na < 40 else na // 4
            since_attempt = 0
            while sweeps < max_iter:
                mda, maa = _sweep(Ga, g0a, scale, wa, lam, ba, qa)
                obj_hist[sweeps] = _objective_from_q(Ga, g0a, yty, scale, wa,
                                                     lam, ba, qa)
                sweeps += 1
                since_attempt += 1
                quiet = mda <= tol * (1.0 + maa)
                if (quiet or since_attempt >= attempt_gap) and sweeps < max_iter:
                    since_attempt = 0
                    if _try_exact_active(Ga, g0a, wa, scale, lam, yty,
                                         ba, qa):
                        obj_hist[sweeps] = _objective_from_q(
                            Ga, g0a, yty, scale, wa, lam, ba, qa)
                        sweeps += 1
                        break
                if quiet:
                    break
        for a in range(na):
            beta[active[a]] = ba[a]
        for j in range(m):
            s = 0.0
            for a in range(na):
                s += G[j, active[a]] * ba[a]
            q[j] = s
    return sweeps, converged, kkt_max, obj_hist[:sweeps].copy()


class StackedRegressors:
    """Column-access view of a regressor matrix X = (Z[, D]).

    The dense part Z is stored as given; when ``n_units``/``n_periods`` are
    set, N structural indicator columns (one per unit, rows unit-major)
    are appended analytically.
    """

    def __init__(self, Z: np.ndarray, n_units: int | None = None,
                 n_periods: int | None = None):
        self.Z = np.ascontiguousarray(Z, dtype=np.float64)
        self.n_units = n_units
        self.n_periods = n_periods
        if (n_units is None) != (n_periods is None):
            raise ValueError("n_units and n_periods must be given together")
        if n_units is not None and Z.shape[0] != n_units * n_periods:
            raise ValueError("Z row count must equal n_units * n_periods")

    @classmethod
    def from_design(cls, design: DesignSystem) -> "StackedRegressors":
        return cls(design.Z, design.n_units, design.n_periods)

    @property
    def has_units(self) -> bool:
        return self.n_units is not None

    @property
    def n_cols(self) -> int:
        p = self.Z.shape[1]
        return p + self.n_units if self.has_units else p

    def gram(self) -> np.ndarray:
        """X'X with the fixed-effect block assembled analytically."""
        p = self.Z.shape[1]
        zz = self.Z.T @ self.Z
        if not self.has_units:
            return zz
        n, t = self.n_units, self.n_periods
        zd = self.Z.reshape(n, t, p).sum(axis=1).T
        g = np.empty((p + n, p + n))
        g[:p, :p] = zz
        g[:p, p:] = zd
        g[p:, :p] = zd.T
        g[p:, p:] = t * np.eye(n)
        return g

    def rhs(self, v: np.ndarray) -> np.ndarray:
        """X'v for a stacked (n,) vector."""
        out = self.Z.T @ v
        if self.has_units:
            unit = v.reshape(self.n_units, self.n_periods).sum(axis=1)
            out = np.concatenate([out, unit])
        return out

    def matvec(self, b: np.ndarray) -> np.ndarray:
        p = self.Z.shape[1]
        out = self.Z @ b[:p]
        if self.has_units:
            out = out + np.repeat(b[p:], self.n_periods)
        return out


@dataclass
class WeightedLassoProblem:
    """One instance of the weighted lasso objective.

    Fields
    ------
    response : (n,) stacked response vector.
    regressors : StackedRegressors (or any object with gram/rhs/matvec/n_cols).
    objective_scale : the constant c multiplying the squared loss.
    penalty_weights : (m,) non-negative per-coefficient weights w_k.
    lam : penalty level lambda >= 0.
    """

    response: np.ndarray
    regressors: StackedRegressors
    objective_scale: float
    penalty_weights: np.ndarray
    lam: float

    def __post_init__(self):
        self.response = np.asarray(self.response, dtype=np.float64)
        self.penalty_weights = np.asarray(self.penalty_weights, dtype=np.float64)
        if self.response.ndim != 1:
            raise ValueError("response must be a vector")
        if self.penalty_weights.shape != (self.regressors.n_cols,):
            raise ValueError("penalty_weights must have one entry per column")
        if np.any(self.penalty_weights < 0):
            raise ValueError("penalty_weights must be non-negative")
        if self.lam < 0:
            raise ValueError("lam must be non-negative")
        if self.objective_scale <= 0:
            raise ValueError("objective_scale must be positive")


@dataclass
class LassoFit:
    """Solution of one weighted lasso problem."""

    coefficients: np.ndarray
    lam: float
    active_set: np.ndarray
    objective_value: float
    iterations: int
    converged: bool
    kkt_max: float = field(default=np.nan)
    objective_history: np.ndarray | None = field(default=None, repr=False)


def _solve_gram(G, g0, yty, scale, weights, lam, tol, max_iter, warm=None):
    """Low-level solve on precomputed Gram quantities.  Returns a LassoFit."""
    m = G.shape[0]
    beta = np.zeros(m) if warm is None else np.array(warm, dtype=np.float64)
    diag = np.diagonal(G)
    if np.any((diag <= 0) & (weights == 0)):
        raise ValueError("zero-variance column with zero penalty weight is degenerate")
    sweeps, converged, kkt_max, hist = _cd_gram(
        np.ascontiguousarray(G, dtype=np.float64),
        np.ascontiguousarray(g0, dtype=np.float64),
        float(yty), float(scale),
        np.ascontiguousarray(weights, dtype=np.float64),
        float(lam), beta, float(tol), int(max_iter),
    )
    active = np.flatnonzero(beta)
    obj = hist[-1] if sweeps else float(
        scale * yty + 2.0 * lam * np.sum(weights * np.abs(beta)))
    return LassoFit(coefficients=beta, lam=float(lam), active_set=active,
                    objective_value=float(obj), iterations=int(sweeps),
                    converged=bool(converged), kkt_max=float(kkt_max),
                    objective_history=hist)


def solve_weighted_lasso(problem: WeightedLassoProblem, tol: float = 1e-8,
                         max_iter: int = 10_000,
                         warm_start: np.ndarray | None = None) -> LassoFit:
    """Solve a weighted lasso problem by cyclic coordinate descent.

    Parameters
    ----------
    problem : WeightedLassoProblem
    tol : float
        Convergence tolerance; the fit stops once the largest coefficient
        change in a sweep is below tol*(1 + max|coef|) and the KKT
        violations are below tol*(1 + lam).
    max_iter : int
        Maximum number of full sweeps.
    warm_start : ndarray, optional
        Initial coefficients.

    Returns
    -------
    LassoFit
        ``converged`` is False when max_iter was exhausted first.
    """
    X = problem.regressors
    G = X.gram()
    g0 = X.rhs(problem.response)
    yty = float(problem.response @ problem.response)
    return _solve_gram(G, g0, yty, problem.objective_scale,
                       problem.penalty_weights, problem.lam, tol, max_iter,
                       warm=warm_start)


def objective_value(problem: WeightedLassoProblem, coef: np.ndarray) -> float:
    """Evaluate the weighted lasso objective at an arbitrary coefficient vector."""
    r = problem.response - problem.regressors.matvec(coef)
    pen = np.sum(problem.penalty_weights * np.abs(coef))
    return float(problem.objective_scale * (r @ r) + 2.0 * problem.lam * pen)


def kkt_report(problem: WeightedLassoProblem, fit: LassoFit):
    """Stationarity check of a fit against its problem.

    Recomputes residual correlations from scratch.  For an active
    coordinate the violation is |(-2c) col_k'r + 2 lam w_k sign(b_k)|; for
    an inactive one it is max(0, c |col_k'r| - lam w_k).

    Returns
    -------
    (violations, max_violation) : (ndarray, float)
    """
    c = problem.objective_scale
    lam = problem.lam
    w = problem.penalty_weights
    b = fit.coefficients
    r = problem.response - problem.regressors.matvec(b)
    cr = problem.regressors.rhs(r)
    viol = np.empty_like(b)
    active = b != 0
    viol[active] = np.abs(-2.0 * c * cr[active]
                          + 2.0 * lam * w[active] * np.sign(b[active]))
    viol[~active] = np.maximum(0.0, c * np.abs(cr[~active]) - lam * w[~active])
    return viol, float(viol.max()) if viol.size else 0.0


# -- penalty level selection -------------------------------------------------

def lambda_theoretical(n_units: int, n_periods: int, p: int,
                       m_const: float = 1.0) -> float:
    """Theoretical panel penalty sqrt(4 M N T (log max(p, N))^3)."""
    logterm = np.log(max(p, n_units))
    return float(np.sqrt(4.0 * m_const * n_units * n_periods * logterm ** 3))


def lambda_max_gram(g0: np.ndarray, weights: np.ndarray, scale: float) -> float:
    """Smallest lambda for which the all-zero vector solves the problem."""
    pos = weights > 0
    if not np.any(pos):
        raise ValueError("no penalised coordinates")
    return float(np.max(scale * np.abs(g0[pos]) / weights[pos]))


@dataclass
class PathPoint:
    """One fit along a lambda grid."""

    lam: float
    coefficients: np.ndarray
    df: int
    ssr: float
    bic: float
    converged: bool
    iterations: int = 0


def bic_path_gram(G, g0, yty, scale, weights, n_obs, grid_size: int = 50,
                  grid_ratio: float | None = None, tol: float = 1e-8,
                  max_iter: int = 10_000):
    """Warm-started lambda path with BIC scoring on Gram quantities.

    BIC(lam) = n log(SSR/n) + df log(n) with df the active-set size.
    The grid is geometric from lambda_max downward; by default 50 points
    ending at 1e-3 * lambda_max.  Ties are broken toward the largest
    lambda.

    When the column count exceeds the sample size, the small-lambda end
    of the grid approaches an interpolating fit whose SSR -> 0 drives the
    BIC to -inf, which is outside the criterion's regime of validity.  The
    minimisation is therefore restricted to fits with df <= n/2; every
    grid point is still fitted and reported in the path.

    Returns
    -------
    (best_index, points) : (int, list[PathPoint])
    """
    lam_max = lambda_max_gram(g0, weights, scale)
    if not np.isfinite(lam_max) or lam_max <= 0.0:
        raise ValueError("degenerate penalty selection: lambda_max is zero "
                         "(response has no correlation with any column)")
    if grid_ratio is None:
        grid_ratio = (1e-3) ** (1.0 / (grid_size - 1)) if grid_size > 1 else 1.0
    if not (0.0 < grid_ratio < 1.0) and grid_size > 1:
        raise ValueError("grid_ratio must lie in (0, 1)")
    lams = lam_max * grid_ratio ** np.arange(grid_size)
    n = float(n_obs)
    points = []
    beta = np.zeros(G.shape[0])
    best = 0
    best_bic = np.inf
    for idx, lam in enumerate(lams):
        fit = _solve_gram(G, g0, yty, scale, weights, lam, tol, max_iter,
                          warm=beta)
        beta = fit.coefficients
        ssr = float(yty - 2.0 * beta @ g0 + beta @ (G @ beta))
        ssr = max(ssr, 0.0)
        df = int(fit.active_set.size)
        bic = n * np.log(max(ssr, 1e-300) / n) + df * np.log(n)
        points.append(PathPoint(lam=float(lam), coefficients=beta.copy(),
                                df=df, ssr=ssr, bic=float(bic),
                                converged=fit.converged,
                                iterations=fit.iterations))
        if df <= n_obs // 2 and bic < best_bic:
            # strict: ties keep the earlier (larger) lambda
            best_bic = bic
            best = idx
    return best, points


def panel_problem(design: DesignSystem, y: np.ndarray, lam: float) -> WeightedLassoProblem:
    """The fixed-effects panel lasso: unit weights on the p common
    coefficients, 1/sqrt(N) on the N fixed effects, objective scale 1."""
    w = np.ones(design.n_coef)
    w[design.p:] = 1.0 / np.sqrt(design.n_units)
    return WeightedLassoProblem(response=y,
                                regressors=StackedRegressors.from_design(design),
                                objective_scale=1.0, penalty_weights=w, lam=lam)


def select_lambda(design: DesignSystem, y: np.ndarray, mode: str = "bic", *,
                  m_const: float = 1.0, grid_size: int = 50,
                  grid_ratio: float | None = None, tol: float = 1e-8,
                  max_iter: int = 10_000):
    """Choose the panel penalty level.

    Parameters
    ----------
    mode : {"theoretical", "bic"}
        "theoretical" evaluates the closed-form rate constant;
        "bic" runs a warm-started geometric lambda path and minimises BIC.

    Returns
    -------
    (lam, path) : (float, list[PathPoint] | None)
        ``path`` is None in theoretical mode.
    """
    if mode == "theoretical":
        return lambda_theoretical(design.n_units, design.n_periods, design.p,
                                  m_const), None
    if mode != "bic":
        raise ValueError(f"unknown lambda selection mode: {mode!r}")
    X = StackedRegressors.from_design(design)
    w = np.ones(design.n_coef)
    w[design.p:] = 1.0 / np.sqrt(design.n_units)
    G = X.gram()
    g0 = X.rhs(np.asarray(y, dtype=np.float64))
    yty = float(y @ y)
    best, points = bic_path_gram(G, g0, yty, 1.0, w, design.n_obs,
                                 grid_size=grid_size, grid_ratio=grid_ratio,
                                 tol=tol, max_iter=max_iter)
    return points[best].lam, points
