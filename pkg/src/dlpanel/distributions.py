"""Self-contained gaussian and chi-square distribution kernels.

Only the standard library's ``math`` module is used, keeping the inference
layer free of external numerical dependencies and bit-stable across
platforms.  The chi-square CDF runs through the regularised lower
incomplete gamma function, computed by its power series for x < s + 1 and
by a Lentz continued fraction for the upper tail otherwise.
"""
from __future__ import annotations

import math

_SQRT2 = math.sqrt(2.0)
_INV_SQRT_2PI = 1.0 / math.sqrt(2.0 * math.pi)
_EPS = 1e-16
_TINY = 1e-300


def norm_pdf(x: float) -> float:
    """Standard gaussian density."""
    return _INV_SQRT_2PI * math.exp(-0.5 * x * x)


def norm_cdf(x: float) -> float:
    """Standard gaussian CDF via the complementary error function."""
    return 0.5 * math.erfc(-x / _SQRT2)


def norm_quantile(q: float) -> float:
    """Inverse of the standard gaussian CDF.

    Newton iteration on ``norm_cdf`` with a bisection safeguard, run to an
    absolute tolerance of 1e-10 on the abscissa.
    """
    if not 0.0 < q < 1.0:
        raise ValueError(f"quantile level must lie in (0, 1); got {q}")
    if q == 0.5:
        return 0.0
    # crude but monotone starting point
    r = min(q, 1.0 - q)
    x = math.sqrt(-2.0 * math.log(r))
    if q < 0.5:
        x = -x
    lo, hi = -40.0, 40.0
    for _ in range(200):
        f = norm_cdf(x) - q
        if f > 0.0:
            hi = min(hi, x)
        elif f < 0.0:
            lo = max(lo, x)
        d = norm_pdf(x)
        step = f / d if d > _TINY else 0.0
        x_new = x - step
        if not lo < x_new < hi:
            x_new = 0.5 * (lo + hi)
        if abs(x_new - x) < 1e-10 * (1.0 + abs(x_new)) or abs(x_new - x) < 1e-10:
            return x_new
        x = x_new
    return x


def _lower_gamma_series(s: float, x: float) -> float:
    """Regularised lower incomplete gamma by power series (x < s + 1)."""
    term = 1.0 / s
    total = term
    k = s
    for _ in range(10_000):
        k += 1.0
        term *= x / k
        total += term
        if abs(term) < abs(total) * _EPS:
            break
    return total * math.exp(-x + s * math.log(x) - math.lgamma(s))


def _upper_gamma_cf(s: float, x: float) -> float:
    """Regularised upper incomplete gamma by Lentz continued fraction
    (x >= s + 1)."""
    b = x + 1.0 - s
    c = 1.0 / _TINY
    d = 1.0 / b
    h = d
    for i in range(1, 10_000):
        an = -i * (i - s)
        b += 2.0
        d = an * d + b
        if abs(d) < _TINY:
            d = _TINY
        c = b + an / c
        if abs(c) < _TINY:
            c = _TINY
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < _EPS:
            break
    return h * math.exp(-x + s * math.log(x) - math.lgamma(s))


def reg_lower_gamma(s: float, x: float) -> float:
    """Regularised lower incomplete gamma P(s, x)."""
    if s <= 0.0:
        raise ValueError("shape must be positive")
    if x < 0.0:
        raise ValueError("argument must be non-negative")
    if x == 0.0:
        return 0.0
    if x < s + 1.0:
        return _lower_gamma_series(s, x)
    return 1.0 - _upper_gamma_cf(s, x)


def chi2_cdf(x: float, dof: float) -> float:
    """Chi-square CDF with ``dof`` degrees of freedom."""
    if dof <= 0:
        raise ValueError("degrees of freedom must be positive")
    if x <= 0.0:
        return 0.0
    return reg_lower_gamma(dof / 2.0, x / 2.0)


def chi2_sf(x: float, dof: float) -> float:
    """Chi-square upper tail probability (survival function)."""
    if dof <= 0:
        raise ValueError("degrees of freedom must be positive")
    if x <= 0.0:
        return 1.0
    s, xx = dof / 2.0, x / 2.0
    if xx < s + 1.0:
        return 1.0 - _lower_gamma_series(s, xx)
    return _upper_gamma_cf(s, xx)
