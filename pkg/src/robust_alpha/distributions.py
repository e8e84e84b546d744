"""Null distribution functions used to turn statistics into p-values."""

import math

import numpy as np
from scipy import special

_INV_SQRT_PI = 1.0 / math.sqrt(math.pi)


def gumbel_g_cdf(x):
    """Limit law of the centred maxima: ``G(x) = exp(-pi^{-1/2} exp(-x/2))``."""
    return np.exp(-_INV_SQRT_PI * np.exp(-np.asarray(x, dtype=float) / 2.0))


def gumbel_g_sf(x):
    """``1 - G(x)`` without cancellation in the upper tail."""
    return -np.expm1(-_INV_SQRT_PI * np.exp(-np.asarray(x, dtype=float) / 2.0))


def gumbel_g_quantile(q):
    q = np.asarray(q, dtype=float)
    if np.any((q <= 0) | (q >= 1)):
        raise ValueError("quantile level must lie in (0, 1)")
    return -2.0 * np.log(-math.sqrt(math.pi) * np.log(q))


def std_normal_cdf(x):
    return special.ndtr(x)


def std_normal_sf(x):
    return special.ndtr(-np.asarray(x, dtype=float))


def cauchy_cdf(x):
    return 0.5 + np.arctan(x) / math.pi


def cauchy_sf(x):
    # arctan(1/x)/pi for large x keeps precision in the far tail
    x = np.asarray(x, dtype=float)
    with np.errstate(divide="ignore"):
        tail = np.arctan2(1.0, x) / math.pi
    return tail


def f_cdf(x, d1, d2):
    if d1 < 1 or d2 < 1:
        raise ValueError(f"invalid F degrees of freedom ({d1}, {d2})")
    x = np.maximum(np.asarray(x, dtype=float), 0.0)
    return special.betainc(d1 / 2.0, d2 / 2.0, d1 * x / (d1 * x + d2))


def f_sf(x, d1, d2):
    if d1 < 1 or d2 < 1:
        raise ValueError(f"invalid F degrees of freedom ({d1}, {d2})")
    x = np.maximum(np.asarray(x, dtype=float), 0.0)
    return special.betainc(d2 / 2.0, d1 / 2.0, d2 / (d1 * x + d2))
