"""Fractional centered-difference coefficients for the 1D Riesz derivative.

The discrete fractional Laplacian of order ``alpha`` on a uniform grid is a
symmetric convolution with coefficients

    c_k = (-1)^k Gamma(alpha+1) / [Gamma(alpha/2 - k + 1) Gamma(alpha/2 + k + 1)]

which satisfy c_0 >= 0, c_k = c_{-k} <= 0 for k >= 1, and
sum_{k != 0} |c_k| = c_0.  Coefficients are generated by a stable ratio
recurrence; the Gamma-quotient form is kept only for cross-validation since
Gamma(alpha/2 + k + 1) overflows in double precision near k ~ 170.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import gamma, rgamma

__all__ = [
    "FracCoeffs",
    "coefficients",
    "coefficients_gamma",
    "tail_bounds",
    "theta_constants",
]


@dataclass(frozen=True)
class FracCoeffs:
    """Symmetric half c_0..c_K of the centered-difference stencil."""

    alpha: float
    coeffs: np.ndarray  # shape (K+1,), c_0 first

    def __post_init__(self):
        object.__setattr__(self, "coeffs", np.asarray(self.coeffs, dtype=float))

    def __len__(self) -> int:
        return len(self.coeffs)

    @property
    def c0(self) -> float:
        return float(self.coeffs[0])


def _check_alpha(alpha: float) -> None:
    if not (1.0 < alpha <= 2.0):
        raise ValueError(f"alpha must lie in (1, 2], got {alpha}")


def coefficients(alpha: float, K: int) -> FracCoeffs:
    """Generate c_0..c_K by the ratio recurrence.

    c_0 = Gamma(alpha+1) / Gamma(alpha/2+1)^2 and
    c_{k+1} = c_k (k - alpha/2) / (k + 1 + alpha/2).
    """
    _check_alpha(alpha)
    if K < 1:
        raise ValueError(f"K must be >= 1, got {K}")
    half = 0.5 * alpha
    c = np.empty(K + 1)
    c[0] = gamma(alpha + 1.0) / gamma(half + 1.0) ** 2
    k = np.arange(K, dtype=float)
    ratios = (k - half) / (k + 1.0 + half)
    # cumulative product of the ratios gives c_k / c_0
    c[1:] = c[0] * np.cumprod(ratios)
    return FracCoeffs(alpha=alpha, coeffs=c)


def coefficients_gamma(alpha: float, K: int) -> FracCoeffs:
    """Direct Gamma-quotient evaluation (validation only; overflows for k >~ 170)."""
    _check_alpha(alpha)
    if K < 1:
        raise ValueError(f"K must be >= 1, got {K}")
    half = 0.5 * alpha
    k = np.arange(K + 1, dtype=float)
    sign = np.where(k % 2 == 0, 1.0, -1.0)
    # rgamma handles the poles at nonpositive integers (alpha = 2) by returning 0
    c = sign * gamma(alpha + 1.0) * rgamma(half - k + 1.0) * rgamma(half + k + 1.0)
    return FracCoeffs(alpha=alpha, coeffs=c)


def theta_constants(alpha: float) -> tuple[float, float]:
    """Closed-form constants (theta, theta_0) of the coefficient tail estimates."""
    if not (1.0 < alpha < 2.0):
        raise ValueError(f"alpha must lie in (1, 2), got {alpha}")
    s = math.sin(math.pi * alpha / 2.0) * gamma(alpha + 1.0) / (math.pi * alpha)
    p = 5.0 + alpha / 2.0
    theta = (1.0 - (1.0 + alpha) / p) ** p * math.exp(1.0 + alpha) * s
    theta0 = math.sqrt(2.0) * math.exp(13.0 / 12.0) * s
    return theta, theta0


def tail_bounds(alpha: float, k0: int) -> tuple[float, float]:
    """Sandwich bounds on the coefficient tail sum_{j > k0} |c_j|.

    Returns (theta / (k0 + 1/2)^alpha, theta_0 / (k0 - 1)^alpha); the tail
    lies strictly between them for k0 >= 3 and 1 < alpha < 2.
    """
    if k0 < 3:
        raise ValueError(f"k0 must be >= 3, got {k0}")
    theta, theta0 = theta_constants(alpha)
    lower = theta / (k0 + 0.5) ** alpha
    upper = theta0 / (k0 - 1.0) ** alpha
    return lower, upper
