"""Bessel and Hankel functions of orders 0 and 1 for positive real arguments.

The plain Bessel values come from the Cephes routines shipped with scipy.
The log-free remainder of Y0, which the logarithmic kernel splitting relies
on, is summed here from its ascending series so that no cancellation occurs
for small arguments.
"""

from __future__ import annotations

import numpy as np
from scipy import special

EULER_GAMMA = float(np.euler_gamma)
TWO_OVER_PI = 2.0 / np.pi

# Below this argument the ascending series of the Y0 remainder is summed
# directly; above it the remainder is formed from Y0 and J0.
_SERIES_SWITCH = 2.0


class DomainError(ValueError):
    """Raised when a Bessel routine receives a non-positive or non-finite argument."""


def _positive(x) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if not np.all(np.isfinite(x)):
        raise DomainError("Bessel argument must be finite")
    if np.any(x <= 0.0):
        raise DomainError("Bessel argument must be positive")
    return x


def hankel1_0(x):
    """Hankel function of the first kind and order zero, J0(x) + i Y0(x).

    Args:
        x: Positive real scalar or array.

    Returns:
        Complex value(s) with the shape of ``x``.

    Raises:
        DomainError: If any entry of ``x`` is not a positive finite number.
    """
    x = _positive(x)
    return special.j0(x) + 1j * special.y0(x)


def hankel1_1(x):
    """Hankel function of the first kind and order one, J1(x) + i Y1(x)."""
    x = _positive(x)
    return special.j1(x) + 1j * special.y1(x)


def hankel1_01(x):
    """Both H0 and H1 at once; the kernels always need the pair."""
    x = _positive(x)
    h0 = special.j0(x) + 1j * special.y0(x)
    h1 = special.j1(x) + 1j * special.y1(x)
    return h0, h1


def _y0_remainder_series(x: np.ndarray) -> np.ndarray:
    # Y0(x) - (2/pi) ln(x/2) J0(x)
    #   = (2/pi) [gamma J0(x) + sum_{k>=1} (-1)^{k+1} H_k (x^2/4)^k / (k!)^2]
    # With J0 also summed from its series the whole expression becomes a
    # single series whose terms are (-1)^k z^k/(k!)^2 * (gamma - H_k).
    z = 0.25 * x * x
    term = np.ones_like(x)
    harmonic = 0.0
    total = np.full_like(x, EULER_GAMMA)
    for k in range(1, 80):
        term = term * (-z) / (k * k)
        harmonic += 1.0 / k
        contrib = term * (EULER_GAMMA - harmonic)
        total += contrib
        if np.all(np.abs(contrib) <= 1e-18 * np.maximum(np.abs(total), 1e-300)):
            break
    return TWO_OVER_PI * total


def log_split_j0(x):
    """J0 and the smooth remainder of Y0 after removing its logarithm.

    Args:
        x: Positive real scalar or array.

    Returns:
        Tuple ``(j0, y0_smooth)`` where ``y0_smooth = Y0(x) - (2/pi) ln(x/2) J0(x)``.
        The remainder tends to ``(2/pi) * euler_gamma`` as x goes to zero.
    """
    x = _positive(x)
    scalar = x.ndim == 0
    x = np.atleast_1d(x)
    j0 = special.j0(x)
    smooth = np.empty_like(x)
    small = x <= _SERIES_SWITCH
    if np.any(small):
        smooth[small] = _y0_remainder_series(x[small])
    big = ~small
    if np.any(big):
        xb = x[big]
        smooth[big] = special.y0(xb) - TWO_OVER_PI * np.log(0.5 * xb) * j0[big]
    if scalar:
        return j0[0], smooth[0]
    return j0, smooth


def y1_remainder(x):
    """Y1(x) - (2/pi) ln(x/2) J1(x); keeps the -2/(pi x) pole, drops the log."""
    x = _positive(x)
    return special.y1(x) - TWO_OVER_PI * np.log(0.5 * x) * special.j1(x)
