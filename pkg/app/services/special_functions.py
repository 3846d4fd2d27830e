"""
Gamma function and power-difference helpers.

Gamma uses the Lanczos approximation with g=7 and nine coefficients, extended to
z < 1/2 by the reflection formula. Relative accuracy is about 1e-15 on [0.05, 10].
"""

import math
from typing import Union

import numpy as np

from ..exceptions import DomainError

ArrayLike = Union[float, np.ndarray]

LANCZOS_G = 7.0
LANCZOS_COEFFICIENTS = np.array([
    0.99999999999980993,
    676.5203681218851,
    -1259.1392167224028,
    771.32342877765313,
    -176.61502916214059,
    12.507343278686905,
    -0.13857109526572012,
    9.9843695780195716e-6,
    1.5056327351493116e-7,
])

_SQRT_TWO_PI = math.sqrt(2.0 * math.pi)


def _lanczos_series(z: np.ndarray) -> np.ndarray:
    # valid for z >= 1/2
    zm1 = z - 1.0
    x = np.full_like(zm1, LANCZOS_COEFFICIENTS[0])
    for i, coefficient in enumerate(LANCZOS_COEFFICIENTS[1:], start=1):
        x = x + coefficient / (zm1 + i)
    t = zm1 + LANCZOS_G + 0.5
    return _SQRT_TWO_PI * np.power(t, zm1 + 0.5) * np.exp(-t) * x


def gamma(z: ArrayLike) -> ArrayLike:
    """Gamma function for real arguments; scalars in, scalars out."""
    values = np.asarray(z, dtype=float)
    if np.any((values <= 0.0) & (values == np.round(values))):
        raise DomainError(f"Gamma has a pole at non-positive integer argument {z!r}")

    reflected = values < 0.5
    result = np.empty_like(values)
    if np.any(~reflected):
        result[~reflected] = _lanczos_series(values[~reflected])
    if np.any(reflected):
        zr = values[reflected]
        result[reflected] = math.pi / (np.sin(math.pi * zr) * _lanczos_series(1.0 - zr))

    if np.ndim(z) == 0:
        return float(result)
    return result


def power_step(base: ArrayLike, width: ArrayLike, exponent: float) -> ArrayLike:
    """
    Return (base + width)**exponent - base**exponent without cancellation.

    Uses base**p * expm1(p * log1p(width / base)), which keeps full relative
    accuracy when width is small against base. A zero base gives width**p.
    """
    b = np.asarray(base, dtype=float)
    w = np.asarray(width, dtype=float)
    if np.any(b < 0.0) or np.any(b + w < 0.0):
        raise DomainError("power_step needs non-negative endpoints")

    safe = np.where(b > 0.0, b, 1.0)
    stable = np.power(safe, exponent) * np.expm1(exponent * np.log1p(w / safe))
    result = np.where(b > 0.0, stable, np.power(np.abs(w), exponent) * np.sign(w))

    if np.ndim(result) == 0:
        return float(result)
    return result
