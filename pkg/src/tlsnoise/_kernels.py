"""Small compiled helpers shared by the Monte Carlo kernels."""

from __future__ import annotations

import math

import numba as nb
import numpy as np

# Taylor coefficients of cos and sin in powers of d**2.
_C = tuple((-1) ** k / math.factorial(2 * k) for k in range(9))
_S = tuple((-1) ** k / math.factorial(2 * k + 1) for k in range(8))
C0, C1, C2, C3, C4, C5, C6, C7, C8 = _C
S0, S1, S2, S3, S4, S5, S6, S7 = _S

# Below this angle the truncated series is exact to double precision.
SERIES_LIMIT = 0.6


@nb.njit(cache=True, nogil=True, inline="always")
def rotation(d):
    """``(cos d, sin d)``; a short series for the small angles of noise kicks."""
    if abs(d) > SERIES_LIMIT:
        return np.cos(d), np.sin(d)
    x = d * d
    c = C0 + x * (C1 + x * (C2 + x * (C3 + x * (C4 + x * (C5 + x * (C6 + x * (C7 + x * C8)))))))
    s = d * (S0 + x * (S1 + x * (S2 + x * (S3 + x * (S4 + x * (S5 + x * (S6 + x * S7)))))))
    return c, s
