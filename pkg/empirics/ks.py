import math

import numpy as np

from op.distributions import std_normal_cdf
from op.errors import DomainError


def ks_distance_to_normal(sample):
    """Exact sup_t |F_m(t) - Φ(t)| of the empirical CDF of `sample`.

    Between atoms F_m is flat and Φ monotone, so the supremum is attained at an
    atom, either at F_m(x_(i)) = i/m or at the left limit (i-1)/m. With ties
    the intermediate indices only produce gaps dominated by the two extremes.
    """
    x = np.sort(np.asarray(sample, dtype=np.float64))
    m = len(x)
    if m == 0:
        raise DomainError("empty sample")
    if not np.all(np.isfinite(x)):
        raise DomainError("sample values must be finite")
    phi = np.atleast_1d(std_normal_cdf(x))
    i = np.arange(1, m + 1)
    upper = np.abs(i / m - phi)
    lower = np.abs((i - 1) / m - phi)
    return float(max(upper.max(), lower.max()))


def dkw_radius(m, delta=0.01):
    """Half-width ε with P(sup|F_m - F| > ε) <= δ (Massart's tight DKW constant)."""
    if m < 1:
        raise DomainError("sample size must be positive")
    if not (0.0 < delta < 1.0):
        raise DomainError("confidence level δ must lie in (0, 1)")
    return math.sqrt(math.log(2.0 / delta) / (2.0 * m))
