"""Power-law rate fits and bound-ratio diagnostics.

"log n" is the natural logarithm throughout; any other base is absorbed into
the non-explicit constant of the bound.
"""
import math
from dataclasses import dataclass, field

import numpy as np
from scipy import stats

from op.errors import DomainError

LOG_BASE = "e"
POWER = "power"
POWER_LOG = "power_log"
MIN_POINTS = 3


@dataclass
class RateFit:
    grid: list
    model_form: str
    C: float
    b: float
    r2: float
    residuals: list = field(default_factory=list)

    def predict(self, n):
        n = np.asarray(n, dtype=np.float64)
        if self.model_form == POWER:
            return self.C * n ** self.b
        return self.C * n ** -0.5 * np.log(n)


def _check_grid(grid):
    if len(grid) < MIN_POINTS:
        raise DomainError(f"rate fits need at least {MIN_POINTS} grid points, got {len(grid)}")
    ns = np.array([g[0] for g in grid], dtype=np.float64)
    ds = np.array([g[1] for g in grid], dtype=np.float64)
    if np.any(np.diff(ns) <= 0):
        raise DomainError("grid must be strictly increasing in n")
    if np.any(ns < 1):
        raise DomainError("grid sizes must be positive")
    if np.any(~np.isfinite(ds)) or np.any(ds <= 0):
        raise DomainError("all Δ estimates must be positive to fit in log space")
    return ns, ds


def _r2(y, fitted):
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    ss_res = float(np.sum((y - fitted) ** 2))
    if ss_tot == 0.0:
        return 1.0 if ss_res == 0.0 else 0.0
    return min(1.0, max(0.0, 1.0 - ss_res / ss_tot))


def fit_rate(grid, form=POWER):
    """Least squares in log space.

    :param grid: list of (n, Δ̂_n), strictly increasing in n
    :param form: "power" fits Δ = C n^b; "power_log" fits only C in Δ = C n^{-1/2} log n
    """
    ns, ds = _check_grid(grid)
    logn, logd = np.log(ns), np.log(ds)
    if form == POWER:
        fit = stats.linregress(logn, logd)
        b, log_c = float(fit.slope), float(fit.intercept)
        fitted = log_c + b * logn
    elif form == POWER_LOG:
        if np.any(ns < 2):
            raise DomainError("the n^{-1/2} log n form needs n >= 2")
        shape = -0.5 * logn + np.log(logn)
        log_c = float(np.mean(logd - shape))
        b = -0.5
        fitted = log_c + shape
    else:
        raise DomainError(f"unknown rate form {form!r}")
    return RateFit(grid=[(int(n), float(d)) for n, d in zip(ns, ds)], model_form=form,
                   C=math.exp(log_c), b=b, r2=_r2(logd, fitted),
                   residuals=(logd - fitted).tolist())


def class_rate_term(n, u_n, v_n):
    """u_n log n / v_n."""
    if n < 2:
        raise DomainError("log n vanishes for n < 2")
    return u_n * math.log(n) / v_n


def bolthausen_term(n, v_n):
    """n log n / v_n³, the bounded-increment rate with deterministic conditional variance."""
    if n < 2:
        raise DomainError("log n vanishes for n < 2")
    return n * math.log(n) / v_n ** 3


def bound_ratio(delta, u_n, v_n):
    """Δ̂_n v_n / (u_n log n): an empirical lower estimate of the constant in the class bound."""
    return delta.ks / class_rate_term(delta.n, u_n, v_n)


def geometric_grid(lo_exp=4, hi_exp=10, base=2):
    return [base ** e for e in range(lo_exp, hi_exp + 1)]


def is_nonincreasing(values, slack=0.0):
    """True when every value exceeds its predecessor by at most `slack` (scalar or per point)."""
    values = np.asarray(values, dtype=np.float64)
    slack = np.broadcast_to(np.asarray(slack, dtype=np.float64), values.shape)
    return bool(np.all(values[1:] <= values[:-1] + slack[1:]))
