import numpy as np

PARTITION_TOL = 1e-12


def variance_partition(cond_vars, v2):
    """Stopping indices ν(0..n) where the running sum of σ_i² first reaches j v²/n.

    ν(0) = 0 and ν(n) = n by convention; a threshold never reached maps to n.
    Running sums are compared with a relative 1e-12 guard so that exact hits
    survive floating point accumulation.
    """
    cond_vars = np.asarray(cond_vars, dtype=np.float64)
    n = len(cond_vars)
    nu = np.empty(n + 1, dtype=np.int64)
    nu[0] = 0
    if n == 0:
        return nu
    nu[n] = n
    if n > 1:
        running = np.cumsum(cond_vars)
        thresholds = np.arange(1, n) * (v2 / n)
        idx = np.searchsorted(running, thresholds - PARTITION_TOL * abs(v2), side="left") + 1
        nu[1:n] = np.minimum(idx, n)
    return nu
