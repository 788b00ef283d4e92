"""Monte Carlo estimation of Δ_n = sup_t |μ(S_n/v_n <= t) - Φ(t)|."""
import math
from dataclasses import dataclass
from functools import partial

import numpy as np

from distributed import all_gather, get_world_size, reduce_concat, split_range
from empirics.ks import dkw_radius, ks_distance_to_normal
from models.mds_models import theoretical_v2
from op.errors import DegenerateModelError, DomainError

MIN_REPS = 100


@dataclass
class DeltaEstimate:
    n: int
    reps: int
    ks: float
    dkw_radius: float
    key: object
    delta_conf: float = 0.01

    def __post_init__(self):
        assert 0.0 <= self.ks <= 1.0, "ks must lie in [0, 1]"
        assert self.dkw_radius > 0, "dkw radius must be positive"
        assert self.reps >= 2, "at least two replications"


def _chunk_sums(model, n, key, bounds):
    start, stop = bounds
    out = np.empty(stop - start)
    for i, r in enumerate(range(start, stop)):
        values, _, _ = model.draw(n, key.substream(r))
        out[i] = values.sum()
    return out


def replicated_sums(model, n, reps, key, workers=1, progress=False):
    """S_n over replications 0..reps-1, replication r driven by key.substream(r)."""
    chunks = split_range(reps, get_world_size(workers))
    results = all_gather(partial(_chunk_sums, model, n, key), chunks,
                         workers=workers, desc=f"n={n}", progress=progress)
    return reduce_concat(results)


def estimate_from_sums(sums, v_n, n, key, delta_conf=0.01):
    reps = len(sums)
    ks = ks_distance_to_normal(np.asarray(sums) / v_n)
    return DeltaEstimate(n=n, reps=reps, ks=ks, dkw_radius=dkw_radius(reps, delta_conf),
                         key=key, delta_conf=delta_conf)


def estimate_delta_n(model, n, reps, key, delta_conf=0.01, workers=1, progress=False):
    """Exact KS statistic of {S_n/v_n} over `reps` independent substreams of `key`."""
    if reps < MIN_REPS:
        raise DomainError(f"reps={reps} is below the minimum of {MIN_REPS}")
    v2 = theoretical_v2(model, n)
    if not v2 > 0:
        raise DegenerateModelError("v_n^2 = 0")
    sums = replicated_sums(model, n, reps, key, workers=workers, progress=progress)
    return estimate_from_sums(sums, math.sqrt(v2), n, key, delta_conf)
