"""Counter-based random streams.

Every variate in the lab is a pure function of a StreamKey: the master seed and
the replication index form the Philox key, the step selects a disjoint block of
the 256-bit counter. Replications can therefore run in any order, on any number
of workers, and still reproduce bit for bit.
"""
from dataclasses import dataclass, replace

import numpy as np

from op.errors import DomainError

_U64 = 2 ** 64

# step slots used by the samplers
STEP_SIGNS = 0
STEP_NOISE = 1
STEP_TAIL = 2
STEP_AUX = 3


@dataclass(frozen=True)
class StreamKey:
    master_seed: int
    substream_id: int = 0
    step: int = 0

    def __post_init__(self):
        for name in ("master_seed", "substream_id", "step"):
            value = getattr(self, name)
            if not (0 <= int(value) < _U64):
                raise DomainError(f"{name}={value} is not a 64-bit unsigned integer")

    def substream(self, substream_id):
        return replace(self, substream_id=int(substream_id), step=0)

    def at_step(self, step):
        return replace(self, step=int(step))


def make_generator(key):
    """Return a numpy Generator whose output depends only on `key`.

    The step lives in the second counter word, so two steps are 2**64 blocks
    apart and never overlap for any realistic draw count.
    """
    bit_gen = np.random.Philox(
        key=np.array([key.master_seed, key.substream_id], dtype=np.uint64),
        counter=np.array([0, key.step, 0, 0], dtype=np.uint64),
    )
    return np.random.Generator(bit_gen)


def replication_keys(master_key, reps, start=0):
    return [master_key.substream(r) for r in range(start, start + reps)]


def uniforms(key, size):
    """Open-interval uniforms (0, 1) for quantile transforms."""
    u = make_generator(key).random(size)
    # random() is on [0, 1); 0 would map to -inf under the quantile
    return np.where(u == 0.0, np.nextafter(0.0, 1.0), u)


def derive_seed(master_seed, *tags):
    """A 64-bit master seed for an independent experiment cell (e.g. one grid point)."""
    seq = np.random.SeedSequence([int(master_seed)] + [int(t) for t in tags])
    return int(seq.generate_state(1, dtype=np.uint64)[0])
