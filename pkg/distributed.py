import os
from concurrent.futures import ProcessPoolExecutor

import numpy as np
from tqdm import tqdm


def get_world_size(workers=None):
    if workers is None or workers <= 0:
        return os.cpu_count() or 1

    return int(workers)


def split_range(total, parts, min_chunk=256):
    """Contiguous [start, stop) chunks covering range(total), in order."""
    parts = max(1, min(parts * 4, -(-total // min_chunk)))
    bounds = np.linspace(0, total, parts + 1).round().astype(int)

    return [(int(a), int(b)) for a, b in zip(bounds[:-1], bounds[1:]) if b > a]


def all_gather(fn, tasks, workers=None, desc=None, progress=False):
    """Apply `fn` to every task and return the results in task order.

    The order of the returned list never depends on the number of workers or
    on scheduling, so any reduction over it is deterministic.
    """
    world_size = get_world_size(workers)
    tasks = list(tasks)

    if world_size == 1 or len(tasks) <= 1:
        it = tqdm(tasks, desc=desc, dynamic_ncols=True, leave=False) if progress else tasks
        return [fn(task) for task in it]

    with ProcessPoolExecutor(max_workers=world_size) as pool:
        results = pool.map(fn, tasks)
        if progress:
            results = tqdm(results, total=len(tasks), desc=desc, dynamic_ncols=True, leave=False)
        return list(results)


def reduce_concat(chunks):
    if not chunks:
        return np.empty(0)

    return np.concatenate(chunks)
