"""
Seed derivation and per-instance mapping shared by the evaluation phases
"""

import os
from typing import Callable, Iterable, List, Optional, TypeVar

import numpy as np
from joblib import Parallel, delayed
from tqdm import tqdm

T = TypeVar("T")
R = TypeVar("R")


def derive_seed(seed: int, *keys: int) -> int:
    """
    Derive an independent integer seed from a run seed and integer keys

    The same (seed, keys) always yields the same value, whatever the order in
    which instances are processed.
    """
    state = np.random.SeedSequence([int(seed), *[int(k) for k in keys]]).generate_state(1)
    return int(state[0])


def default_jobs() -> int:
    """Number of available processors"""
    try:
        return len(os.sched_getaffinity(0))
    except AttributeError:
        return os.cpu_count() or 1


def map_instances(fn: Callable[[T], R], items: Iterable[T], jobs: Optional[int] = 1,
                  desc: str = "instances") -> List[R]:
    """
    Apply fn to every item, in order

    Args:
        fn: Per-item function; must be picklable when jobs > 1
        items: Work items
        jobs: Worker count; 1 runs in-process with a progress bar, None means all processors
        desc: Progress bar label

    Returns:
        Results in input order
    """
    items = list(items)
    n_jobs = default_jobs() if jobs is None else int(jobs)
    if n_jobs <= 1 or len(items) <= 1:
        return [fn(item) for item in tqdm(items, desc=desc, leave=False, disable=len(items) < 2)]
    return Parallel(n_jobs=n_jobs)(delayed(fn)(item) for item in items)
