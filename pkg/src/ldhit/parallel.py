"""Reproducible random streams and ordered parallel map over work blocks."""
from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from typing import Callable, List, Optional, TypeVar

import numpy as np

T = TypeVar("T")

THREADS_ENV = "LDHIT_THREADS"


def block_rng(seed: int, block: int, tag: int = 0) -> np.random.Generator:
    """Generator for work block ``block`` of stream family ``tag``.

    Depends only on ``(seed, tag, block)``, never on scheduling.
    """
    ss = np.random.SeedSequence(int(seed) & (2**64 - 1), spawn_key=(int(tag), int(block)))
    return np.random.Generator(np.random.PCG64(ss))


def resolve_threads(threads: Optional[int] = None) -> int:
    if threads is None:
        env = os.environ.get(THREADS_ENV)
        threads = int(env) if env else (os.cpu_count() or 1)
    return max(1, int(threads))


def map_blocks(fn: Callable[[int], T], n_blocks: int, threads: Optional[int] = None) -> List[T]:
    """``[fn(0), ..., fn(n_blocks - 1)]`` evaluated on a thread pool, in order."""
    threads = resolve_threads(threads)
    if threads == 1 or n_blocks <= 1:
        return [fn(b) for b in range(n_blocks)]
    with ThreadPoolExecutor(max_workers=min(threads, n_blocks)) as pool:
        return list(pool.map(fn, range(n_blocks)))
