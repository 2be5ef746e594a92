"""Keyed counter-based random streams and deterministic sharded Monte Carlo.

Every stream is a Philox generator seeded by a :class:`numpy.random.SeedSequence`
built from ``(seed, *key)``.  Monte Carlo work is cut into fixed-size shards,
shard ``i`` uses key ``(*key, i)``, and shard outputs are concatenated in
shard order.  The final sample array, and so every reduction over it, does
not depend on the number of worker threads.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

_MASK64 = (1 << 64) - 1
DEFAULT_SHARD = 4096


def _words(values: Sequence[int]) -> list[int]:
    out = []
    for v in values:
        v = int(v)
        if v < 0:
            v &= _MASK64
        out.append(v)
    return out


def make_rng(seed: int, *key: int) -> np.random.Generator:
    """Independent Philox stream for ``(seed, *key)``."""
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(_words((seed, *key)))))


def run_sharded(
    fn: Callable[[np.random.Generator, int], np.ndarray],
    total: int,
    seed: int,
    key: Sequence[int] = (),
    workers: int = 1,
    shard_size: int = DEFAULT_SHARD,
) -> np.ndarray:
    """Draw ``total`` samples as ``fn(rng, count)`` over keyed shards.

    ``fn`` must return an array whose first axis has length ``count``.
    """
    if total < 1:
        raise ValueError("sample count must be >= 1")
    if workers < 1:
        raise ValueError("workers must be >= 1")
    counts = [shard_size] * (total // shard_size)
    if total % shard_size:
        counts.append(total % shard_size)
    jobs = [(make_rng(seed, *key, i), c) for i, c in enumerate(counts)]
    if workers == 1 or len(jobs) == 1:
        parts = [fn(r, c) for r, c in jobs]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(lambda job: fn(*job), jobs))
    return np.concatenate([np.asarray(p) for p in parts], axis=0)


@dataclass(frozen=True)
class MeanEstimate:
    mean: float
    se: float
    count: int

    @classmethod
    def of(cls, samples) -> "MeanEstimate":
        x = np.asarray(samples, dtype=float).ravel()
        if x.size < 2:
            raise ValueError("need at least two samples for a standard error")
        # np.mean / np.var use pairwise summation, so the result is a fixed
        # function of the (ordered) sample array
        return cls(float(np.mean(x)), float(np.std(x, ddof=1) / math.sqrt(x.size)), int(x.size))

    def within(self, target: float, k: float = 3.0) -> bool:
        return abs(self.mean - target) <= k * self.se

    def zscore(self, target: float) -> float:
        return (self.mean - target) / self.se if self.se > 0 else (0.0 if self.mean == target else math.inf)
