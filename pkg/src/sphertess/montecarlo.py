"""Seeded, chunked Monte Carlo plumbing.

A run of ``n`` samples under ``seed`` is cut into fixed-size blocks; block
``b`` draws from ``default_rng([seed, b])``.  Workers only decide which
blocks they evaluate, and block results are merged in block order, so the
result does not depend on the number of workers.
"""
from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass
from typing import Callable, Sequence

import numpy as np

BLOCK_SIZE = 8192


@dataclass(frozen=True)
class Estimate:
    value: float
    stderr: float
    n: int
    seed: int | None = None

    def __post_init__(self):
        if self.stderr < 0:
            raise ValueError("stderr must be non-negative")

    @classmethod
    def exact(cls, value: float) -> "Estimate":
        return cls(float(value), 0.0, 0, None)

    def scaled(self, c: float) -> "Estimate":
        return Estimate(self.value * c, self.stderr * abs(c), self.n, self.seed)

    def to_dict(self) -> dict:
        return asdict(self)


def combined_stderr(*ests: Estimate) -> float:
    return math.sqrt(sum(e.stderr ** 2 for e in ests))


def block_rng(seed: int, block: int) -> np.random.Generator:
    return np.random.default_rng([int(seed) % 2**64, int(block)])


def n_workers() -> int:
    raw = os.environ.get("SPHERTESS_THREADS", "1")
    try:
        k = int(raw)
    except ValueError:
        raise ValueError(f"SPHERTESS_THREADS must be an integer, got {raw!r}")
    if k <= 0:
        k = os.cpu_count() or 1
    return k


def _block_sizes(n: int, block_size: int) -> list[int]:
    full, rem = divmod(n, block_size)
    return [block_size] * full + ([rem] if rem else [])


def run_blocks(fn: Callable[[np.random.Generator, int], object], n: int, seed: int,
               block_size: int = BLOCK_SIZE, workers: int | None = None) -> list:
    """Evaluate ``fn(rng_b, m_b)`` on every block, returning results in block order."""
    sizes = _block_sizes(n, block_size)
    workers = n_workers() if workers is None else workers
    jobs = [(b, m) for b, m in enumerate(sizes)]
    if workers <= 1 or len(jobs) <= 1:
        return [fn(block_rng(seed, b), m) for b, m in jobs]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(lambda bm: fn(block_rng(seed, bm[0]), bm[1]), jobs))


def merge_counts(counts: Sequence[int], n: int, seed: int | None) -> Estimate:
    k = int(sum(counts))
    p = k / n
    sd = math.sqrt(p * (1 - p) * n / (n - 1)) if n > 1 else 0.0
    return Estimate(p, sd / math.sqrt(n), n, seed)


def merge_moments(parts: Sequence[tuple[float, float]], n: int, seed: int | None) -> Estimate:
    """Merge per-block (sum, sum of squares) pairs into a mean estimate."""
    s = math.fsum(p[0] for p in parts)
    s2 = math.fsum(p[1] for p in parts)
    mean = s / n
    var = max(s2 / n - mean * mean, 0.0) * n / (n - 1) if n > 1 else 0.0
    return Estimate(mean, math.sqrt(var / n), n, seed)


def indicator_mean(hit: Callable[[np.random.Generator, int], int], n: int, seed: int,
                   **kw) -> Estimate:
    """Mean of a 0/1 variable; ``hit(rng, m)`` returns the count of ones among m draws."""
    if n < 1:
        raise ValueError("need n >= 1 samples")
    return merge_counts(run_blocks(hit, n, seed, **kw), n, seed)


def sample_mean(draw: Callable[[np.random.Generator, int], np.ndarray], n: int, seed: int,
                **kw) -> Estimate:
    """Mean of a real variable; ``draw(rng, m)`` returns m values."""
    if n < 1:
        raise ValueError("need n >= 1 samples")

    def moments(rng, m):
        x = np.asarray(draw(rng, m), dtype=float)
        return math.fsum(x), math.fsum(x * x)

    return merge_moments(run_blocks(moments, n, seed, **kw), n, seed)
