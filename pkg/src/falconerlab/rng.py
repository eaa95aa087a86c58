"""Counter-based random streams.

Every stream is keyed by ``(seed, component, block)`` and drawn from a Philox
generator, so the numbers a sample sees depend only on its index, never on how
the work was split across threads.
"""
from __future__ import annotations

import hashlib
from concurrent.futures import ThreadPoolExecutor
from typing import Callable, Sequence

import numpy as np

BLOCK = 4096


def component_key(name: str) -> int:
    """Stable 64-bit hash of a component name (``hash()`` is salted per process)."""
    digest = hashlib.blake2b(name.encode(), digest_size=8).digest()
    return int.from_bytes(digest, "little")


def stream(seed: int, component: str, block: int = 0) -> np.random.Generator:
    ss = np.random.SeedSequence([int(seed) & (2**64 - 1), component_key(component), int(block)])
    return np.random.Generator(np.random.Philox(ss))


def tree_sum(values: Sequence) -> np.ndarray | float:
    """Pairwise reduction in a fixed order."""
    vals = list(values)
    if not vals:
        return 0.0
    while len(vals) > 1:
        nxt = [vals[i] + vals[i + 1] for i in range(0, len(vals) - 1, 2)]
        if len(vals) % 2:
            nxt.append(vals[-1])
        vals = nxt
    return vals[0]


def block_map(fn: Callable[[np.random.Generator, int, int], object], n: int, seed: int,
              component: str, threads: int = 1, block: int = BLOCK) -> list:
    """Run ``fn(rng, start, count)`` over fixed-size sample blocks.

    Results come back in block order whatever ``threads`` is.
    """
    starts = list(range(0, n, block))

    def run(i: int):
        start = starts[i]
        return fn(stream(seed, component, i), start, min(block, n - start))

    if threads <= 1 or len(starts) <= 1:
        return [run(i) for i in range(len(starts))]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(run, range(len(starts))))


def mc_mean(sample_fn: Callable[[np.random.Generator, int], np.ndarray], n: int, seed: int,
            component: str, threads: int = 1) -> tuple[float, float]:
    """Mean and standard error of i.i.d. draws ``sample_fn(rng, count) -> values``."""
    if n < 1:
        raise ValueError("need at least one sample")

    def fn(rng, start, count):
        v = np.asarray(sample_fn(rng, count), dtype=float)
        return np.array([v.sum(), (v * v).sum()])

    s, s2 = tree_sum(block_map(fn, n, seed, component, threads))
    mean = s / n
    if n == 1:
        return float(mean), 0.0
    var = max(s2 / n - mean * mean, 0.0) * n / (n - 1)
    return float(mean), float(np.sqrt(var / n))
