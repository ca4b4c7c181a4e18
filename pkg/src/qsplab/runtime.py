"""Worker-count and random-stream helpers shared by the stochastic experiments."""

from __future__ import annotations

import os

import numpy as np

CHUNK = 1000


def thread_count() -> int:
    """Worker cap from ``QSPLAB_THREADS`` (default 1)."""
    raw = os.environ.get("QSPLAB_THREADS", "1")
    try:
        n = int(raw)
    except ValueError as exc:
        raise ValueError(f"QSPLAB_THREADS must be an integer, got {raw!r}") from exc
    return max(1, n)


def chunk_sizes(total: int, chunk: int = CHUNK) -> list[int]:
    if total < 1:
        raise ValueError("need at least one trajectory")
    full, rest = divmod(total, chunk)
    return [chunk] * full + ([rest] if rest else [])


def chunk_streams(seed, total: int, chunk: int = CHUNK) -> list[tuple[int, np.random.Generator]]:
    """One independent generator per fixed-size chunk.

    Chunking is independent of the worker count, so results do not depend on
    ``QSPLAB_THREADS``.
    """
    sizes = chunk_sizes(total, chunk)
    root = seed if isinstance(seed, np.random.SeedSequence) else np.random.SeedSequence(seed)
    seqs = root.spawn(len(sizes))
    return [(n, np.random.default_rng(s)) for n, s in zip(sizes, seqs)]


def parallel_map(fn, items):
    items = list(items)
    n = min(thread_count(), len(items))
    if n <= 1:
        return [fn(it) for it in items]
    from joblib import Parallel, delayed

    return Parallel(n_jobs=n)(delayed(fn)(it) for it in items)
