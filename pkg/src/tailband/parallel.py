"""Deterministic work partitioning.

Parallel Monte Carlo here is always arranged as: fix a partition of the work
into batches, give each batch its own child random stream, compute batches
in any order, and reduce results in batch order.  The outcome is then
bit-identical for any worker count.
"""
from __future__ import annotations

from concurrent.futures import ProcessPoolExecutor
from typing import Callable, Sequence, TypeVar

T = TypeVar("T")
R = TypeVar("R")


def batch_sizes(total: int, batch: int) -> list[int]:
    """Split `total` items into fixed-size batches (last one may be short)."""
    if total <= 0 or batch <= 0:
        raise ValueError("total and batch must be positive")
    full, rem = divmod(total, batch)
    return [batch] * full + ([rem] if rem else [])


def run_batches(fn: Callable[[T], R], args: Sequence[T], threads: int = 1) -> list[R]:
    """Map fn over args, preserving order; threads > 1 uses worker processes."""
    if threads <= 1 or len(args) <= 1:
        return [fn(a) for a in args]
    with ProcessPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, args))
