"""Deterministic RNG stream derivation and schedule-independent replication.

Every estimator in the package draws from streams derived from
(master_seed, lab_name, replica_index), so a run is reproducible
bit-for-bit regardless of how replicas are scheduled over threads.
"""
from __future__ import annotations

import hashlib
import os
from concurrent.futures import ThreadPoolExecutor
from typing import Callable, Sequence

import numpy as np

ENV_THREADS = "LEVYBOOL_THREADS"


def _label_id(label: str) -> int:
    digest = hashlib.sha256(label.encode("utf8")).digest()
    return int.from_bytes(digest[:4], "little")


def derive_stream(master_seed: int, label: str, index: int) -> np.random.Generator:
    """Stream for replica `index` of lab `label`, derived by hashing.

    Philox is counter based, so streams are reproducible across platforms
    and numpy versions.
    """
    ss = np.random.SeedSequence(entropy=int(master_seed),
                                spawn_key=(_label_id(label), int(index)))
    return np.random.Generator(np.random.Philox(ss))


def spawn_streams(rng: np.random.Generator, n: int) -> list[np.random.Generator]:
    """n independent child streams of an existing generator."""
    return rng.spawn(n)


def default_threads() -> int:
    value = os.environ.get(ENV_THREADS, "1")
    try:
        return max(1, int(value))
    except ValueError:
        return 1


def map_replicas(fn: Callable[[int], object], n: int, threads: int | None = None) -> list:
    """Run fn(i) for i in range(n), possibly in parallel.

    Results are returned ordered by replica index, so any fixed-order
    reduction over them is independent of the schedule.
    """
    threads = default_threads() if threads is None else max(1, int(threads))
    if threads == 1 or n <= 1:
        return [fn(i) for i in range(n)]
    out: list = [None] * n
    with ThreadPoolExecutor(max_workers=threads) as pool:
        for i, res in zip(range(n), pool.map(fn, range(n))):
            out[i] = res
    return out


def pairwise_sum(values: Sequence[float] | np.ndarray) -> float:
    """Fixed-shape pairwise summation tree; independent of scheduling."""
    arr = np.asarray(values, dtype=float)
    if arr.size == 0:
        return 0.0
    work = arr.copy()
    while work.size > 1:
        half = work.size // 2
        head = work[: 2 * half].reshape(half, 2).sum(axis=1)
        if work.size % 2:
            head = np.concatenate([head, work[-1:]])
        work = head
    return float(work[0])
