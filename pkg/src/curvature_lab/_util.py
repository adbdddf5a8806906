"""Seeded stream derivation and the deterministic chunked executor."""

from __future__ import annotations

import zlib
from concurrent.futures import ThreadPoolExecutor
from typing import Callable, Sequence, TypeVar

import numpy as np

T = TypeVar("T")
R = TypeVar("R")


def _label_key(label) -> int:
    if isinstance(label, (int, np.integer)):
        return int(label) & 0xFFFFFFFF
    return zlib.crc32(str(label).encode("utf-8"))


def derive_rng(seed: int, *labels) -> np.random.Generator:
    """Independent generator for ``(seed, *labels)``.

    Streams depend only on the seed and the label path, never on call order or
    thread scheduling.
    """
    ss = np.random.SeedSequence(int(seed), spawn_key=tuple(_label_key(lab) for lab in labels))
    return np.random.Generator(np.random.PCG64(ss))


def as_rng(random_state) -> np.random.Generator:
    if isinstance(random_state, np.random.Generator):
        return random_state
    return np.random.default_rng(random_state)


def chunked_map(fn: Callable[[T], R], items: Sequence[T], n_jobs: int = 1) -> list[R]:
    """Map ``fn`` over ``items`` preserving order; threads only change timing."""
    if n_jobs is None or n_jobs <= 1 or len(items) <= 1:
        return [fn(it) for it in items]
    with ThreadPoolExecutor(max_workers=n_jobs) as pool:
        return list(pool.map(fn, items))


def split_range(n: int, parts: int) -> list[tuple[int, int]]:
    parts = max(1, min(parts, n)) if n else 1
    bounds = np.linspace(0, n, parts + 1).astype(int)
    return [(int(a), int(b)) for a, b in zip(bounds[:-1], bounds[1:]) if b > a]


def tail_window(n: int, fraction: float) -> slice:
    k = int(np.ceil(fraction * n))
    return slice(n - max(k, 1), n)

