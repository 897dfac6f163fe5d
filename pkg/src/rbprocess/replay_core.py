"""FIFO replay buffer with newest-first positions and uniform K-subset sampling."""

from __future__ import annotations

import csv
import dataclasses
from dataclasses import dataclass
from fractions import Fraction
from math import comb
from typing import Any, Callable, Iterator

import numpy as np

from . import _kernels
from .errors import PreconditionError


class ReplayBuffer:
    """Fixed-capacity FIFO window over the last ``capacity`` pushed items.

    Position 1 is the newest item, position ``fill`` the oldest. Storage is a
    ring, so a push is O(1) and positions are resolved arithmetically.

    >>> rb = ReplayBuffer(3)
    >>> for x in "abcd":
    ...     rb.push(x)
    >>> rb.items()
    ['d', 'c', 'b']
    """

    def __init__(self, capacity: int):
        if int(capacity) != capacity or capacity < 1:
            raise PreconditionError(f"capacity must be a positive integer, got {capacity}")
        self.capacity = int(capacity)
        self._slots: list[Any] = [None] * self.capacity
        self._head = 0
        self.fill = 0
        self.total_pushed = 0

    def push(self, item) -> "ReplayBuffer":
        self._head = (self._head - 1) % self.capacity
        self._slots[self._head] = item
        self.fill = min(self.fill + 1, self.capacity)
        self.total_pushed += 1
        return self

    def __getitem__(self, position: int):
        if not 1 <= position <= self.fill:
            raise IndexError(f"position {position} outside 1..{self.fill}")
        return self._slots[(self._head + position - 1) % self.capacity]

    def __len__(self) -> int:
        return self.fill

    def __iter__(self) -> Iterator[Any]:
        for pos in range(1, self.fill + 1):
            yield self[pos]

    def items(self) -> list:
        return list(self)

    def time_index(self, position: int) -> int:
        """0-based push time of the item at ``position``."""
        return self.total_pushed - position

    def dump_csv(self, path) -> None:
        """One row per position; dataclass items are expanded into their fields."""
        rows = list(self)
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            if rows and dataclasses.is_dataclass(rows[0]):
                names = [f.name for f in dataclasses.fields(rows[0])]
                writer.writerow(["position", *names])
                for pos, item in enumerate(rows, start=1):
                    writer.writerow([pos, *(getattr(item, n) for n in names)])
            else:
                writer.writerow(["position", "item"])
                for pos, item in enumerate(rows, start=1):
                    writer.writerow([pos, item])


def push(buffer: ReplayBuffer, item) -> ReplayBuffer:
    return buffer.push(item)


@dataclass(frozen=True)
class BatchIndices:
    """Distinct buffer positions in draw order."""

    positions: tuple[int, ...]

    @property
    def k(self) -> int:
        return len(self.positions)

    def times(self, buffer: ReplayBuffer) -> tuple[int, ...]:
        return tuple(buffer.time_index(p) for p in self.positions)


@dataclass(frozen=True)
class BatchAverage:
    value: np.ndarray


def sample_batch(buffer: ReplayBuffer, k: int, rng: np.random.Generator) -> BatchIndices:
    """Uniform K-subset of positions 1..fill by partial Fisher-Yates.

    Draws exactly ``k`` uniforms from ``rng``. Raises when ``k > fill``; callers
    that want warm-up behaviour pass ``min(k, buffer.fill)`` themselves.
    """
    fill = buffer.fill
    if fill < 1:
        raise PreconditionError("cannot sample from an empty buffer")
    if not 1 <= k <= fill:
        raise PreconditionError(f"batch size {k} not in 1..{fill}")
    scratch = np.empty(fill, dtype=np.int64)
    _kernels.fisher_yates(fill, k, rng.random(k), scratch)
    return BatchIndices(tuple(int(x) for x in scratch[:k]))


def batch_average(buffer: ReplayBuffer, indices: BatchIndices,
                  f: Callable[[Any], Any] = lambda x: x) -> BatchAverage:
    values = [np.atleast_1d(np.asarray(f(buffer[p]), dtype=float)) for p in indices.positions]
    return BatchAverage(np.sum(values, axis=0) / indices.k)


def batch_probability(n: int, k: int) -> Fraction:
    """Probability ``1 / C(n, k)`` of any particular K-subset."""
    if n < 1 or k < 1:
        raise PreconditionError("n and k must be positive")
    if k > n:
        raise PreconditionError(f"batch size {k} exceeds buffer size {n}")
    return Fraction(1, comb(n, k))


def batch_uniform_count(horizon: int, n: int, k: int) -> int:
    """Uniforms consumed by ``horizon`` warm-up-aware draws of min(k, fill) positions."""
    t = np.arange(1, horizon + 1)
    return int(np.minimum(k, np.minimum(t, n)).sum())
