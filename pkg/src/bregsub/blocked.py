"""Parameter vectors partitioned into contiguous blocks (one block per layer)."""
from __future__ import annotations

import math
from typing import Iterable, Sequence

import numpy as np


class DimensionError(ValueError):
    """Raised when a vector does not match the configured dimension."""


def _as_sizes(sizes) -> tuple[int, ...]:
    sizes = tuple(int(s) for s in np.atleast_1d(sizes))
    if not sizes or any(s <= 0 for s in sizes):
        raise ValueError(f"block sizes must be positive, got {sizes}")
    return sizes


class BlockedVector:
    """A dense real vector split into ``L`` ordered blocks.

    The data lives in one flat float64 array; ``blocks`` returns views into it,
    so blockwise and flat arithmetic always agree.

    Parameters
    ----------
    data : array_like
        Flat vector of length ``sum(sizes)``.
    sizes : sequence of int, optional
        Block lengths. Defaults to a single block.
    """

    __array_priority__ = 100

    def __init__(self, data, sizes: Sequence[int] | None = None):
        data = np.array(data, dtype=float).ravel()
        self.sizes = _as_sizes(len(data) if sizes is None else sizes)
        if sum(self.sizes) != data.size:
            raise DimensionError(
                f"data has length {data.size} but blocks sum to {sum(self.sizes)}")
        self.data = data

    @classmethod
    def from_blocks(cls, blocks: Iterable) -> "BlockedVector":
        blocks = [np.asarray(b, dtype=float).ravel() for b in blocks]
        return cls(np.concatenate(blocks), [b.size for b in blocks])

    @classmethod
    def zeros(cls, sizes) -> "BlockedVector":
        sizes = _as_sizes(sizes)
        return cls(np.zeros(sum(sizes)), sizes)

    @property
    def total_dim(self) -> int:
        return self.data.size

    @property
    def offsets(self) -> np.ndarray:
        return np.concatenate(([0], np.cumsum(self.sizes)[:-1]))

    @property
    def blocks(self) -> list[np.ndarray]:
        return np.split(self.data, np.cumsum(self.sizes)[:-1])

    def like(self, data) -> "BlockedVector":
        """New vector with this layout and the given flat data."""
        data = np.asarray(data, dtype=float)
        if data.shape != self.data.shape:
            raise DimensionError(f"expected length {self.data.size}, got shape {data.shape}")
        out = object.__new__(BlockedVector)
        out.sizes, out.data = self.sizes, data
        return out

    def _other(self, other):
        if isinstance(other, BlockedVector):
            if other.sizes != self.sizes:
                raise DimensionError(f"block layouts differ: {self.sizes} vs {other.sizes}")
            return other.data
        return other

    def __add__(self, other):
        return self.like(self.data + self._other(other))

    __radd__ = __add__

    def __sub__(self, other):
        return self.like(self.data - self._other(other))

    def __rsub__(self, other):
        return self.like(self._other(other) - self.data)

    def __mul__(self, scalar):
        return self.like(self.data * scalar)

    __rmul__ = __mul__

    def __truediv__(self, scalar):
        return self.like(self.data / scalar)

    def __neg__(self):
        return self.like(-self.data)

    def __array__(self, dtype=None, copy=None):
        return self.data if dtype is None else self.data.astype(dtype)

    def __len__(self):
        return self.total_dim

    def __eq__(self, other):
        if not isinstance(other, BlockedVector):
            return NotImplemented
        return self.sizes == other.sizes and np.array_equal(self.data, other.data)

    def __repr__(self):
        return f"BlockedVector({self.data.tolist()!r}, sizes={list(self.sizes)})"

    def dot(self, other) -> float:
        other = self._other(other)
        return float(np.dot(self.data, other))

    def block_dots(self, other) -> np.ndarray:
        """Per-block inner products; their sum is :meth:`dot`."""
        other = np.asarray(self._other(other), dtype=float)
        return np.add.reduceat(self.data * other, self.offsets)

    def block_norms(self) -> np.ndarray:
        return np.sqrt(np.add.reduceat(self.data * self.data, self.offsets))

    def norm(self) -> float:
        return math.sqrt(np.dot(self.data, self.data))

    def copy(self) -> "BlockedVector":
        return self.like(self.data.copy())
