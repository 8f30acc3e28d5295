"""Index arithmetic and code-parameter types shared by every other module.

Bit vectors are plain numpy uint8 arrays of 0/1 values; index sets are
sorted numpy int64 arrays. Everything here is immutable after construction
and safe to share across workers.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


class InfeasibleConstructionError(ValueError):
    """Requested code parameters cannot produce a valid construction."""


@dataclass(frozen=True)
class CodeSpec:
    """Code dimensions: K info bits, M transmitted bits, mother length N = 2^n."""

    K: int
    M: int
    N: int
    n: int

    def __post_init__(self):
        if self.N != 1 << self.n:
            raise InfeasibleConstructionError(f"N={self.N} is not 2^{self.n}")
        if not (self.N // 2 < self.M <= self.N):
            raise InfeasibleConstructionError(
                f"M={self.M} outside (N/2, N] for N={self.N}"
            )
        if not (0 < self.K <= self.M):
            raise InfeasibleConstructionError(f"K={self.K} outside (0, M={self.M}]")

    @classmethod
    def from_KM(cls, K: int, M: int) -> "CodeSpec":
        """Build a spec from (K, M) with mother length N = 2^ceil(log2 M)."""
        if M < 1:
            raise InfeasibleConstructionError(f"M={M} must be positive")
        n = int(np.ceil(np.log2(M)))
        return cls(K=K, M=M, N=1 << n, n=n)

    @property
    def rate(self) -> float:
        return self.K / self.M


def bit_reverse(i: int, n: int) -> int:
    """Reverse the n-bit binary expansion of i."""
    if not 0 <= i < (1 << n):
        raise ValueError(f"index {i} does not fit in {n} bits")
    out = 0
    for _ in range(n):
        out = (out << 1) | (i & 1)
        i >>= 1
    return out


def row_weight(i: int) -> int:
    """Hamming weight of row i of the n-fold Kronecker kernel power: 2^popcount(i)."""
    if i < 0:
        raise ValueError("index must be non-negative")
    return 1 << bin(i).count("1")


def row_weights(N: int) -> np.ndarray:
    """Vector of row weights for all indices in [0, N)."""
    idx = np.arange(N, dtype=np.uint64)
    return (np.uint64(1) << np.bitwise_count(idx)).astype(np.int64)


def as_bits(x, length: int | None = None) -> np.ndarray:
    """Coerce a sequence of 0/1 values to a uint8 array, validating contents."""
    arr = np.asarray(x, dtype=np.uint8)
    if arr.ndim != 1:
        raise ValueError("bit vector must be one-dimensional")
    if length is not None and arr.size != length:
        raise ValueError(f"expected {length} bits, got {arr.size}")
    if arr.size and arr.max() > 1:
        raise ValueError("bit vector entries must be 0 or 1")
    return arr


def as_index_set(indices, N: int) -> np.ndarray:
    """Coerce indices to a sorted, duplicate-free int64 array within [0, N)."""
    raw = np.asarray(list(indices), dtype=np.int64)
    arr = np.unique(raw)
    if arr.size != raw.size:
        raise ValueError("index set contains duplicates")
    if arr.size and (arr[0] < 0 or arr[-1] >= N):
        raise ValueError(f"index set not contained in [0, {N})")
    return arr
