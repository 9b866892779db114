"""Client-pair enumeration and the stacked matrix of pairwise contrasts.

A problem with K clients has G = K(K-1)/2 unordered pairs. Pairs are always
stacked in lexicographic order of (j, k) with j < k, so block positions are
reproducible across runs. The stacked matrix is stored as one contiguous
(G*q) x p buffer; blocks are views into it.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .exceptions import DimensionError, InsufficientClientsError, InvalidPairError


def n_pairs(n_clients: int) -> int:
    """Number of unordered client pairs."""
    return n_clients * (n_clients - 1) // 2


@dataclass(frozen=True, order=True)
class PairIndex:
    """An unordered client pair (j, k), j < k, with its flat stacking position."""

    j: int
    k: int
    flat: int


def pair_index(j: int, k: int, n_clients: int) -> PairIndex:
    """Canonical PairIndex for the unordered pair {j, k}.

    The flat position is the rank of (min, max) in lexicographic order over
    all pairs of ``n_clients`` clients.
    """
    if n_clients < 2:
        raise InsufficientClientsError(f"need at least 2 clients, got {n_clients}")
    if j == k:
        raise InvalidPairError(f"pair requires distinct clients, got ({j}, {k})")
    lo, hi = (j, k) if j < k else (k, j)
    if lo < 0 or hi >= n_clients:
        raise InvalidPairError(f"client ids ({j}, {k}) out of range for K={n_clients}")
    flat = lo * (2 * n_clients - lo - 1) // 2 + (hi - lo - 1)
    return PairIndex(lo, hi, flat)


def pair_from_flat(flat: int, n_clients: int) -> PairIndex:
    """Inverse of :func:`pair_index`: recover (j, k) from a flat position."""
    total = n_pairs(n_clients)
    if not 0 <= flat < total:
        raise InvalidPairError(f"flat index {flat} out of range for K={n_clients}")
    j = 0
    offset = flat
    while offset >= n_clients - 1 - j:
        offset -= n_clients - 1 - j
        j += 1
    return PairIndex(j, j + 1 + offset, flat)


def all_pairs(n_clients: int) -> list[PairIndex]:
    """All pairs in stacking order."""
    return [
        pair_index(j, k, n_clients)
        for j in range(n_clients)
        for k in range(j + 1, n_clients)
    ]


def pair_rows(n_clients: int) -> tuple[np.ndarray, np.ndarray]:
    """Arrays (jj, kk) with the client ids of each pair, in stacking order."""
    jj, kk = np.triu_indices(n_clients, k=1)
    return jj.astype(np.intp), kk.astype(np.intp)


@dataclass(frozen=True)
class StackedPairMatrix:
    """G pairwise q x p blocks stacked vertically into one (G*q) x p matrix.

    Immutable after construction: the underlying buffer is marked read-only,
    so instances are safe to share across parallel workers.
    """

    n_clients: int
    block_rows: int
    cols: int
    data: np.ndarray

    def __post_init__(self):
        expected = (n_pairs(self.n_clients) * self.block_rows, self.cols)
        if self.data.shape != expected:
            raise DimensionError(
                f"stacked data has shape {self.data.shape}, expected {expected}"
            )
        arr = np.ascontiguousarray(self.data, dtype=np.float64)
        arr.setflags(write=False)
        object.__setattr__(self, "data", arr)

    @property
    def n_pairs(self) -> int:
        return n_pairs(self.n_clients)

    @property
    def shape(self) -> tuple[int, int]:
        return self.data.shape

    @property
    def blocks(self) -> np.ndarray:
        """(G, q, p) view of the buffer."""
        return self.data.reshape(self.n_pairs, self.block_rows, self.cols)

    def block(self, j: int, k: int | None = None) -> np.ndarray:
        """Block for pair (j, k), or by flat index when ``k`` is omitted."""
        flat = j if k is None else pair_index(j, k, self.n_clients).flat
        q = self.block_rows
        return self.data[flat * q : (flat + 1) * q]

    def norm(self) -> float:
        return float(np.linalg.norm(self.data))

    @classmethod
    def zeros(cls, n_clients: int, block_rows: int, cols: int) -> "StackedPairMatrix":
        return cls(
            n_clients,
            block_rows,
            cols,
            np.zeros((n_pairs(n_clients) * block_rows, cols)),
        )

    def with_data(self, data: np.ndarray) -> "StackedPairMatrix":
        """Same pair structure, new buffer."""
        return StackedPairMatrix(self.n_clients, self.block_rows, self.cols, data)


def build_contrast(weights: Sequence[np.ndarray]) -> StackedPairMatrix:
    """Stack all pairwise differences W(j) - W(k), j < k, in pair order."""
    n_clients = len(weights)
    if n_clients < 2:
        raise InsufficientClientsError(
            f"pairwise contrasts need at least 2 clients, got {n_clients}"
        )
    mats = [np.asarray(w, dtype=np.float64) for w in weights]
    shapes = {m.shape for m in mats}
    if len(shapes) != 1 or mats[0].ndim != 2:
        raise DimensionError(
            f"client weight matrices must share one (q, p) shape, got {sorted(shapes)}"
        )
    stack = np.asarray(mats)
    q, p = stack.shape[1], stack.shape[2]
    jj, kk = pair_rows(n_clients)
    diff = stack[jj] - stack[kk]
    return StackedPairMatrix(n_clients, q, p, diff.reshape(-1, p))


def block_norms(s: StackedPairMatrix) -> np.ndarray:
    """Frobenius norm of each block, in stacking order."""
    blocks = s.blocks
    return np.sqrt(np.einsum("gij,gij->g", blocks, blocks))


def block_project(
    s: StackedPairMatrix, subset: Iterable[PairIndex | int]
) -> StackedPairMatrix:
    """Zero-padded projection keeping only the blocks in ``subset``."""
    keep = np.zeros(s.n_pairs, dtype=bool)
    for item in subset:
        flat = item.flat if isinstance(item, PairIndex) else int(item)
        if not 0 <= flat < s.n_pairs:
            raise InvalidPairError(f"block index {flat} out of range")
        keep[flat] = True
    out = np.where(keep[:, None, None], s.blocks, 0.0)
    return s.with_data(out.reshape(s.shape))
