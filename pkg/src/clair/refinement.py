"""Collaborative refinement of client weights, plus averaging baselines.

For a client in the collaborative set, every other member acts as a
reference: its estimate is transported toward the client through the shared
row space and the transported copies are averaged. Algebraically this
equals keeping the client's own estimate inside the shared row space and
replacing the orthogonal part with the set average, which is how
:func:`refine` computes it; :func:`refine_pairwise` is the literal
pairwise-sum form kept as a cross-check.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Mapping, Sequence

import numpy as np

from .contrast import StackedPairMatrix, pair_index
from .decomposition import RowProjector
from .exceptions import DimensionError, EmptyClientSetError


@dataclass(frozen=True)
class RefinementResult:
    """Refined weights for set members, untouched local weights otherwise."""

    refined: dict[int, np.ndarray]
    passthrough: dict[int, np.ndarray]
    set_used: tuple[int, ...]

    def weight(self, k: int) -> np.ndarray:
        return self.refined[k] if k in self.refined else self.passthrough[k]


def fedavg(weights: Sequence[np.ndarray], subset: Iterable[int]) -> np.ndarray:
    """Entrywise mean of the weights in ``subset``."""
    ids = sorted(set(subset))
    if not ids:
        raise EmptyClientSetError("cannot average over an empty client set")
    return np.mean([weights[k] for k in ids], axis=0)


def oracle_fedavg(
    weights: Sequence[np.ndarray], true_benign: Iterable[int]
) -> dict[int, np.ndarray]:
    """Benign clients get the benign-set mean; the rest keep their own fit."""
    benign = sorted(set(true_benign))
    if not benign:
        raise EmptyClientSetError("oracle averaging needs a nonempty benign set")
    mean = fedavg(weights, benign)
    return {
        k: (mean if k in benign else np.asarray(weights[k], dtype=np.float64))
        for k in range(len(weights))
    }


def refine(
    weights: Sequence[np.ndarray],
    d_hat: StackedPairMatrix,
    projector: RowProjector,
    collaborative: Iterable[int],
) -> RefinementResult:
    """Refine every client in ``collaborative``; pass the others through."""
    members = sorted(set(collaborative))
    if not members:
        raise EmptyClientSetError("refinement needs a nonempty collaborative set")
    if projector.dim != d_hat.cols:
        raise DimensionError(
            f"projector dimension {projector.dim} does not match "
            f"{d_hat.cols} columns"
        )
    mean = fedavg(weights, members)
    proj = projector.matrix
    refined = {
        k: mean + (np.asarray(weights[k], dtype=np.float64) - mean) @ proj
        for k in members
    }
    passthrough = {
        k: np.asarray(weights[k], dtype=np.float64)
        for k in range(len(weights))
        if k not in refined
    }
    return RefinementResult(refined, passthrough, tuple(members))


def refine_pairwise(
    weights: Sequence[np.ndarray],
    d_hat: StackedPairMatrix,
    projector: RowProjector,
    collaborative: Iterable[int],
) -> dict[int, np.ndarray]:
    """Literal pairwise-sum refinement, for cross-checking :func:`refine`.

    The correction for reference j and target k is the (j, k) block of the
    projected contrast, negated when j > k and zero when j = k.
    """
    members = sorted(set(collaborative))
    if not members:
        raise EmptyClientSetError("refinement needs a nonempty collaborative set")
    aligned = d_hat.data @ projector.matrix
    stacked = d_hat.with_data(aligned)

    def correction(j: int, k: int) -> np.ndarray:
        if j == k:
            return np.zeros((d_hat.block_rows, d_hat.cols))
        block = stacked.block(pair_index(j, k, d_hat.n_clients).flat)
        return block if j < k else -block

    out: dict[int, np.ndarray] = {}
    for k in members:
        total = np.zeros((d_hat.block_rows, d_hat.cols))
        for j in members:
            total += np.asarray(weights[j], dtype=np.float64) - correction(j, k)
        out[k] = total / len(members)
    return out


def passthrough_map(
    weights: Sequence[np.ndarray], result: RefinementResult
) -> Mapping[int, np.ndarray]:
    """Final per-client weights after refinement (refined or untouched)."""
    return {k: result.weight(k) for k in range(len(weights))}
