"""Row-space projector extraction and the canonical split of the contrast.

The solver's low-rank component identifies a shared row space; projecting
the raw contrast onto it (and its orthogonal complement) yields the two
canonical components that drive detection and refinement.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .contrast import StackedPairMatrix
from .exceptions import DimensionError, RankError
from .solver import SolverConfig, SolverTrace, solve


class SubspaceTieWarning(UserWarning):
    """The requested rank splits a tied singular value; the subspace is ambiguous."""


@dataclass(frozen=True)
class RowProjector:
    """Rank-r orthogonal projector onto a row subspace of dimension ``dim``.

    ``matrix`` is the p x p symmetric idempotent projector; ``basis`` holds
    orthonormal columns spanning the subspace. Basis signs are arbitrary:
    only the projector is contractual.
    """

    dim: int
    rank: int
    matrix: np.ndarray
    basis: np.ndarray
    ambiguous: bool = False

    def complement(self) -> np.ndarray:
        """Projector onto the orthogonal complement."""
        return np.eye(self.dim) - self.matrix


def row_projector(
    mat: StackedPairMatrix | np.ndarray, rank: int
) -> RowProjector:
    """Projector onto the dominant rank-r right singular subspace of ``mat``.

    Warns (and flags the result) when singular values r and r+1 tie exactly,
    since the subspace is then not uniquely determined.
    """
    arr = mat.data if isinstance(mat, StackedPairMatrix) else np.asarray(mat, float)
    if rank < 1 or rank > min(arr.shape):
        raise RankError(
            f"rank {rank} invalid for a matrix of shape {arr.shape}"
        )
    _, sing, vt = np.linalg.svd(arr, full_matrices=False)
    ambiguous = rank < sing.size and sing[rank - 1] == sing[rank]
    if ambiguous:
        warnings.warn(
            f"singular values {rank} and {rank + 1} are equal; the rank-{rank} "
            "row subspace is not unique",
            SubspaceTieWarning,
            stacklevel=2,
        )
    basis = vt[:rank].T
    return RowProjector(arr.shape[1], rank, basis @ basis.T, basis, ambiguous)


def projector_from_rows(rows: np.ndarray) -> RowProjector:
    """Projector onto the row space of a (full row rank) matrix."""
    rows = np.asarray(rows, dtype=np.float64)
    return row_projector(rows, rank=rows.shape[0])


def canonical_split(
    d: StackedPairMatrix, projector: RowProjector
) -> tuple[StackedPairMatrix, StackedPairMatrix]:
    """Split ``d`` into its components inside and outside the row subspace.

    Returns (d @ P, d - d @ P); the pair reconstructs ``d`` exactly.
    """
    if projector.dim != d.cols:
        raise DimensionError(
            f"projector dimension {projector.dim} does not match {d.cols} columns"
        )
    aligned = d.data @ projector.matrix
    return d.with_data(aligned), d.with_data(d.data - aligned)


def projector_distance(p1: RowProjector, p2: RowProjector) -> float:
    """Spectral norm distance between two projectors."""
    if p1.dim != p2.dim:
        raise DimensionError(f"projector dims differ: {p1.dim} vs {p2.dim}")
    return float(np.linalg.norm(p1.matrix - p2.matrix, 2))


def estimate_rank_largest_gap(singular_values: np.ndarray) -> int:
    """Heuristic rank pick at the largest relative gap of a spectrum.

    Exploratory aid only; the pipeline treats the target rank as a known
    input and never calls this implicitly.
    """
    s = np.asarray(singular_values, dtype=np.float64)
    if s.size < 2 or s[0] <= 0:
        return 1
    floor = s[0] * 1e-12
    ratios = (s[:-1] + floor) / (s[1:] + floor)
    return int(np.argmax(ratios)) + 1


def block_incoherence(mat: StackedPairMatrix, rank: int) -> float:
    """Concentration of the rank-r column space across pair blocks.

    1.0 means the dominant left singular directions spread evenly over
    blocks; larger values mean some client pair dominates.
    """
    u, _, _ = np.linalg.svd(mat.data, full_matrices=False)
    u3 = u[:, :rank].reshape(mat.n_pairs, mat.block_rows, rank)
    per_block = np.einsum("gij,gij->g", u3, u3)
    return float(per_block.max() * mat.n_pairs / rank)


@dataclass(frozen=True)
class DecompositionResult:
    """Solver output plus the canonical post-processing."""

    l_hat: StackedPairMatrix
    s_hat: StackedPairMatrix
    projector: RowProjector
    d_aligned: StackedPairMatrix
    d_orthogonal: StackedPairMatrix
    trace: SolverTrace


def decompose(
    d: StackedPairMatrix, cfg: SolverConfig, rank: int
) -> DecompositionResult:
    """Solve the penalized program and project the contrast onto the result."""
    l_hat, s_hat, trace = solve(d, cfg)
    projector = row_projector(l_hat, rank)
    aligned, orthogonal = canonical_split(d, projector)
    return DecompositionResult(l_hat, s_hat, projector, aligned, orthogonal, trace)
