"""Collaborative-set estimation by thresholded majority vote.

A client is kept when, for at least a fraction ``alpha`` of the other
clients, the orthogonal-complement block shared with them has Frobenius
norm at most the threshold.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .contrast import StackedPairMatrix, block_norms, pair_index
from .exceptions import ConfigError


@dataclass(frozen=True)
class DetectionConfig:
    """Vote threshold ``alpha`` in [0.5, 1) and block-norm threshold mode.

    ``tau`` is a fixed threshold when given; None selects the data-adaptive
    largest-gap rule. ``eps_abs`` is the absolute floor under which all
    block norms count as zero (the all-benign degenerate case).
    """

    alpha: float = 0.5
    tau: float | None = None
    eps_abs: float = 1e-9

    def __post_init__(self):
        if not 0.5 <= self.alpha < 1.0:
            raise ConfigError(f"alpha must lie in [0.5, 1), got {self.alpha}")
        if self.tau is not None and self.tau < 0:
            raise ConfigError(f"fixed tau must be >= 0, got {self.tau}")
        if self.eps_abs <= 0:
            raise ConfigError(f"eps_abs must be positive, got {self.eps_abs}")


@dataclass(frozen=True)
class DetectionResult:
    collaborative_set: tuple[int, ...]
    vote_fractions: np.ndarray
    tau_used: float
    block_norms: np.ndarray

    def to_json_dict(self) -> dict:
        return {
            "collaborative_set": list(self.collaborative_set),
            "tau_used": self.tau_used,
            "vote_fractions": self.vote_fractions.tolist(),
            "block_norms": self.block_norms.tolist(),
        }


def largest_gap_threshold(norms: np.ndarray, eps_abs: float = 1e-9) -> float:
    """Threshold at the midpoint of the largest consecutive gap.

    Norms are sorted ascending; ties on gap size go to the smallest index,
    which keeps the below-threshold group small. When every norm is below
    ``eps_abs`` there is nothing to separate and the threshold clears them
    all. A single norm is measured against an implicit zero.
    """
    norms = np.asarray(norms, dtype=np.float64)
    if norms.size == 0:
        raise ConfigError("cannot pick a threshold from zero block norms")
    top = float(norms.max())
    if top < eps_abs:
        return top + eps_abs
    srt = np.sort(norms)
    if srt.size == 1:
        return 0.5 * srt[0]
    gaps = np.diff(srt)
    i = int(np.argmax(gaps))
    return float(0.5 * (srt[i] + srt[i + 1]))


def vote_set(s_orthogonal: StackedPairMatrix, cfg: DetectionConfig) -> DetectionResult:
    """Majority vote over per-pair orthogonal-complement block norms."""
    n_clients = s_orthogonal.n_clients
    norms = block_norms(s_orthogonal)
    if cfg.tau is not None:
        tau = float(cfg.tau)
    else:
        tau = largest_gap_threshold(norms, cfg.eps_abs)
    small = norms <= tau
    fractions = np.empty(n_clients)
    for k in range(n_clients):
        votes = [
            small[pair_index(j, k, n_clients).flat]
            for j in range(n_clients)
            if j != k
        ]
        fractions[k] = np.mean(votes)
    kept = tuple(int(k) for k in range(n_clients) if fractions[k] >= cfg.alpha)
    return DetectionResult(kept, fractions, tau, norms)
