"""Scalar evaluation helpers shared by the test suite and the CLI reporter."""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from typing import Iterable

import numpy as np

from .exceptions import DimensionError


class DegenerateRecallWarning(UserWarning):
    """Recall requested with no contaminated clients; reported as 1 by convention."""


def frob_sq_error(w_hat: np.ndarray, w_true: np.ndarray) -> float:
    """Squared Frobenius distance between two equally shaped matrices."""
    w_hat = np.asarray(w_hat, dtype=np.float64)
    w_true = np.asarray(w_true, dtype=np.float64)
    if w_hat.shape != w_true.shape:
        raise DimensionError(f"shape mismatch: {w_hat.shape} vs {w_true.shape}")
    diff = w_hat - w_true
    return float(np.sum(diff * diff))


def set_metrics(
    c_hat: Iterable[int], c_true: Iterable[int], n_clients: int
) -> tuple[float, float]:
    """(accuracy, contamination recall) of an estimated collaborative set.

    Accuracy counts correctly kept benign plus correctly excluded
    contaminated clients over all clients; recall counts correctly excluded
    contaminated clients over all contaminated ones (1.0 by convention when
    none exist, with a warning).
    """
    hat = set(c_hat)
    true = set(c_true)
    everyone = set(range(n_clients))
    tp = len(hat & true)
    tn = len((everyone - hat) & (everyone - true))
    contaminated = everyone - true
    accuracy = (tp + tn) / n_clients
    if not contaminated:
        warnings.warn(
            "no contaminated clients; recall is 1 by convention",
            DegenerateRecallWarning,
            stacklevel=2,
        )
        return accuracy, 1.0
    return accuracy, tn / len(contaminated)


def oracle_gain_factor(c_size: int, p: int, r: int) -> float:
    """Ideal ratio of refined to local mean squared error.

    Collaboration removes the averaged-out share of the error component
    orthogonal to the shared row space: 1 - ((m-1)/m) * ((p-r)/p) for a
    collaborative set of size m.
    """
    if c_size < 1:
        raise ValueError(f"collaborative set size must be >= 1, got {c_size}")
    if not 0 < r < p:
        raise ValueError(f"need 0 < r < p, got r={r}, p={p}")
    return 1.0 - ((c_size - 1) / c_size) * ((p - r) / p)


@dataclass(frozen=True)
class MethodSummary:
    """Pooled per-client squared-error statistics for one method."""

    method: str
    mean_all: float
    median_all: float
    sd_all: float
    mean_benign: float
    median_benign: float
    sd_benign: float
    replicates: int

    def to_json_dict(self) -> dict:
        return {
            "method": self.method,
            "mean_all": self.mean_all,
            "median_all": self.median_all,
            "sd_all": self.sd_all,
            "mean_benign": self.mean_benign,
            "median_benign": self.median_benign,
            "sd_benign": self.sd_benign,
            "replicates": self.replicates,
        }


def summarize_method(
    method: str,
    per_client_errors: list[np.ndarray],
    benign_sets: list[Iterable[int]],
) -> MethodSummary:
    """Pool per-client errors across replicates, all clients and benign only."""
    all_vals = np.concatenate([np.asarray(e, dtype=np.float64) for e in per_client_errors])
    benign_vals = np.concatenate(
        [
            np.asarray(e, dtype=np.float64)[sorted(set(b))]
            for e, b in zip(per_client_errors, benign_sets)
        ]
    )

    def stats(v: np.ndarray) -> tuple[float, float, float]:
        if v.size == 0:
            return float("nan"), float("nan"), float("nan")
        sd = float(v.std(ddof=1)) if v.size > 1 else 0.0
        return float(v.mean()), float(np.median(v)), sd

    mean_a, med_a, sd_a = stats(all_vals)
    mean_b, med_b, sd_b = stats(benign_vals)
    return MethodSummary(
        method, mean_a, med_a, sd_a, mean_b, med_b, sd_b, len(per_client_errors)
    )
