"""End-to-end pipeline: contrast, solve, project, detect, refine.

ClairConfig bundles every knob. The penalty weights follow the scaling
lambda_l = c1 / sqrt(K) and lambda_s = c2 * K**-1.5 with uniform block
weights 1/K, so the constants c1, c2 are comparable across client counts.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Sequence

import numpy as np

from .contrast import StackedPairMatrix, build_contrast
from .decomposition import DecompositionResult, decompose
from .detection import DetectionConfig, DetectionResult, vote_set
from .exceptions import ConfigError
from .refinement import RefinementResult, refine
from .solver import SolverConfig


@dataclass(frozen=True)
class ClairConfig:
    """Solver, detection and refinement knobs for one pipeline run."""

    lambda_c1: float = 1.0
    lambda_c2: float = 1.0
    omega: np.ndarray | None = None
    step: float | str = "auto"
    max_iters: int = 2000
    tol: float = 1e-9
    rank: int = 2
    alpha: float = 0.5
    tau: float | None = None
    eps_abs: float = 1e-9

    def __post_init__(self):
        if self.lambda_c1 <= 0 or self.lambda_c2 <= 0:
            raise ConfigError("penalty constants must be positive")
        if self.rank < 1:
            raise ConfigError(f"rank must be >= 1, got {self.rank}")
        self.detection_config()

    def solver_config(self, n_clients: int) -> SolverConfig:
        return SolverConfig(
            lambda_l=self.lambda_c1 / np.sqrt(n_clients),
            lambda_s=self.lambda_c2 * n_clients**-1.5,
            omega=self.omega,
            step=self.step,
            max_iters=self.max_iters,
            tol=self.tol,
        )

    def detection_config(self) -> DetectionConfig:
        return DetectionConfig(alpha=self.alpha, tau=self.tau, eps_abs=self.eps_abs)

    def with_constants(self, c1: float, c2: float) -> "ClairConfig":
        return replace(self, lambda_c1=c1, lambda_c2=c2)


@dataclass(frozen=True)
class PipelineResult:
    contrast: StackedPairMatrix
    decomposition: DecompositionResult
    detection: DetectionResult
    refinement: RefinementResult


def run_pipeline(
    weights: Sequence[np.ndarray], cfg: ClairConfig
) -> PipelineResult:
    """Full pass over preliminary client weights.

    When detection keeps no client, every client falls back to its local
    estimate (refinement over the empty set is undefined), recorded as an
    empty set_used.
    """
    d_hat = build_contrast(weights)
    dec = decompose(d_hat, cfg.solver_config(d_hat.n_clients), cfg.rank)
    det = vote_set(dec.d_orthogonal, cfg.detection_config())
    if det.collaborative_set:
        ref = refine(weights, d_hat, dec.projector, det.collaborative_set)
    else:
        ref = RefinementResult(
            refined={},
            passthrough={
                k: np.asarray(weights[k], dtype=np.float64)
                for k in range(len(weights))
            },
            set_used=(),
        )
    return PipelineResult(d_hat, dec, det, ref)
