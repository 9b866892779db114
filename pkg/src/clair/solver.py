"""Proximal gradient solver for the low-rank plus block-sparse program.

Minimizes, over (L, S),

    0.5 * sum_g omega_g ||P_g(D - L - S)||_F^2
        + lambda_l * ||L||_*  +  lambda_s * sum_g ||P_g(S)||_F

by alternating singular value thresholding on the L update with block soft
thresholding on the S update, both driven by the weighted residual.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ._kernels import get_kernels
from .contrast import StackedPairMatrix, block_norms
from .exceptions import ConfigError, DivergenceError, NumericError


@dataclass(frozen=True)
class SolverConfig:
    """Knobs for one solve.

    ``omega`` may be a length-G array of positive block weights or None for
    the uniform choice 1/K. ``step`` is a positive float or "auto", which
    resolves to 1/(2 max_g omega_g), the largest step with guaranteed
    descent.
    """

    lambda_l: float
    lambda_s: float
    omega: np.ndarray | None = None
    step: float | str = "auto"
    max_iters: int = 2000
    tol: float = 1e-9

    def __post_init__(self):
        if not self.lambda_l > 0:
            raise ConfigError(f"lambda_l must be positive, got {self.lambda_l}")
        if not self.lambda_s > 0:
            raise ConfigError(f"lambda_s must be positive, got {self.lambda_s}")
        if isinstance(self.step, str):
            if self.step != "auto":
                raise ConfigError(f"step must be positive or 'auto', got {self.step!r}")
        elif not self.step > 0:
            raise ConfigError(f"step must be positive or 'auto', got {self.step}")
        if self.max_iters < 1:
            raise ConfigError(f"max_iters must be >= 1, got {self.max_iters}")
        if self.tol < 0:
            raise ConfigError(f"tol must be >= 0, got {self.tol}")
        if self.omega is not None:
            om = np.asarray(self.omega, dtype=np.float64)
            if om.ndim != 1 or not np.all(om > 0):
                raise ConfigError("omega must be a 1-d array of positive weights")
            object.__setattr__(self, "omega", om)

    def resolve_omega(self, n_pairs: int, n_clients: int) -> np.ndarray:
        if self.omega is None:
            return np.full(n_pairs, 1.0 / n_clients)
        if self.omega.size != n_pairs:
            raise ConfigError(
                f"omega has {self.omega.size} weights but the problem has "
                f"{n_pairs} pairs"
            )
        return self.omega

    def resolve_step(self, omega: np.ndarray) -> float:
        if self.step == "auto":
            return 1.0 / (2.0 * float(omega.max()))
        return float(self.step)


@dataclass(frozen=True)
class SolverTrace:
    """Per-solve diagnostics.

    ``objectives[m]`` is the objective at iterate m (index 0 is the zero
    initializer), nonincreasing whenever the step respects the descent
    bound.
    """

    objectives: np.ndarray
    iterations: int
    converged: bool
    residual_norm: float


def svt(m: np.ndarray, tau: float) -> np.ndarray:
    """Singular value thresholding: shrink the spectrum of ``m`` by ``tau``."""
    if tau < 0:
        raise ConfigError(f"threshold must be >= 0, got {tau}")
    m = np.asarray(m, dtype=np.float64)
    if not np.all(np.isfinite(m)):
        raise NumericError("cannot take the SVD of a non-finite matrix")
    return get_kernels().svt(m, float(tau))


def bst(s: StackedPairMatrix, tau: float) -> StackedPairMatrix:
    """Block soft thresholding: scale each block by (1 - tau/||block||)+."""
    if tau < 0:
        raise ConfigError(f"threshold must be >= 0, got {tau}")
    out = get_kernels().bst(s.blocks, float(tau))
    return s.with_data(out.reshape(s.shape))


def apply_pomega(s: StackedPairMatrix, omega: np.ndarray) -> StackedPairMatrix:
    """Multiply block g by omega_g."""
    om = np.asarray(omega, dtype=np.float64)
    if om.ndim != 1 or om.size != s.n_pairs:
        raise ConfigError(
            f"expected {s.n_pairs} block weights, got shape {om.shape}"
        )
    if not np.all(om > 0):
        raise ConfigError("block weights must be positive")
    out = get_kernels().scale_blocks(s.blocks, om)
    return s.with_data(out.reshape(s.shape))


def objective(
    low: StackedPairMatrix,
    s: StackedPairMatrix,
    d: StackedPairMatrix,
    cfg: SolverConfig,
) -> float:
    """Penalized objective value at (L, S)."""
    omega = cfg.resolve_omega(d.n_pairs, d.n_clients)
    resid = d.blocks - low.blocks - s.blocks
    loss = 0.5 * float(omega @ np.einsum("gij,gij->g", resid, resid))
    nuclear = float(np.linalg.svd(low.data, compute_uv=False).sum())
    blk1 = float(block_norms(s).sum())
    return loss + cfg.lambda_l * nuclear + cfg.lambda_s * blk1


def solve(
    d: StackedPairMatrix, cfg: SolverConfig
) -> tuple[StackedPairMatrix, StackedPairMatrix, SolverTrace]:
    """Run the proximal gradient iteration from (0, 0) on contrast ``d``.

    Stops after ``max_iters`` iterations or once the relative objective
    change over one iteration drops below ``tol`` (measured against
    max(1, |previous|)).
    """
    omega = cfg.resolve_omega(d.n_pairs, d.n_clients)
    step = cfg.resolve_step(omega)
    kern = get_kernels()
    low, s, objs, iters, converged, status, residual = kern.solve_loop(
        d.data,
        d.n_pairs,
        d.block_rows,
        cfg.lambda_l,
        cfg.lambda_s,
        omega,
        step,
        cfg.max_iters,
        cfg.tol,
    )
    if status != 0:
        raise DivergenceError(
            f"objective became non-finite at iteration {iters}; "
            "check the step size and weights"
        )
    trace = SolverTrace(objs, iters, converged, residual)
    return d.with_data(low), d.with_data(s), trace


def stationarity_ratios(
    d: StackedPairMatrix,
    low: StackedPairMatrix,
    s: StackedPairMatrix,
    cfg: SolverConfig,
) -> tuple[float, float]:
    """Optimality certificate ratios at (L, S).

    Returns (||P_omega R||_op / lambda_l, max_g ||P_g(P_omega R)||_F /
    lambda_s) for R = D - L - S; both are <= 1 at an exact optimum.
    """
    omega = cfg.resolve_omega(d.n_pairs, d.n_clients)
    resid = d.blocks - low.blocks - s.blocks
    weighted = omega[:, None, None] * resid
    flat = weighted.reshape(d.shape)
    op = float(np.linalg.norm(flat, 2))
    blk = float(np.sqrt(np.einsum("gij,gij->g", weighted, weighted)).max())
    return op / cfg.lambda_l, blk / cfg.lambda_s


def penalty_ratio_window(
    incoherence: float,
    rank: int,
    n_contaminated_pairs: int,
    n_pairs: int,
    a: float = 0.9,
    b: float = 0.9,
) -> tuple[float, float]:
    """Window of lambda_s / lambda_l ratios compatible with row-space recovery.

    ``incoherence`` is the block concentration factor of the low-rank column
    space (1 = perfectly spread), ``n_contaminated_pairs`` the number of
    blocks allowed to carry sparse signal. When the returned lower bound is
    not positive it is vacuous and any ratio below the upper bound works.
    """
    if not (0 < a < 1 and 0 < b < 1):
        raise ConfigError("window parameters a, b must lie in (0, 1)")
    root_all = np.sqrt(incoherence * rank / n_pairs)
    root_contam = np.sqrt(incoherence * rank * n_contaminated_pairs / n_pairs)
    denom = b - (1.0 + a) * root_contam
    lower = root_all / denom if denom > 0 else 0.0
    upper = a / ((1.0 + a) * np.sqrt(n_contaminated_pairs))
    return lower, upper
