"""Pure-numpy implementations of the numerical hot loops."""

from __future__ import annotations

import numpy as np

NAME = "numpy"


def svt(m: np.ndarray, tau: float) -> np.ndarray:
    """Shrink singular values of ``m`` by ``tau``, dropping those below it."""
    u, s, vt = np.linalg.svd(m, full_matrices=False)
    shrunk = np.maximum(s - tau, 0.0)
    return (u * shrunk) @ vt


def block_sq_norms(blocks: np.ndarray) -> np.ndarray:
    return np.einsum("gij,gij->g", blocks, blocks)


def bst(blocks: np.ndarray, tau: float) -> np.ndarray:
    """Scale each block by (1 - tau/||block||)+; zero blocks stay zero."""
    norms = np.sqrt(block_sq_norms(blocks))
    safe = np.where(norms > 0.0, norms, 1.0)
    scale = np.where(norms > tau, 1.0 - tau / safe, 0.0)
    return scale[:, None, None] * blocks


def scale_blocks(blocks: np.ndarray, weights: np.ndarray) -> np.ndarray:
    return weights[:, None, None] * blocks


def solve_loop(
    d: np.ndarray,
    n_pairs: int,
    block_rows: int,
    lam_l: float,
    lam_s: float,
    omega: np.ndarray,
    step: float,
    max_iters: int,
    tol: float,
):
    """Proximal gradient iterations for the penalized decomposition.

    Returns (L, S, objectives, iterations, converged, status, residual_norm)
    with L and S flattened to (G*q) x p. status 1 flags a non-finite
    objective (divergence).
    """
    gq, p = d.shape
    d3 = d.reshape(n_pairs, block_rows, p)
    low = np.zeros((gq, p))
    s3 = np.zeros((n_pairs, block_rows, p))
    objs = np.empty(max_iters + 1)
    blk_sq = block_sq_norms(d3)
    objs[0] = 0.5 * float(omega @ blk_sq)
    tau_l = step * lam_l
    tau_s = step * lam_s
    iters = 0
    converged = False
    status = 0
    for m in range(max_iters):
        r3 = d3 - low.reshape(n_pairs, block_rows, p) - s3
        pw3 = omega[:, None, None] * r3
        u, sig, vt = np.linalg.svd(low + step * pw3.reshape(gq, p), full_matrices=False)
        sig = np.maximum(sig - tau_l, 0.0)
        low = (u * sig) @ vt
        zs = s3 + step * pw3
        zn = np.sqrt(block_sq_norms(zs))
        safe = np.where(zn > 0.0, zn, 1.0)
        scale = np.where(zn > tau_s, 1.0 - tau_s / safe, 0.0)
        s3 = scale[:, None, None] * zs
        r3 = d3 - low.reshape(n_pairs, block_rows, p) - s3
        blk_sq = block_sq_norms(r3)
        obj = (
            0.5 * float(omega @ blk_sq)
            + lam_l * float(sig.sum())
            + lam_s * float((scale * zn).sum())
        )
        iters = m + 1
        objs[iters] = obj
        if not np.isfinite(obj):
            status = 1
            break
        if abs(objs[iters - 1] - obj) <= tol * max(1.0, abs(objs[iters - 1])):
            converged = True
            break
    residual = float(np.sqrt(blk_sq.sum()))
    return (
        low,
        s3.reshape(gq, p),
        objs[: iters + 1].copy(),
        iters,
        converged,
        status,
        residual,
    )
