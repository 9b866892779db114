"""Numba-compiled implementations of the numerical hot loops.

Mirrors numpy_impl function-for-function; importing this module requires
numba. All kernels are single-threaded so results are reproducible.
"""

from __future__ import annotations

import numpy as np
from numba import njit

NAME = "numba"


@njit(cache=True)
def _svt(m, tau):
    u, s, vt = np.linalg.svd(m, full_matrices=False)
    shrunk = np.maximum(s - tau, 0.0)
    return (u * shrunk) @ vt


def svt(m: np.ndarray, tau: float) -> np.ndarray:
    return _svt(np.ascontiguousarray(m, dtype=np.float64), float(tau))


@njit(cache=True)
def _block_sq_norms(blocks):
    g, q, p = blocks.shape
    out = np.empty(g)
    for i in range(g):
        acc = 0.0
        for r in range(q):
            for c in range(p):
                v = blocks[i, r, c]
                acc += v * v
        out[i] = acc
    return out


def block_sq_norms(blocks: np.ndarray) -> np.ndarray:
    return _block_sq_norms(np.ascontiguousarray(blocks, dtype=np.float64))


@njit(cache=True)
def _bst(blocks, tau):
    g, q, p = blocks.shape
    out = np.zeros((g, q, p))
    sq = _block_sq_norms(blocks)
    for i in range(g):
        norm = np.sqrt(sq[i])
        if norm > tau:
            scale = 1.0 - tau / norm
            for r in range(q):
                for c in range(p):
                    out[i, r, c] = scale * blocks[i, r, c]
    return out


def bst(blocks: np.ndarray, tau: float) -> np.ndarray:
    return _bst(np.ascontiguousarray(blocks, dtype=np.float64), float(tau))


@njit(cache=True)
def _scale_blocks(blocks, weights):
    g, q, p = blocks.shape
    out = np.empty((g, q, p))
    for i in range(g):
        w = weights[i]
        for r in range(q):
            for c in range(p):
                out[i, r, c] = w * blocks[i, r, c]
    return out


def scale_blocks(blocks: np.ndarray, weights: np.ndarray) -> np.ndarray:
    return _scale_blocks(
        np.ascontiguousarray(blocks, dtype=np.float64),
        np.ascontiguousarray(weights, dtype=np.float64),
    )


@njit(cache=True)
def _solve_loop(d, n_pairs, block_rows, lam_l, lam_s, omega, step, max_iters, tol):
    gq, p = d.shape
    d3 = d.reshape(n_pairs, block_rows, p)
    low = np.zeros((gq, p))
    s3 = np.zeros((n_pairs, block_rows, p))
    objs = np.empty(max_iters + 1)
    blk_sq = _block_sq_norms(d3)
    acc0 = 0.0
    for g in range(n_pairs):
        acc0 += omega[g] * blk_sq[g]
    objs[0] = 0.5 * acc0
    tau_l = step * lam_l
    tau_s = step * lam_s
    iters = 0
    converged = False
    status = 0
    res_sq = blk_sq.sum()
    for m in range(max_iters):
        l3 = low.reshape(n_pairs, block_rows, p)
        zl = np.empty((gq, p))
        zl3 = zl.reshape(n_pairs, block_rows, p)
        zs = np.empty((n_pairs, block_rows, p))
        for g in range(n_pairs):
            w = step * omega[g]
            for r in range(block_rows):
                for c in range(p):
                    pw = w * (d3[g, r, c] - l3[g, r, c] - s3[g, r, c])
                    zl3[g, r, c] = l3[g, r, c] + pw
                    zs[g, r, c] = s3[g, r, c] + pw
        u, sig, vt = np.linalg.svd(zl, full_matrices=False)
        sig = np.maximum(sig - tau_l, 0.0)
        low = (u * sig) @ vt
        l3 = low.reshape(n_pairs, block_rows, p)
        zn_sq = _block_sq_norms(zs)
        loss = 0.0
        res_sq = 0.0
        blk1 = 0.0
        for g in range(n_pairs):
            zn = np.sqrt(zn_sq[g])
            scale = 0.0
            if zn > tau_s:
                scale = 1.0 - tau_s / zn
            blk1 += scale * zn
            acc = 0.0
            for r in range(block_rows):
                for c in range(p):
                    s_new = scale * zs[g, r, c]
                    s3[g, r, c] = s_new
                    rv = d3[g, r, c] - l3[g, r, c] - s_new
                    acc += rv * rv
            loss += omega[g] * acc
            res_sq += acc
        obj = 0.5 * loss + lam_l * sig.sum() + lam_s * blk1
        iters = m + 1
        objs[iters] = obj
        if not np.isfinite(obj):
            status = 1
            break
        if abs(objs[iters - 1] - obj) <= tol * max(1.0, abs(objs[iters - 1])):
            converged = True
            break
    residual = np.sqrt(res_sq)
    return (
        low,
        s3.reshape(gq, p).copy(),
        objs[: iters + 1].copy(),
        iters,
        converged,
        status,
        residual,
    )


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
    low, s, objs, iters, converged, status, residual = _solve_loop(
        np.ascontiguousarray(d, dtype=np.float64),
        n_pairs,
        block_rows,
        float(lam_l),
        float(lam_s),
        np.ascontiguousarray(omega, dtype=np.float64),
        float(step),
        int(max_iters),
        float(tol),
    )
    return low, s, objs, int(iters), bool(converged), int(status), float(residual)
