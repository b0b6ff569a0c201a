"""Greedy s-sparse least squares (CoSaMP) and support-restricted solves.

Solves ``min ||Z v - y||_2  s.t. ||v||_0 <= s`` by compressive sampling
matching pursuit: form the proxy ``Z' r``, merge its top-2s indices with
the current support, least-squares on the merged support, prune back to
the s largest coefficients, repeat.  All least-squares subproblems go
through a column-pivoted orthogonal factorization so rank-deficient
restricted systems are solved in the minimum-norm sense rather than
aborting.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
import scipy.linalg

Array = np.ndarray


@dataclass
class CosampConfig:
    sparsity: int
    max_iterations: int = 10
    halting_tol: float = 1e-8  # relative residual decrease
    init: Optional[Array] = None

    def __post_init__(self) -> None:
        if self.sparsity < 1:
            raise ValueError("sparsity must be >= 1")
        if self.max_iterations < 1:
            raise ValueError("max_iterations must be >= 1")


@dataclass
class SparseSolution:
    values: Array
    support: Array = field(default_factory=lambda: np.array([], dtype=int))
    residual_norm: float = 0.0
    iterations_used: int = 0


def _top_indices(v: Array, k: int) -> Array:
    """Indices of the k largest |v|; ties go to the lower index (stable sort)."""
    if k >= len(v):
        return np.arange(len(v))
    return np.sort(np.argsort(-np.abs(v), kind="stable")[:k])


def _lstsq(A: Array, b: Array) -> Array:
    # gelsy = complete orthogonal factorization with column pivoting;
    # returns the minimum-norm solution for rank-deficient systems.
    sol, _, _, _ = scipy.linalg.lstsq(A, b, lapack_driver="gelsy")
    return sol


def restricted_least_squares(Z: Array, y: Array, support: Array) -> Array:
    """Minimize ``||Z_S v_S - y||`` over coefficients on ``support``, zero elsewhere."""
    support = np.asarray(support, dtype=int)
    if support.size == 0:
        raise ValueError("support must be nonempty")
    d = Z.shape[1]
    if support.min() < 0 or support.max() >= d:
        raise ValueError("support indices out of range")
    out = np.zeros(d)
    out[support] = _lstsq(Z[:, support], y)
    return out


def cosamp(Z: Array, y: Array, cfg: CosampConfig) -> SparseSolution:
    """CoSaMP iteration for ``min ||Z v - y||  s.t.  ||v||_0 <= s``.

    Halts after ``cfg.max_iterations``, when the relative residual
    decrease falls below ``cfg.halting_tol``, or when an iteration would
    increase the residual (the previous iterate is kept, so accepted
    residuals are non-increasing).
    """
    Z = np.asarray(Z, dtype=float)
    y = np.asarray(y, dtype=float)
    m, d = Z.shape
    s = cfg.sparsity
    if s > d:
        raise ValueError(f"sparsity {s} exceeds dimension {d}")
    if s > m:
        warnings.warn(
            f"sparsity {s} exceeds measurement count {m}; recovery is not guaranteed",
            stacklevel=2,
        )

    v = np.zeros(d)
    if cfg.init is not None:
        keep = _top_indices(np.asarray(cfg.init, dtype=float), s)
        v[keep] = np.asarray(cfg.init, dtype=float)[keep]

    y_norm = float(np.linalg.norm(y))
    if y_norm == 0.0:
        return SparseSolution(values=np.zeros(d))

    residual = y - Z @ v
    res_norm = float(np.linalg.norm(residual))
    iterations = 0
    for _ in range(cfg.max_iterations):
        iterations += 1
        proxy = Z.T @ residual
        candidates = _top_indices(proxy, min(2 * s, d))
        merged = np.union1d(candidates, np.flatnonzero(v))
        coeffs = _lstsq(Z[:, merged], y)
        # Re-solve on the pruned support so the reported coefficients and
        # residual are the restricted least-squares optimum for it.
        keep = merged[_top_indices(coeffs, s)]
        pruned = restricted_least_squares(Z, y, keep)

        new_residual = y - Z @ pruned
        new_norm = float(np.linalg.norm(new_residual))
        if new_norm > res_norm:
            iterations -= 1
            break
        improved = res_norm - new_norm
        v, residual, res_norm = pruned, new_residual, new_norm
        if res_norm <= 1e-14 * y_norm or improved < cfg.halting_tol * max(res_norm, 1e-300):
            break

    return SparseSolution(
        values=v,
        support=np.flatnonzero(v),
        residual_norm=res_norm,
        iterations_used=iterations,
    )
