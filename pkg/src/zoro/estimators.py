"""Gradient estimators: fixed-sparsity, opportunistic adaptive, and baselines.

The fixed estimator samples ``m`` directions and recovers an s-sparse
gradient by CoSaMP.  The opportunistic estimator first tries to explain
``s`` cheap measurements with the previous support (restricted least
squares); only when the relative fit residual exceeds the tolerance
``phi`` does it escalate to full CoSaMP and, if needed, grow the
direction set and the sparsity level until the fit passes or the system
becomes square, at which point it falls back to a dense least-squares
gradient.  FDSA (coordinate-wise forward differences) and SPSA
(batched random central differences) are the classical baselines.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np
import scipy.linalg

from .problems import NoiseModel, ProblemSpec, QueryLedger, evaluate
from .sensing import DirectionSet, assemble, sample_raw
from .sparse_recovery import CosampConfig, cosamp, restricted_least_squares

Array = np.ndarray


@dataclass
class GradientEstimate:
    g_hat: Array
    support: Array
    queries_used: int
    relative_fit_residual: float
    method: str
    dense_fallback: bool = False


@dataclass
class OppState:
    """Carry-over state for opportunistic estimation across iterations.

    ``prev_g`` and ``prev_x`` feed the stage-1 drift guard; they are the
    last returned estimate and the point it was taken at.
    """

    dirs: DirectionSet
    prev_support: Array
    prev_g: Optional[Array] = None
    prev_x: Optional[Array] = None
    s_current: int = field(default=0)

    def __post_init__(self) -> None:
        self.prev_support = np.asarray(self.prev_support, dtype=int)
        if self.s_current == 0:
            self.s_current = len(self.prev_support)

    @property
    def m_current(self) -> int:
        return self.dirs.m


def _relative_residual(Z: Array, g: Array, y: Array) -> float:
    y_norm = float(np.linalg.norm(y))
    if y_norm == 0.0:
        return 0.0
    return float(np.linalg.norm(Z @ g - y)) / y_norm


def _stage1_rows(dirs: DirectionSet, support: Array) -> Array:
    """Pick ``|support|`` direction rows whose support restriction is well posed.

    Restricted sign rows live in a set of ``2**|S|`` patterns, so small
    supports make the leading square block singular with noticeable
    probability.  QR column pivoting over the standing pool selects a
    deterministic well-conditioned subset at no query cost.
    """
    k = len(support)
    restricted = dirs.directions[:, support]
    _, _, pivots = scipy.linalg.qr(restricted.T, pivoting=True, mode="economic")
    return np.sort(pivots[:k])


def estimate_gradient(
    problem: ProblemSpec,
    ledger: QueryLedger,
    noise: NoiseModel,
    x: Array,
    s: int,
    delta: float,
    dirs: DirectionSet,
    cosamp_iterations: int = 10,
    warm_start: Optional[Array] = None,
) -> GradientEstimate:
    """Fixed-sparsity estimation: sample all directions, recover by CoSaMP.

    Costs exactly ``m + 1`` queries for a direction set with ``m`` rows.
    """
    start = ledger.count
    with problem.oracle_only():
        y_raw = sample_raw(problem, ledger, noise, x, delta, dirs)
    ms = assemble(y_raw, dirs, delta)
    sol = cosamp(ms.Z, ms.y, CosampConfig(sparsity=s, max_iterations=cosamp_iterations, init=warm_start))
    return GradientEstimate(
        g_hat=sol.values,
        support=sol.support,
        queries_used=ledger.count - start,
        relative_fit_residual=_relative_residual(ms.Z, sol.values, ms.y),
        method="zoro_fixed",
    )


def opportunistic_estimate(
    problem: ProblemSpec,
    ledger: QueryLedger,
    noise: NoiseModel,
    x: Array,
    state: OppState,
    delta: float,
    phi: float,
    cosamp_iterations: int = 10,
    drift_factor: float = 2.0,
) -> tuple[GradientEstimate, OppState]:
    """Adaptive estimation reusing the previous support and past samples.

    Stage 1 samples only ``s = |prev_support|`` directions (s + 1
    queries, unnormalized system) and solves restricted least squares on
    the previous support; if the fit is acceptable it returns
    immediately.  Stage 2 samples the remaining directions (reusing the
    stage-1 samples and base evaluation) and runs CoSaMP at sparsity
    ``s``.  Stage 3 keeps appending ``ceil(ln(d/s))`` fresh directions
    and incrementing ``s`` until the fit passes; if the direction count
    reaches ``d`` first, a dense least-squares gradient is returned with
    ``dense_fallback`` set.

    Stage 1 fits ``|support|`` unknowns to ``|support|`` measurements,
    so its residual alone cannot reject a stale support (a square system
    fits any right-hand side).  The residual test is therefore paired
    with a no-extra-query drift guard built on the gradient Lipschitz
    bound: between consecutive points the true gradient can move by at
    most ``L * |x - prev_x|``, so a stage-1 fit that jumps further than
    ``drift_factor`` times that (plus a small floor for estimation
    slack) is the signature of off-support mass aliasing through the
    square solve, and the exit is refused.  ``phi >= 1`` disables both
    checks and always exits at stage 1.
    """
    if phi <= 0:
        raise ValueError("phi must be positive")
    x = np.asarray(x, dtype=float)
    support = np.asarray(state.prev_support, dtype=int)
    if support.size == 0:
        raise ValueError("opportunistic estimation needs a nonempty previous support")

    d = problem.dimension
    dirs = state.dirs
    s = len(support)
    start_count = ledger.count

    with problem.oracle_only():
        noise.rebase(np.asarray(x, dtype=float))
        base = evaluate(problem, ledger, noise, x)

        # Stage 1: restricted least squares on the previous support.
        sel = _stage1_rows(dirs, support)
        y_head = sample_raw(problem, ledger, noise, x, delta, dirs, rows=sel, base_value=base)
        Z_head = dirs.directions[sel]
        g1 = restricted_least_squares(Z_head, y_head, support)
        res1 = _relative_residual(Z_head, g1, y_head)
        # An ill-conditioned square fit cannot validate the support: its
        # solution carries unbounded nullspace error, so fall through.
        cond_ok = np.linalg.cond(Z_head[:, support]) < 1e8
        drift_ok = True
        if state.prev_g is not None and state.prev_x is not None:
            allowed = problem.lipschitz * float(np.linalg.norm(x - state.prev_x))
            slack = 0.25 * float(np.linalg.norm(state.prev_g))
            drift_ok = float(np.linalg.norm(g1 - state.prev_g)) <= drift_factor * allowed + slack
        if phi >= 1.0 or (res1 <= phi and drift_ok and cond_ok):
            return (
                GradientEstimate(
                    g_hat=g1,
                    support=support,
                    queries_used=ledger.count - start_count,
                    relative_fit_residual=res1,
                    method="zoro_opportunistic",
                ),
                replace(state, s_current=s, prev_g=g1, prev_x=np.array(x, dtype=float)),
            )

        # Stage 2: fill in the remaining directions (stage-1 samples are
        # reused by index) and run CoSaMP.
        m = dirs.m
        rest = np.setdiff1d(np.arange(m), sel)
        y_raw = np.empty(m)
        y_raw[sel] = y_head
        y_raw[rest] = sample_raw(problem, ledger, noise, x, delta, dirs, rows=rest, base_value=base)
        ms = assemble(y_raw, dirs, delta)
        sol = cosamp(ms.Z, ms.y, CosampConfig(sparsity=s, max_iterations=cosamp_iterations))
        res = _relative_residual(ms.Z, sol.values, ms.y)

        # Stage 3: grow measurements and sparsity until the fit passes.
        dense_fallback = False
        g_hat, g_support = sol.values, sol.support
        while res > phi:
            if m >= d:
                g_hat = restricted_least_squares(ms.Z, ms.y, np.arange(d))
                g_support = np.flatnonzero(g_hat)
                res = _relative_residual(ms.Z, g_hat, ms.y)
                dense_fallback = True
                break
            grow = max(1, math.ceil(math.log(d / s)))
            m_new = min(m + grow, d)
            dirs = dirs.extend(m_new - dirs.m)
            y_raw = np.concatenate(
                [y_raw, sample_raw(problem, ledger, noise, x, delta, dirs, start=m, stop=m_new, base_value=base)]
            )
            m = m_new
            s = min(s + 1, d)
            ms = assemble(y_raw, dirs, delta)
            sol = cosamp(ms.Z, ms.y, CosampConfig(sparsity=s, max_iterations=cosamp_iterations))
            res = _relative_residual(ms.Z, sol.values, ms.y)
            g_hat, g_support = sol.values, sol.support

    new_support = g_support if g_support.size else support
    estimate = GradientEstimate(
        g_hat=g_hat,
        support=g_support,
        queries_used=ledger.count - start_count,
        relative_fit_residual=res,
        method="zoro_opportunistic",
        dense_fallback=dense_fallback,
    )
    return estimate, OppState(dirs=dirs, prev_support=new_support, prev_g=g_hat,
                              prev_x=np.array(x, dtype=float))


def fdsa_gradient(
    problem: ProblemSpec,
    ledger: QueryLedger,
    noise: NoiseModel,
    x: Array,
    delta: float,
) -> GradientEstimate:
    """Forward differences along all canonical directions (d + 1 queries)."""
    if delta <= 0:
        raise ValueError("sampling radius delta must be > 0")
    x = np.asarray(x, dtype=float)
    d = problem.dimension
    start = ledger.count
    g = np.empty(d)
    with problem.oracle_only():
        noise.rebase(x)
        base = evaluate(problem, ledger, noise, x)
        for i in range(d):
            step = x.copy()
            step[i] += delta
            g[i] = (evaluate(problem, ledger, noise, step) - base) / delta
    return GradientEstimate(
        g_hat=g,
        support=np.flatnonzero(g),
        queries_used=ledger.count - start,
        relative_fit_residual=0.0,
        method="fdsa",
    )


def spsa_gradient(
    problem: ProblemSpec,
    ledger: QueryLedger,
    noise: NoiseModel,
    x: Array,
    delta: float,
    batch: int = 1,
    rng: Optional[np.random.Generator] = None,
    dirs: Optional[Array] = None,
) -> GradientEstimate:
    """Average of ``batch`` central differences along random sign vectors.

    Each direction costs two queries.  Directions come from ``dirs`` when
    given (mainly for tests), otherwise from the required ``rng``.
    """
    if delta <= 0:
        raise ValueError("sampling radius delta must be > 0")
    if batch < 1:
        raise ValueError("batch must be >= 1")
    x = np.asarray(x, dtype=float)
    d = problem.dimension
    if dirs is None:
        if rng is None:
            raise ValueError("spsa_gradient needs either an rng or explicit directions")
        dirs = rng.integers(0, 2, size=(batch, d)).astype(float) * 2.0 - 1.0
    else:
        dirs = np.asarray(dirs, dtype=float)
        if dirs.shape != (batch, d):
            raise ValueError(f"directions have shape {dirs.shape}, expected ({batch}, {d})")
    start = ledger.count
    g = np.zeros(d)
    with problem.oracle_only():
        noise.rebase(x)
        for z in dirs:
            f_plus = evaluate(problem, ledger, noise, x + delta * z)
            f_minus = evaluate(problem, ledger, noise, x - delta * z)
            g += ((f_plus - f_minus) / (2.0 * delta)) * z
    g /= batch
    return GradientEstimate(
        g_hat=g,
        support=np.flatnonzero(g),
        queries_used=ledger.count - start,
        relative_fit_residual=0.0,
        method="spsa",
    )
