"""Inexact proximal-gradient driver with sparse gradient estimation.

``zoro_run`` generates the direction set once, estimates the gradient
each iteration (fixed sparsity or opportunistic), applies the proximal
step ``x <- prox_{alpha r}(x - alpha g_hat)``, and records a trace row
per iteration.  ``baseline_run`` drives the same composite step with the
FDSA and SPSA estimators under their classical step-size policies so
query-efficiency comparisons are against the methods as usually run:

* FDSA uses decaying stochastic-approximation gains
  ``a_k = a0 / (k + 1)^0.602`` with ``a0 = 1/L`` (and a matching slow
  decay of the difference radius), the standard practical schedule.
* SPSA uses the variance-normalized constant step ``a = (batch/d)/L``:
  a random sign direction inflates the second moment of the estimate by
  roughly ``d/batch``, and this is the largest constant step that keeps
  the iteration stable without problem-specific tuning.

Objective values in the trace are the exact ``F(x_k)`` (plus the
regularizer), evaluated directly for reporting; they cost no oracle
queries and never feed back into the iteration.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .estimators import (
    GradientEstimate,
    OppState,
    estimate_gradient,
    fdsa_gradient,
    opportunistic_estimate,
    spsa_gradient,
)
from .problems import EvaluationError, NoiseModel, ProblemSpec, QueryLedger, evaluate
from .regularizers import Regularizer, prox, value as reg_value
from .rng import make_rng
from .sensing import rademacher_directions

Array = np.ndarray

DIVERGENCE_FACTOR = 1e6


def default_m(s: int, d: int, b1: float = 4.0) -> int:
    """Measurement count ``ceil(b1 * s * ln(d/s))`` clamped to ``[s+1, d]``.

    For ``s >= d`` the sensing problem is dense already and ``d`` rows
    are returned.
    """
    if s < 1:
        raise ValueError("sparsity must be >= 1")
    if s >= d:
        return d
    m = math.ceil(b1 * s * math.log(d / s))
    return max(s + 1, min(m, d))


def default_delta(sigma: float, H: float, x0: Optional[Array] = None) -> float:
    """Sampling radius balancing noise against curvature: ``2 * sqrt(sigma/H)``.

    At ``sigma = 0`` the balance degenerates to zero, so a small radius
    scaled to the starting point (``1e-4 * max(1, |x0|_inf)``) is used
    instead.
    """
    if H <= 0:
        raise ValueError("Hessian bound H must be > 0")
    if sigma < 0:
        raise ValueError("sigma must be >= 0")
    if sigma == 0.0:
        scale = 1.0 if x0 is None else max(1.0, float(np.max(np.abs(x0))))
        return 1e-4 * scale
    return 2.0 * math.sqrt(sigma / H)


@dataclass
class SolverConfig:
    sparsity: int
    step_size: Optional[float] = None  # default 1/L
    delta: Optional[float] = None  # default per default_delta
    b1: float = 4.0
    estimator: str = "fixed"  # fixed | opportunistic
    phi: float = 0.3
    max_iterations: int = 100
    query_budget: Optional[int] = None
    target_value: Optional[float] = None
    seed: int = 0
    cosamp_iterations: int = 10
    warm_start: bool = False
    backtrack: bool = False

    def __post_init__(self) -> None:
        if self.sparsity < 1:
            raise ValueError("sparsity must be >= 1")
        if self.step_size is not None and self.step_size <= 0:
            raise ValueError("step size must be > 0")
        if self.estimator not in ("fixed", "opportunistic"):
            raise ValueError(f"unknown estimator {self.estimator!r}")
        if self.max_iterations < 1:
            raise ValueError("max_iterations must be >= 1")


@dataclass
class BaselineConfig:
    method: str  # fdsa | spsa
    step_size: Optional[float] = None  # base scale, default 1/L
    delta: Optional[float] = None
    max_iterations: int = 100
    query_budget: Optional[int] = None
    target_value: Optional[float] = None
    seed: int = 0
    batch: int = 1  # spsa only
    gain_decay: Optional[bool] = None  # default: True for fdsa, False for spsa
    decay_exponent: float = 0.602
    radius_exponent: float = 0.101

    def __post_init__(self) -> None:
        if self.method not in ("fdsa", "spsa"):
            raise ValueError(f"unknown baseline method {self.method!r}")
        if self.batch < 1:
            raise ValueError("batch must be >= 1")
        if self.gain_decay is None:
            self.gain_decay = self.method == "fdsa"


@dataclass
class RunTrace:
    """Per-iteration records of one solver run plus its terminal status."""

    iterations: list[int] = field(default_factory=list)
    F: list[float] = field(default_factory=list)
    F_err: list[float] = field(default_factory=list)
    queries: list[int] = field(default_factory=list)
    grad_norms: list[float] = field(default_factory=list)
    support_sizes: list[int] = field(default_factory=list)
    step_norms: list[float] = field(default_factory=list)
    status: str = "iterations"
    queries_total: int = 0

    def record(self, k: int, F: float, f_star: Optional[float], queries: int,
               grad_norm: float, support_size: int, step_norm: float) -> None:
        self.iterations.append(k)
        self.F.append(F)
        self.F_err.append(F - f_star if f_star is not None else float("nan"))
        self.queries.append(queries)
        self.grad_norms.append(grad_norm)
        self.support_sizes.append(support_size)
        self.step_norms.append(step_norm)

    def queries_to_threshold(self, threshold: float) -> Optional[int]:
        """First cumulative query count at which ``F_err <= threshold``."""
        for err, q in zip(self.F_err, self.queries):
            if not math.isnan(err) and err <= threshold:
                return q
        return None


def _objective(problem: ProblemSpec, reg: Regularizer, x: Array) -> float:
    return float(problem.f(x)) + reg_value(reg, x)


def _median_oracle_value(problem: ProblemSpec, ledger: QueryLedger, noise: NoiseModel, x: Array, n: int = 3) -> float:
    # Bounded noise need not be zero-mean, so averaging cannot remove it;
    # a small-sample median is the pragmatic guard against false stops.
    return float(np.median([evaluate(problem, ledger, noise, x) for _ in range(n)]))


def _divergence_threshold(F0: float, f0: float) -> float:
    base = F0 if math.isfinite(F0) else f0
    return DIVERGENCE_FACTOR * (1.0 + abs(base))


def zoro_run(
    problem: ProblemSpec,
    noise: NoiseModel,
    reg: Regularizer,
    x0: Array,
    cfg: SolverConfig,
) -> tuple[Array, RunTrace]:
    """Run the sparse-recovery proximal-gradient loop from ``x0``.

    Directions are generated once up front.  With the opportunistic
    estimator the first iteration still uses the fixed estimator to seed
    a support.  Stops at ``max_iterations``, when the query budget
    cannot cover the next round, when a 3-sample oracle median reaches
    ``target_value``, or when the objective exceeds the divergence
    guard; whichever comes first.
    """
    x = np.array(x0, dtype=float)
    if x.shape != (problem.dimension,):
        raise ValueError(f"x0 has shape {x.shape}, expected ({problem.dimension},)")

    d = problem.dimension
    ledger = QueryLedger()
    m = default_m(cfg.sparsity, d, cfg.b1)
    dirs = rademacher_directions(m, d, cfg.seed)
    sigma = max(noise.sigma, problem.noise_bound)
    delta = cfg.delta if cfg.delta is not None else default_delta(sigma, problem.hessian_l1_bound or 1.0, x)
    alpha = cfg.step_size if cfg.step_size is not None else 1.0 / problem.lipschitz

    trace = RunTrace()
    f0 = float(problem.f(x))
    F0 = f0 + reg_value(reg, x)
    guard = _divergence_threshold(F0, f0)
    trace.record(0, F0, problem.f_star, ledger.count, float("nan"), 0, 0.0)

    opp_state: Optional[OppState] = None
    prev_estimate: Optional[GradientEstimate] = None
    increases = 0
    F_prev = F0

    for k in range(1, cfg.max_iterations + 1):
        min_cost = m + 1
        if cfg.estimator == "opportunistic" and opp_state is not None:
            min_cost = len(opp_state.prev_support) + 1
        if cfg.query_budget is not None and ledger.count + min_cost > cfg.query_budget:
            trace.status = "budget"
            break

        try:
            if cfg.estimator == "opportunistic" and opp_state is not None:
                est, opp_state = opportunistic_estimate(
                    problem, ledger, noise, x, opp_state, delta, cfg.phi,
                    cosamp_iterations=cfg.cosamp_iterations,
                )
            else:
                warm = prev_estimate.g_hat if (cfg.warm_start and prev_estimate is not None) else None
                est = estimate_gradient(
                    problem, ledger, noise, x, cfg.sparsity, delta, dirs,
                    cosamp_iterations=cfg.cosamp_iterations, warm_start=warm,
                )
                if cfg.estimator == "opportunistic":
                    support = est.support if est.support.size else np.arange(min(cfg.sparsity, d))
                    opp_state = OppState(dirs=dirs, prev_support=support,
                                         prev_g=est.g_hat, prev_x=np.array(x, dtype=float))
        except EvaluationError:
            trace.status = "oracle-failure"
            break

        prev_estimate = est
        x_new = prox(reg, x - alpha * est.g_hat, alpha)
        step_norm = float(np.linalg.norm(x_new - x))
        F_new = _objective(problem, reg, x_new)

        stop = None
        if math.isfinite(F_new) and F_new > guard:
            stop = "divergence"
        elif cfg.target_value is not None:
            if _median_oracle_value(problem, ledger, noise, x_new) <= cfg.target_value:
                stop = "target"

        x = x_new
        trace.record(k, F_new, problem.f_star, ledger.count,
                     float(np.linalg.norm(est.g_hat)), int(est.support.size), step_norm)
        if stop is not None:
            trace.status = stop
            break

        if cfg.backtrack:
            increases = increases + 1 if F_new > F_prev else 0
            if increases >= 3:
                alpha *= 0.5
                increases = 0
        F_prev = F_new

    trace.queries_total = ledger.count
    return x, trace


def baseline_run(
    problem: ProblemSpec,
    noise: NoiseModel,
    reg: Regularizer,
    x0: Array,
    cfg: BaselineConfig,
) -> tuple[Array, RunTrace]:
    """Drive the composite step with an FDSA or SPSA gradient estimate."""
    x = np.array(x0, dtype=float)
    if x.shape != (problem.dimension,):
        raise ValueError(f"x0 has shape {x.shape}, expected ({problem.dimension},)")

    d = problem.dimension
    ledger = QueryLedger()
    rng = make_rng(cfg.seed, 1)
    sigma = max(noise.sigma, problem.noise_bound)
    delta0 = cfg.delta if cfg.delta is not None else default_delta(sigma, problem.hessian_l1_bound or 1.0, x)
    base_step = cfg.step_size if cfg.step_size is not None else 1.0 / problem.lipschitz
    if cfg.method == "spsa":
        base_step = base_step * cfg.batch / d
    round_cost = d + 1 if cfg.method == "fdsa" else 2 * cfg.batch

    trace = RunTrace()
    f0 = float(problem.f(x))
    F0 = f0 + reg_value(reg, x)
    guard = _divergence_threshold(F0, f0)
    trace.record(0, F0, problem.f_star, ledger.count, float("nan"), 0, 0.0)

    for k in range(1, cfg.max_iterations + 1):
        if cfg.query_budget is not None and ledger.count + round_cost > cfg.query_budget:
            trace.status = "budget"
            break
        if cfg.gain_decay:
            a_k = base_step / (k + 1) ** cfg.decay_exponent
            c_k = delta0 / (k + 1) ** cfg.radius_exponent
        else:
            a_k, c_k = base_step, delta0

        try:
            if cfg.method == "fdsa":
                est = fdsa_gradient(problem, ledger, noise, x, c_k)
            else:
                est = spsa_gradient(problem, ledger, noise, x, c_k, batch=cfg.batch, rng=rng)
        except EvaluationError:
            trace.status = "oracle-failure"
            break

        x_new = prox(reg, x - a_k * est.g_hat, a_k)
        step_norm = float(np.linalg.norm(x_new - x))
        F_new = _objective(problem, reg, x_new)

        stop = None
        if math.isfinite(F_new) and F_new > guard:
            stop = "divergence"
        elif cfg.target_value is not None:
            if _median_oracle_value(problem, ledger, noise, x_new) <= cfg.target_value:
                stop = "target"

        x = x_new
        trace.record(k, F_new, problem.f_star, ledger.count,
                     float(np.linalg.norm(est.g_hat)), int(est.support.size), step_norm)
        if stop is not None:
            trace.status = stop
            break

    trace.queries_total = ledger.count
    return x, trace
