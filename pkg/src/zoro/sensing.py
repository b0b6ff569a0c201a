"""Rademacher sensing directions and finite-difference measurements.

One estimation round takes a base evaluation at ``x`` and one evaluation
at ``x + delta * z_i`` per direction, turning the objective into noisy
linear measurements of its gradient: stacked and scaled by ``1/sqrt(m)``
they satisfy ``y = Z g + mu/delta + delta*nu`` where ``|mu_i|`` is
bounded by twice the noise bound over ``sqrt(m)`` and
``|nu_i| <= H / (2 sqrt(m))``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .problems import EvaluationError, NoiseModel, ProblemSpec, QueryLedger, evaluate
from .rng import make_rng

Array = np.ndarray


@dataclass(frozen=True)
class DirectionSet:
    """``m x d`` matrix of i.i.d. fair signs, reproducible from its seed.

    Rows appended by :meth:`extend` are drawn from a stream keyed by
    ``(seed, current_m)``, so a grown set is a deterministic function of
    the original seed and the growth history.
    """

    directions: Array
    seed: int

    @property
    def m(self) -> int:
        return self.directions.shape[0]

    @property
    def d(self) -> int:
        return self.directions.shape[1]

    def extend(self, extra: int) -> "DirectionSet":
        if extra <= 0:
            return self
        rng = make_rng(self.seed, self.m)
        new = rng.integers(0, 2, size=(extra, self.d)).astype(float) * 2.0 - 1.0
        return DirectionSet(np.vstack([self.directions, new]), self.seed)


def rademacher_directions(m: int, d: int, seed: int) -> DirectionSet:
    """Draw ``m`` directions with i.i.d. +-1 entries from the seeded stream."""
    if m < 1 or d < 1:
        raise ValueError("m and d must be >= 1")
    rng = make_rng(seed, 0)
    signs = rng.integers(0, 2, size=(m, d)).astype(float) * 2.0 - 1.0
    return DirectionSet(signs, seed)


@dataclass
class MeasurementSet:
    """Normalized measurements ``y`` and sensing matrix ``Z`` for one round.

    Every row of ``Z`` has Euclidean norm ``sqrt(d/m)``.
    """

    y: Array
    Z: Array
    delta: float
    queries_used: int


def sample_raw(
    problem: ProblemSpec,
    ledger: QueryLedger,
    noise: NoiseModel,
    x: Array,
    delta: float,
    dirs: DirectionSet,
    start: int = 0,
    stop: Optional[int] = None,
    rows: Optional[Array] = None,
    base_value: Optional[float] = None,
) -> Array:
    """Unnormalized forward differences along a subset of the directions.

    The subset is ``start:stop`` or, when given, the explicit row
    indices ``rows``.  The base evaluation at ``x`` is taken once and
    reused for every difference; when ``base_value`` is supplied (from
    an earlier stage of the same round at the same ``x``) no new base
    query is made, so the call costs one query per direction instead of
    one more.
    """
    if delta <= 0:
        raise ValueError("sampling radius delta must be > 0")
    x = np.asarray(x, dtype=float)
    if rows is not None:
        indices = np.asarray(rows, dtype=int)
    else:
        indices = np.arange(dirs.m)[start:stop]
    if base_value is None:
        noise.rebase(x)
        base_value = evaluate(problem, ledger, noise, x)
    y = np.empty(len(indices))
    for i, row in enumerate(indices):
        z = dirs.directions[row]
        try:
            y[i] = (evaluate(problem, ledger, noise, x + delta * z) - base_value) / delta
        except EvaluationError as exc:
            raise EvaluationError(f"query for direction {row} failed: {exc}") from exc
    return y


def assemble(y_raw: Array, dirs: DirectionSet, delta: float, queries_used: Optional[int] = None) -> MeasurementSet:
    """Scale raw differences and directions by ``1/sqrt(m)`` into a sensing system."""
    m = len(y_raw)
    if dirs.m != m:
        raise ValueError(f"{m} measurements for {dirs.m} directions")
    scale = 1.0 / np.sqrt(m)
    return MeasurementSet(
        y=np.asarray(y_raw, dtype=float) * scale,
        Z=dirs.directions * scale,
        delta=delta,
        queries_used=m + 1 if queries_used is None else queries_used,
    )
