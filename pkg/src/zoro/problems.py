"""Noisy zeroth-order oracles with query accounting, plus benchmark objectives.

A :class:`ProblemSpec` bundles the objective ``f`` with the smoothness
metadata the optimizer is allowed to know (dimension, noise bound,
Hessian entrywise-l1 bound, gradient Lipschitz constant).  The objective
itself is only reachable through :func:`evaluate`, which adds oracle
noise and charges one unit to a :class:`QueryLedger` per call.

Synthetic problems additionally carry an exact gradient callback.  That
callback exists purely for diagnostics (compressibility reports, error
measurement in tests) and is fenced off from estimators by a guard: any
access while an estimator or solver step is running raises
:class:`GradientAccessError`.
"""

from __future__ import annotations

import contextlib
from dataclasses import dataclass, field
from typing import Callable, Iterator, Optional

import numpy as np

from .rng import make_rng

Array = np.ndarray


class EvaluationError(RuntimeError):
    """The oracle produced a non-finite value or was queried outside its domain."""


class DomainError(EvaluationError):
    """The query point is outside the objective's domain."""


class GradientAccessError(RuntimeError):
    """The exact-gradient diagnostic was consulted inside an estimator."""


@dataclass
class QueryLedger:
    """Monotone counter of oracle evaluations, the primary cost metric."""

    count: int = 0

    def tick(self) -> None:
        self.count += 1


@dataclass
class NoiseModel:
    """Bounded oracle noise: every emitted value satisfies ``|xi| <= sigma``.

    Kinds:

    * ``none``: exact oracle.
    * ``uniform_bounded``: xi drawn i.i.d. from U[-sigma, sigma] (seeded).
    * ``adversarial_sign``: worst-case bounded noise.  The sign of xi
      opposes the finite-difference the caller is about to take:
      ``xi = -sigma * sign(<x - anchor, anchor - target>)``, where the
      anchor is the base point of the current sampling round (set via
      :meth:`rebase`) and ``target`` is the point the adversary repels
      the iterates from (the origin by default).  Noise of this form
      never averages out, which is what makes it adversarial.
    """

    kind: str = "none"
    sigma: float = 0.0
    seed: int = 0
    target: Optional[Array] = None
    _rng: np.random.Generator = field(init=False, repr=False)
    _anchor: Optional[Array] = field(default=None, init=False, repr=False)

    def __post_init__(self) -> None:
        if self.kind not in ("none", "uniform_bounded", "adversarial_sign"):
            raise ValueError(f"unknown noise kind {self.kind!r}")
        if self.sigma < 0:
            raise ValueError("noise bound sigma must be nonnegative")
        self._rng = make_rng(self.seed)

    def rebase(self, x: Array) -> None:
        """Mark ``x`` as the base point of the sampling round about to start."""
        self._anchor = np.array(x, dtype=float, copy=True)

    def draw(self, x: Array) -> float:
        if self.kind == "none" or self.sigma == 0.0:
            return 0.0
        if self.kind == "uniform_bounded":
            return float(self._rng.uniform(-self.sigma, self.sigma))
        # adversarial_sign
        if self._anchor is None:
            return -self.sigma
        away = self._anchor if self.target is None else self._anchor - self.target
        ref = float(np.dot(np.asarray(x, dtype=float) - self._anchor, away))
        return -self.sigma * float(np.sign(ref))


@dataclass
class ProblemSpec:
    """Objective oracle plus the smooth-part metadata assumed by the method.

    ``hessian_l1_bound`` is a bound on the entrywise l1 norm of the
    Hessian, sum_jk |H_jk| (for a diagonal Hessian this is the trace,
    not the largest entry); it controls the curvature bias of
    finite-difference measurements.  ``lipschitz`` bounds the gradient's
    Lipschitz constant and sets the default step size 1/L.
    """

    dimension: int
    f: Callable[[Array], float]
    noise_bound: float = 0.0
    hessian_l1_bound: float = 0.0
    lipschitz: float = 1.0
    f_star: Optional[float] = None
    true_gradient: Optional[Callable[[Array], Array]] = None
    name: str = ""
    _guard_depth: int = field(default=0, init=False, repr=False)

    def __post_init__(self) -> None:
        if self.dimension < 1:
            raise ValueError("dimension must be >= 1")
        if self.noise_bound < 0:
            raise ValueError("noise bound must be >= 0")
        if self.hessian_l1_bound < 0:
            raise ValueError("Hessian l1 bound must be >= 0")
        if self.lipschitz <= 0:
            raise ValueError("Lipschitz constant must be > 0")

    @contextlib.contextmanager
    def oracle_only(self) -> Iterator[None]:
        """Scope in which only the noisy oracle may be consulted.

        Estimators and solver steps run inside this scope; it makes any
        call to :meth:`gradient` raise, which is how the "the estimator
        never peeks at the exact gradient" contract is enforced.
        """
        self._guard_depth += 1
        try:
            yield
        finally:
            self._guard_depth -= 1

    def gradient(self, x: Array) -> Array:
        """Exact gradient diagnostic (synthetics only)."""
        if self.true_gradient is None:
            raise ValueError(f"problem {self.name!r} provides no exact gradient")
        if self._guard_depth > 0:
            raise GradientAccessError(
                "exact gradient consulted inside an estimator or solver step"
            )
        return np.asarray(self.true_gradient(np.asarray(x, dtype=float)), dtype=float)


def evaluate(problem: ProblemSpec, ledger: QueryLedger, noise: NoiseModel, x: Array) -> float:
    """One noisy oracle call: returns ``f(x) + xi`` and charges the ledger.

    The noise term is redrawn on every call, so repeated queries at the
    same point may disagree (by at most ``2 * sigma``).
    """
    x = np.asarray(x, dtype=float)
    if x.shape != (problem.dimension,):
        raise ValueError(
            f"query point has shape {x.shape}, expected ({problem.dimension},)"
        )
    ledger.tick()
    fx = float(problem.f(x))
    if not np.isfinite(fx):
        raise EvaluationError(f"objective returned non-finite value {fx!r}")
    return fx + noise.draw(x)


# ---------------------------------------------------------------------------
# Benchmark objectives
# ---------------------------------------------------------------------------


def make_sparse_quadratic(d: int, s: int, seed: int, low: float = 0.2, high: float = 1.0) -> ProblemSpec:
    """Diagonal quadratic ``f(x) = x'Ax/2`` with exactly ``s`` positive entries.

    The active positions and the diagonal values (uniform on
    ``[low, high]``, which keeps the restricted condition number mild)
    are drawn from the seeded stream.  The gradient ``Ax`` is exactly
    s-sparse everywhere.
    """
    if not 1 <= s <= d:
        raise ValueError(f"need 1 <= s <= d, got s={s}, d={d}")
    rng = make_rng(seed)
    support = np.sort(rng.choice(d, size=s, replace=False))
    values = rng.uniform(low, high, size=s)
    diag = np.zeros(d)
    diag[support] = values

    def f(x: Array) -> float:
        return 0.5 * float(np.dot(diag * x, x))

    def grad(x: Array) -> Array:
        return diag * x

    return ProblemSpec(
        dimension=d,
        f=f,
        hessian_l1_bound=float(values.sum()),
        lipschitz=float(values.max()),
        f_star=0.0,
        true_gradient=grad,
        name=f"sparse_quadratic(d={d}, s={s})",
    )


def make_compressible_quadratic(d: int, omega: float) -> ProblemSpec:
    """Diagonal quadratic with exponentially decaying curvature ``A_ii = exp(-omega*i)``.

    Indices are 1-based in the decay formula, so ``A_11 = exp(-omega)``.
    The gradient is dense but compressible: its sorted magnitudes decay
    geometrically with ratio ``exp(-omega)``.
    """
    if omega <= 0:
        raise ValueError("omega must be > 0")
    diag = np.exp(-omega * np.arange(1, d + 1, dtype=float))

    def f(x: Array) -> float:
        return 0.5 * float(np.dot(diag * x, x))

    def grad(x: Array) -> Array:
        return diag * x

    return ProblemSpec(
        dimension=d,
        f=f,
        hessian_l1_bound=float(diag.sum()),
        lipschitz=float(diag[0]),
        f_star=0.0,
        true_gradient=grad,
        name=f"compressible_quadratic(d={d}, omega={omega})",
    )


def _top_k_indices(x: Array, k: int) -> Array:
    # Stable sort on negated magnitudes: ties resolve to the lowest index.
    return np.argsort(-np.abs(x), kind="stable")[:k]


def make_max_k_squared_sum(d: int, k: int) -> ProblemSpec:
    """Sum of squares of the ``k`` largest-in-magnitude entries of ``x``.

    The gradient is ``2x`` on the active set and zero elsewhere, so it is
    exactly k-sparse while its support moves with ``x`` and can realize
    every k-subset of coordinates.  Ties are broken toward the lowest
    index.  The function is smooth away from ties; ``L = 2`` holds
    almost everywhere.
    """
    if not 1 <= k <= d:
        raise ValueError(f"need 1 <= k <= d, got k={k}, d={d}")

    def f(x: Array) -> float:
        if k == d:
            return float(np.dot(x, x))
        part = np.partition(np.abs(x), d - k)[d - k:]
        return float(np.dot(part, part))

    def grad(x: Array) -> Array:
        g = np.zeros(d)
        active = _top_k_indices(x, k)
        g[active] = 2.0 * x[active]
        return g

    return ProblemSpec(
        dimension=d,
        f=f,
        hessian_l1_bound=2.0 * k,
        lipschitz=2.0,
        f_star=0.0,
        true_gradient=grad,
        name=f"max_k_squared_sum(d={d}, k={k})",
    )


def make_rotated_sparse_quadratic(d: int, density: float, seed: int) -> ProblemSpec:
    """Rotated quadratic ``f(x) = (x - x_true)' Q D Q' (x - x_true)``.

    ``x_true`` is binary with ``ceil(density * d)`` ones at seeded
    positions, ``D`` has uniform(0, 1) diagonal entries and ``Q`` comes
    from the QR factorization of a seeded standard Gaussian matrix
    (signs fixed so the factorization is canonical).  Gradients are
    dense in general but typically compressible at random points.
    """
    if not 0 < density <= 1:
        raise ValueError("density must lie in (0, 1]")
    rng = make_rng(seed)
    n_ones = int(np.ceil(density * d))
    x_true = np.zeros(d)
    x_true[rng.choice(d, size=n_ones, replace=False)] = 1.0
    q, r = np.linalg.qr(rng.standard_normal((d, d)))
    sign = np.sign(np.diag(r))
    sign[sign == 0] = 1.0
    q = q * sign
    dvals = rng.uniform(0.0, 1.0, size=d)
    hess = 2.0 * (q * dvals) @ q.T  # Hessian of (x-t)'QDQ'(x-t)

    def f(x: Array) -> float:
        w = q.T @ (x - x_true)
        return float(np.dot(dvals * w, w))

    def grad(x: Array) -> Array:
        return hess @ (x - x_true)

    return ProblemSpec(
        dimension=d,
        f=f,
        hessian_l1_bound=float(np.abs(hess).sum()),
        lipschitz=2.0 * float(dvals.max()),
        f_star=0.0,
        true_gradient=grad,
        name=f"rotated_sparse_quadratic(d={d}, density={density})",
    )


def make_huber_demo(m: float, sigma: float) -> ProblemSpec:
    """One-dimensional Huber objective: quadratic core, linear tails.

    Used by the divergence demo: with adversarial noise of magnitude
    ``sigma > m**2`` the gradient bound ``|f'| <= m`` is small enough
    that bounded noise can flip every estimated descent direction.
    ``sigma`` here is metadata recorded on the spec; the matching
    :class:`NoiseModel` is constructed by the caller.
    """
    if m <= 0:
        raise ValueError("huber threshold m must be > 0")

    def f(x: Array) -> float:
        v = float(x[0])
        if abs(v) <= m:
            return 0.5 * v * v
        return m * (abs(v) - 0.5 * m)

    def grad(x: Array) -> Array:
        v = float(x[0])
        if abs(v) <= m:
            return np.array([v])
        return np.array([m * np.sign(v)])

    return ProblemSpec(
        dimension=1,
        f=f,
        noise_bound=sigma,
        hessian_l1_bound=1.0,
        lipschitz=1.0,
        f_star=0.0,
        true_gradient=grad,
        name=f"huber(m={m})",
    )
