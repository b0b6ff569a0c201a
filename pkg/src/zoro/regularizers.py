"""Separable regularizers and their proximal operators.

Ships the regularizers the composite step actually needs (identity,
nonnegativity, box, l1); arbitrary extensions plug in through
:func:`custom` with a user-supplied prox callback.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

Array = np.ndarray


@dataclass(frozen=True)
class Regularizer:
    kind: str
    lam: float = 0.0
    lower: Optional[Array] = None
    upper: Optional[Array] = None
    prox_fn: Optional[Callable[[Array, float], Array]] = None
    value_fn: Optional[Callable[[Array], float]] = None


def zero() -> Regularizer:
    return Regularizer(kind="zero")


def nonneg() -> Regularizer:
    return Regularizer(kind="nonneg")


def box(lower, upper) -> Regularizer:
    lower = np.asarray(lower, dtype=float)
    upper = np.asarray(upper, dtype=float)
    if lower.shape != upper.shape:
        raise ValueError("box bounds must have matching shapes")
    if np.any(lower > upper):
        raise ValueError("box requires lower <= upper elementwise")
    return Regularizer(kind="box", lower=lower, upper=upper)


def l1(lam: float) -> Regularizer:
    if lam < 0:
        raise ValueError("l1 weight must be >= 0")
    return Regularizer(kind="l1", lam=lam)


def custom(prox_fn: Callable[[Array, float], Array], value_fn: Optional[Callable[[Array], float]] = None) -> Regularizer:
    return Regularizer(kind="custom", prox_fn=prox_fn, value_fn=value_fn)


def prox(reg: Regularizer, v: Array, alpha: float) -> Array:
    """Evaluate ``prox_{alpha * r}(v) = argmin_w  0.5 ||w - v||^2 + alpha r(w)``."""
    if alpha <= 0:
        raise ValueError("prox step alpha must be > 0")
    v = np.asarray(v, dtype=float)
    if reg.kind == "zero":
        return v.copy()
    if reg.kind == "nonneg":
        return np.maximum(v, 0.0)
    if reg.kind == "box":
        if reg.lower.shape != v.shape:
            raise ValueError("box bounds do not match point dimension")
        return np.clip(v, reg.lower, reg.upper)
    if reg.kind == "l1":
        return np.sign(v) * np.maximum(np.abs(v) - alpha * reg.lam, 0.0)
    if reg.kind == "custom":
        return np.asarray(reg.prox_fn(v, alpha), dtype=float)
    raise ValueError(f"unknown regularizer kind {reg.kind!r}")


def value(reg: Regularizer, x: Array) -> float:
    """r(x), with +inf outside the feasible set of projection regularizers."""
    x = np.asarray(x, dtype=float)
    if reg.kind == "zero":
        return 0.0
    if reg.kind == "nonneg":
        return 0.0 if np.all(x >= 0) else float("inf")
    if reg.kind == "box":
        ok = np.all(x >= reg.lower) and np.all(x <= reg.upper)
        return 0.0 if ok else float("inf")
    if reg.kind == "l1":
        return reg.lam * float(np.abs(x).sum())
    if reg.kind == "custom":
        return 0.0 if reg.value_fn is None else float(reg.value_fn(x))
    raise ValueError(f"unknown regularizer kind {reg.kind!r}")
