"""Asset tables for the portfolio risk objective.

The table ingests three CSV files (means, standard deviations, and a
correlation matrix) or is generated synthetically from a seeded factor
model.  The covariance is reconstructed as ``C_ij = s_i s_j rho_ij``;
if rounding makes it indefinite, negative eigenvalues are clipped to
zero with a logged warning so the oracle stays well defined.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .problems import DomainError, ProblemSpec
from .rng import make_rng

logger = logging.getLogger(__name__)

Array = np.ndarray


class AssetTableError(ValueError):
    """A CSV file could not be parsed; the message carries line and column."""


@dataclass
class AssetTable:
    means: Array
    stddevs: Array
    correlations: Array

    def __post_init__(self) -> None:
        self.means = np.asarray(self.means, dtype=float)
        self.stddevs = np.asarray(self.stddevs, dtype=float)
        self.correlations = np.asarray(self.correlations, dtype=float)
        d = len(self.means)
        if self.stddevs.shape != (d,):
            raise AssetTableError(f"{len(self.stddevs)} stddevs for {d} means")
        if self.correlations.shape != (d, d):
            raise AssetTableError(f"correlation matrix shape {self.correlations.shape} does not match {d} assets")
        if not np.allclose(self.correlations, self.correlations.T, atol=1e-8):
            raise AssetTableError("correlation matrix is not symmetric")
        if not np.allclose(np.diag(self.correlations), 1.0, atol=1e-8):
            raise AssetTableError("correlation matrix diagonal is not 1")
        if np.any(self.stddevs < 0):
            raise AssetTableError("standard deviations must be nonnegative")

    @property
    def dimension(self) -> int:
        return len(self.means)

    def covariance(self) -> Array:
        cov = np.outer(self.stddevs, self.stddevs) * self.correlations
        eigvals, eigvecs = np.linalg.eigh(cov)
        if eigvals.min() < -1e-12 * max(eigvals.max(), 1.0):
            logger.warning(
                "covariance reconstruction is indefinite (min eigenvalue %.3e); clipping to PSD",
                eigvals.min(),
            )
            eigvals = np.clip(eigvals, 0.0, None)
            cov = (eigvecs * eigvals) @ eigvecs.T
            cov = 0.5 * (cov + cov.T)
        return cov


def _parse_float(token: str, path: Path, line_no: int, col_no: int) -> float:
    try:
        return float(token)
    except ValueError:
        raise AssetTableError(
            f"{path}:{line_no}:{col_no}: cannot parse {token.strip()!r} as a number"
        ) from None


def _read_vector(path: Path) -> Array:
    values = []
    with open(path, "r", encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            values.append(_parse_float(line, path, line_no, 1))
    if not values:
        raise AssetTableError(f"{path}:1:1: file is empty")
    return np.array(values)


def _read_matrix(path: Path) -> Array:
    rows = []
    with open(path, "r", encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            row = [
                _parse_float(tok, path, line_no, col_no)
                for col_no, tok in enumerate(line.split(","), start=1)
            ]
            rows.append(row)
    if not rows:
        raise AssetTableError(f"{path}:1:1: file is empty")
    width = len(rows[0])
    for i, row in enumerate(rows, start=1):
        if len(row) != width:
            raise AssetTableError(f"{path}:{i}:{len(row)}: expected {width} columns, found {len(row)}")
    return np.array(rows)


def load_asset_table(means_path, stddevs_path, correlations_path) -> AssetTable:
    """Read ``means.csv`` / ``stddevs.csv`` (one value per line) and a square correlation CSV."""
    return AssetTable(
        means=_read_vector(Path(means_path)),
        stddevs=_read_vector(Path(stddevs_path)),
        correlations=_read_matrix(Path(correlations_path)),
    )


def synthetic_assets(d: int, seed: int, n_factors: int = 8) -> AssetTable:
    """Seeded factor-model asset table with an exactly PSD correlation matrix."""
    rng = make_rng(seed, 7)
    loadings = rng.standard_normal((d, n_factors)) / np.sqrt(n_factors)
    idio = rng.uniform(0.3, 1.0, size=d)
    cov = loadings @ loadings.T + np.diag(idio)
    scale = 1.0 / np.sqrt(np.diag(cov))
    corr = cov * np.outer(scale, scale)
    np.fill_diagonal(corr, 1.0)
    corr = 0.5 * (corr + corr.T)
    return AssetTable(
        means=rng.uniform(0.002, 0.010, size=d),
        stddevs=rng.uniform(0.01, 0.05, size=d),
        correlations=corr,
    )


def make_portfolio_oracle(assets: AssetTable, lam: float, r: float) -> ProblemSpec:
    """Penalized portfolio risk objective over asset weights.

    ``f(x) = x'Cx / (2 (sum x)^2) + lam * min(m'x / sum(x) - r, 0)^2``.
    Evaluation at any ``x`` with ``sum(x) = 0`` is a domain error.  The
    Lipschitz and Hessian-l1 metadata are estimated by probing the exact
    Hessian near the uniform portfolio (the objective is not globally
    smooth as ``sum(x) -> 0``).
    """
    if lam <= 0:
        raise ValueError("penalty weight lam must be > 0")
    cov = assets.covariance()
    means = assets.means
    d = assets.dimension
    ones = np.ones(d)

    def f(x: Array) -> float:
        total = float(x.sum())
        if total == 0.0:
            raise DomainError("portfolio weights sum to zero")
        risk = float(x @ cov @ x) / (2.0 * total * total)
        shortfall = min(float(means @ x) / total - r, 0.0)
        return risk + lam * shortfall * shortfall

    def grad(x: Array) -> Array:
        total = float(x.sum())
        if total == 0.0:
            raise DomainError("portfolio weights sum to zero")
        cx = cov @ x
        quad = float(x @ cx)
        g = cx / total**2 - (quad / total**3) * ones
        ratio = float(means @ x) / total
        shortfall = ratio - r
        if shortfall < 0.0:
            g = g + 2.0 * lam * shortfall * (means - ratio * ones) / total
        return g

    # Probe curvature near the uniform portfolio to fill in smoothness
    # metadata; a 2x safety factor absorbs mild drift during a run.
    rng = make_rng(0, d)
    x_ref = ones / d
    h_l1 = 0.0
    lip = 0.0
    eps = 1e-6
    for _ in range(3):
        point = x_ref + 0.05 * rng.standard_normal(d) / d
        if abs(point.sum()) < 1e-9:
            continue
        hess = np.empty((d, d))
        g0 = grad(point)
        for j in range(d):
            shifted = point.copy()
            shifted[j] += eps
            hess[:, j] = (grad(shifted) - g0) / eps
        hess = 0.5 * (hess + hess.T)
        h_l1 = max(h_l1, float(np.abs(hess).sum()))
        lip = max(lip, float(np.linalg.norm(hess, 2)))

    return ProblemSpec(
        dimension=d,
        f=f,
        hessian_l1_bound=2.0 * h_l1,
        lipschitz=2.0 * lip if lip > 0 else 1.0,
        f_star=None,
        true_gradient=grad,
        name=f"portfolio(d={d})",
    )
