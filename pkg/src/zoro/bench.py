"""Experiment harness: configure runs, emit CSV traces, aggregate summaries.

Experiments are described by a declarative INI file (see the README for
the grammar) mapped onto :class:`ExperimentSpec`.  Outputs are plain
CSVs with LF line endings so the paper-style figures can be reproduced
with any plotting tool; nothing is plotted here.  All randomness is
derived from the experiment seed through named sub-streams, so a spec
plus a seed reproduces its output byte for byte.
"""

from __future__ import annotations

import configparser
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from .assets import load_asset_table, make_portfolio_oracle, synthetic_assets
from .estimators import fdsa_gradient
from .problems import (
    NoiseModel,
    ProblemSpec,
    QueryLedger,
    make_compressible_quadratic,
    make_huber_demo,
    make_max_k_squared_sum,
    make_rotated_sparse_quadratic,
    make_sparse_quadratic,
)
from . import regularizers
from .rng import make_rng
from .solver import BaselineConfig, RunTrace, SolverConfig, baseline_run, default_delta, zoro_run

logger = logging.getLogger(__name__)

Array = np.ndarray

METHODS = ("zoro_fixed", "zoro_opportunistic", "fdsa", "spsa")
TRACE_HEADER = "iter,queries,F,F_err,grad_norm,support_size,step_norm"
SUMMARY_HEADER = (
    "method,repetition,queries_to_threshold,censored,threshold,final_F,final_F_err,total_queries,status"
)


class ConfigError(ValueError):
    """The experiment spec is malformed; the message names section and key."""


@dataclass
class ExperimentSpec:
    name: str
    methods: tuple[str, ...]
    repetitions: int
    seed: int
    threshold: float  # relative to the initial objective error
    out_dir: Path
    problem: dict = field(default_factory=dict)
    init: dict = field(default_factory=dict)
    noise: dict = field(default_factory=dict)
    regularizer: dict = field(default_factory=dict)
    solver: dict = field(default_factory=dict)

    def __post_init__(self) -> None:
        if self.repetitions < 1:
            raise ConfigError("experiment.repetitions must be >= 1")
        for method in self.methods:
            if method not in METHODS:
                raise ConfigError(f"unknown method {method!r}; expected one of {METHODS}")
        if not self.methods:
            raise ConfigError("experiment.methods must list at least one method")


def _seed_for(master: int, *keys: int) -> int:
    return int(np.random.SeedSequence([int(master), *map(int, keys)]).generate_state(1)[0])


def _fmt(v) -> str:
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    v = float(v)
    if math.isnan(v):
        return "nan"
    return repr(v)


# ---------------------------------------------------------------------------
# Spec parsing
# ---------------------------------------------------------------------------


_SECTION_KEYS = {
    "experiment": {"name", "methods", "repetitions", "seed", "threshold", "out_dir"},
    "problem": {
        "kind", "d", "s", "seed", "omega", "k", "density", "lam", "r",
        "means", "stddevs", "correlations", "assets_seed", "m",
    },
    "init": {"kind", "scale", "exponent"},
    "noise": {"kind", "sigma"},
    "regularizer": {"kind", "lam", "lower", "upper"},
    "solver": {
        "estimator", "s", "step_size", "delta", "b1", "phi", "max_iterations",
        "query_budget", "target_value", "spsa_batch", "cosamp_iterations", "warm_start",
    },
}


def parse_experiment_file(path) -> ExperimentSpec:
    """Parse the INI experiment grammar into an :class:`ExperimentSpec`."""
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"spec file not found: {path}")
    parser = configparser.ConfigParser(inline_comment_prefixes=("#", ";"))
    try:
        parser.read(path, encoding="utf-8")
    except configparser.Error as exc:
        raise ConfigError(f"{path}: {exc}") from exc

    for section in parser.sections():
        if section not in _SECTION_KEYS:
            raise ConfigError(f"{path}: unknown section [{section}]")
        for key in parser[section]:
            if key not in _SECTION_KEYS[section]:
                raise ConfigError(f"{path}: unknown key {key!r} in section [{section}]")

    def section(name: str) -> dict:
        return dict(parser[name]) if parser.has_section(name) else {}

    exp = section("experiment")
    problem = section("problem")
    if "kind" not in problem:
        raise ConfigError(f"{path}: [problem] must set 'kind'")

    methods = tuple(
        m.strip() for m in exp.get("methods", "zoro_fixed").split(",") if m.strip()
    )
    spec = ExperimentSpec(
        name=exp.get("name", path.stem),
        methods=methods,
        repetitions=int(exp.get("repetitions", "1")),
        seed=int(exp.get("seed", "0")),
        threshold=float(exp.get("threshold", "1e-3")),
        out_dir=Path(exp.get("out_dir", "results")),
        problem=problem,
        init=section("init"),
        noise=section("noise"),
        regularizer=section("regularizer"),
        solver=section("solver"),
    )
    for key in ("means", "stddevs", "correlations"):
        if key in spec.problem and not Path(spec.problem[key]).exists():
            raise ConfigError(f"{path}: [problem] {key} file not found: {spec.problem[key]}")
    return spec


# ---------------------------------------------------------------------------
# Building runs from a spec
# ---------------------------------------------------------------------------


def build_problem(problem_cfg: dict, master_seed: int = 0) -> ProblemSpec:
    cfg = dict(problem_cfg)
    kind = cfg.get("kind")
    seed = int(cfg.get("seed", _seed_for(master_seed, 11)))
    try:
        if kind == "sparse_quadratic":
            return make_sparse_quadratic(int(cfg["d"]), int(cfg["s"]), seed)
        if kind == "compressible_quadratic":
            return make_compressible_quadratic(int(cfg["d"]), float(cfg.get("omega", 0.5)))
        if kind == "max_k_squared_sum":
            return make_max_k_squared_sum(int(cfg["d"]), int(cfg.get("k", 20)))
        if kind == "rotated_sparse_quadratic":
            return make_rotated_sparse_quadratic(int(cfg["d"]), float(cfg.get("density", 0.1)), seed)
        if kind == "portfolio":
            if "means" in cfg:
                table = load_asset_table(cfg["means"], cfg["stddevs"], cfg["correlations"])
            else:
                table = synthetic_assets(int(cfg.get("d", 225)), int(cfg.get("assets_seed", seed)))
            r = float(cfg["r"]) if "r" in cfg else float(table.means.min())
            return make_portfolio_oracle(table, lam=float(cfg.get("lam", 100.0)), r=r)
        if kind == "huber":
            return make_huber_demo(float(cfg.get("m", 0.1)), float(cfg.get("sigma", 0.0)))
    except KeyError as exc:
        raise ConfigError(f"[problem] kind {kind!r} is missing required key {exc}") from None
    raise ConfigError(f"unknown problem kind {kind!r}")


def initial_point(init_cfg: dict, d: int, seed: int, problem: Optional[ProblemSpec] = None) -> Array:
    kind = init_cfg.get("kind", "gaussian")
    scale = float(init_cfg.get("scale", 1.0))
    rng = make_rng(seed, 3)
    if kind == "gaussian":
        x = rng.standard_normal(d)
        return scale * x / np.linalg.norm(x)
    if kind == "powerlaw":
        # Unit-norm compressible start: shuffled power-law magnitudes
        # with random signs.  The default exponent gives gradients whose
        # top entries dominate, the regime adaptive sampling targets.
        exponent = float(init_cfg.get("exponent", 1.5))
        mags = np.arange(1, d + 1, dtype=float) ** -exponent
        signs = rng.integers(0, 2, size=d) * 2.0 - 1.0
        x = mags * signs
        rng.shuffle(x)
        return scale * x / np.linalg.norm(x)
    if kind == "ones":
        return scale * np.ones(d) / d
    if kind == "zeros":
        return np.zeros(d)
    raise ConfigError(f"unknown init kind {kind!r}")


def build_regularizer(reg_cfg: dict, d: int) -> regularizers.Regularizer:
    kind = reg_cfg.get("kind", "zero")
    if kind == "zero":
        return regularizers.zero()
    if kind == "nonneg":
        return regularizers.nonneg()
    if kind == "l1":
        return regularizers.l1(float(reg_cfg.get("lam", 0.0)))
    if kind == "box":
        lower = float(reg_cfg.get("lower", 0.0)) * np.ones(d)
        upper = float(reg_cfg.get("upper", 1.0)) * np.ones(d)
        return regularizers.box(lower, upper)
    raise ConfigError(f"unknown regularizer kind {kind!r}")


def _feasible_start(init_cfg: dict, d: int, seed: int, reg: regularizers.Regularizer) -> Array:
    # Projection regularizers (indicator functions) need a feasible
    # start or the initial objective is infinite; penalties do not.
    x0 = initial_point(init_cfg, d, seed)
    if reg.kind in ("nonneg", "box"):
        return regularizers.prox(reg, x0, 1.0)
    return x0


def _opt_int(cfg: dict, key: str) -> Optional[int]:
    raw = cfg.get(key, "")
    return int(raw) if str(raw).strip() else None


def _opt_float(cfg: dict, key: str) -> Optional[float]:
    raw = cfg.get(key, "")
    return float(raw) if str(raw).strip() else None


def run_method(
    problem: ProblemSpec,
    method: str,
    noise_cfg: dict,
    reg: regularizers.Regularizer,
    x0: Array,
    solver_cfg: dict,
    seed: int,
) -> RunTrace:
    """Run one (method, repetition) cell and return its trace."""
    noise = NoiseModel(
        kind=noise_cfg.get("kind", "none"),
        sigma=float(noise_cfg.get("sigma", problem.noise_bound)),
        seed=_seed_for(seed, 5),
    )
    max_iterations = int(solver_cfg.get("max_iterations", 100))
    common = dict(
        delta=_opt_float(solver_cfg, "delta"),
        step_size=_opt_float(solver_cfg, "step_size"),
        max_iterations=max_iterations,
        query_budget=_opt_int(solver_cfg, "query_budget"),
        target_value=_opt_float(solver_cfg, "target_value"),
        seed=_seed_for(seed, 9),
    )
    if method in ("zoro_fixed", "zoro_opportunistic"):
        cfg = SolverConfig(
            sparsity=int(solver_cfg.get("s", 1)),
            b1=float(solver_cfg.get("b1", 4.0)),
            estimator="fixed" if method == "zoro_fixed" else "opportunistic",
            phi=float(solver_cfg.get("phi", 0.3)),
            cosamp_iterations=int(solver_cfg.get("cosamp_iterations", 10)),
            warm_start=str(solver_cfg.get("warm_start", "false")).lower() == "true",
            **common,
        )
        _, trace = zoro_run(problem, noise, reg, x0, cfg)
        return trace
    cfg = BaselineConfig(method=method, batch=int(solver_cfg.get("spsa_batch", 1)), **common)
    _, trace = baseline_run(problem, noise, reg, x0, cfg)
    return trace


# ---------------------------------------------------------------------------
# CSV emission
# ---------------------------------------------------------------------------


def write_trace_csv(trace: RunTrace, path: Path) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    lines = [TRACE_HEADER]
    for i in range(len(trace.iterations)):
        lines.append(
            ",".join(
                [
                    str(trace.iterations[i]),
                    str(trace.queries[i]),
                    _fmt(trace.F[i]),
                    _fmt(trace.F_err[i]),
                    _fmt(trace.grad_norms[i]),
                    str(trace.support_sizes[i]),
                    _fmt(trace.step_norms[i]),
                ]
            )
        )
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")


def run_experiment(spec: ExperimentSpec) -> list[dict]:
    """Run every (method, repetition) cell of the spec and write CSVs.

    Returns the summary rows.  One trace CSV is written per cell plus a
    ``<name>_summary.csv`` with queries-to-threshold per cell, where the
    absolute threshold is ``spec.threshold`` times the initial objective
    error of that run (censored cells report the exhausted budget).
    """
    problem = build_problem(spec.problem, spec.seed)
    reg = build_regularizer(spec.regularizer, problem.dimension)
    out_dir = Path(spec.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)

    summary_rows: list[dict] = []
    for method_idx, method in enumerate(spec.methods):
        for rep in range(spec.repetitions):
            cell_seed = _seed_for(spec.seed, method_idx, rep)
            x0 = _feasible_start(spec.init, problem.dimension, _seed_for(spec.seed, 100, rep), reg)
            trace = run_method(problem, method, spec.noise, reg, x0, spec.solver, cell_seed)
            path = out_dir / f"{spec.name}_{method}_rep{rep}.csv"
            write_trace_csv(trace, path)

            err0 = trace.F_err[0]
            if math.isnan(err0):
                threshold_abs = float("nan")
                crossing = None
            else:
                threshold_abs = spec.threshold * err0
                crossing = trace.queries_to_threshold(threshold_abs)
            censored = crossing is None
            budget = _opt_int(spec.solver, "query_budget")
            summary_rows.append(
                {
                    "method": method,
                    "repetition": rep,
                    "queries_to_threshold": (budget if budget is not None else trace.queries_total)
                    if censored
                    else crossing,
                    "censored": censored,
                    "threshold": threshold_abs,
                    "final_F": trace.F[-1],
                    "final_F_err": trace.F_err[-1],
                    "total_queries": trace.queries_total,
                    "status": trace.status,
                }
            )

    summary_path = out_dir / f"{spec.name}_summary.csv"
    lines = [SUMMARY_HEADER]
    for row in summary_rows:
        lines.append(
            ",".join(
                [
                    row["method"],
                    str(row["repetition"]),
                    str(row["queries_to_threshold"]),
                    "true" if row["censored"] else "false",
                    _fmt(row["threshold"]),
                    _fmt(row["final_F"]),
                    _fmt(row["final_F_err"]),
                    str(row["total_queries"]),
                    row["status"],
                ]
            )
        )
    with open(summary_path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")
    return summary_rows


# ---------------------------------------------------------------------------
# Reports
# ---------------------------------------------------------------------------


def sorted_gradient_decay(problem: ProblemSpec, x: Array, noise: Optional[NoiseModel] = None) -> Array:
    """Sorted |g|(i) / ||g||_2 at ``x``; probes by FDSA when no exact gradient exists."""
    if problem.true_gradient is not None:
        g = problem.gradient(x)
    else:
        ledger = QueryLedger()
        probe_noise = noise if noise is not None else NoiseModel("none")
        est = fdsa_gradient(problem, ledger, probe_noise, x, delta=1e-6 * max(1.0, float(np.max(np.abs(x)))))
        g = est.g_hat
    norm = float(np.linalg.norm(g))
    if norm == 0.0:
        return np.array([])
    return np.sort(np.abs(g))[::-1] / norm


def fit_compressibility_exponent(decay: Array) -> float:
    """Fit ``|g|_(i) ~ i^(-1/p)`` by log-log regression; nan when undefined."""
    ranks = np.arange(1, len(decay) + 1, dtype=float)
    mask = decay > 0
    if mask.sum() < 2:
        return float("nan")
    slope = np.polyfit(np.log(ranks[mask]), np.log(decay[mask]), 1)[0]
    if slope >= 0:
        return float("nan")
    return -1.0 / slope


def compressibility_report(
    problem: ProblemSpec,
    n_points: int,
    seed: int,
    out_path,
    noise: Optional[NoiseModel] = None,
) -> Path:
    """Emit sorted gradient decays at random unit points plus fitted exponents.

    Writes ``<out>`` with columns ``point,rank,normalized_magnitude`` and
    a sibling ``<out stem>_exponents.csv`` with columns ``point,fitted_p``.
    Points with zero gradient are skipped with a logged note.
    """
    out_path = Path(out_path)
    out_path.parent.mkdir(parents=True, exist_ok=True)
    rng = make_rng(seed, 21)
    decay_lines = ["point,rank,normalized_magnitude"]
    exp_lines = ["point,fitted_p"]
    for i in range(n_points):
        x = rng.standard_normal(problem.dimension)
        x /= np.linalg.norm(x)
        decay = sorted_gradient_decay(problem, x, noise)
        if decay.size == 0:
            logger.warning("zero gradient at sampled point %d; skipped", i)
            continue
        for rank, mag in enumerate(decay, start=1):
            decay_lines.append(f"{i},{rank},{_fmt(mag)}")
        exp_lines.append(f"{i},{_fmt(fit_compressibility_exponent(decay))}")
    with open(out_path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("\n".join(decay_lines) + "\n")
    exp_path = out_path.with_name(out_path.stem + "_exponents.csv")
    with open(exp_path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("\n".join(exp_lines) + "\n")
    return out_path


def dimension_sweep(
    base_spec: ExperimentSpec,
    dims: Sequence[int],
    threshold: Optional[float] = None,
    out_path=None,
) -> list[dict]:
    """Repeat the base experiment across dimensions, tabulating queries-to-threshold.

    Every (dimension, method, repetition) cell gets its own derived seed.
    Cells that never reach the threshold are censored at the configured
    budget (or at the queries actually spent when no budget is set).
    """
    if not dims:
        raise ConfigError("dims must be nonempty")
    if any(d < 2 for d in dims):
        raise ConfigError("every sweep dimension must be >= 2")
    threshold = base_spec.threshold if threshold is None else float(threshold)

    rows: list[dict] = []
    for dim in dims:
        problem_cfg = dict(base_spec.problem, d=str(dim))
        problem = build_problem(problem_cfg, base_spec.seed)
        reg = build_regularizer(base_spec.regularizer, problem.dimension)
        for method_idx, method in enumerate(base_spec.methods):
            queries: list[int] = []
            censored_count = 0
            for rep in range(base_spec.repetitions):
                cell_seed = _seed_for(base_spec.seed, dim, method_idx, rep)
                x0 = _feasible_start(base_spec.init, dim, _seed_for(base_spec.seed, dim, 100, rep), reg)
                trace = run_method(problem, method, base_spec.noise, reg, x0, base_spec.solver, cell_seed)
                err0 = trace.F_err[0]
                crossing = (
                    trace.queries_to_threshold(threshold * err0)
                    if not math.isnan(err0)
                    else None
                )
                if crossing is None:
                    censored_count += 1
                    budget = _opt_int(base_spec.solver, "query_budget")
                    queries.append(budget if budget is not None else trace.queries_total)
                else:
                    queries.append(crossing)
            rows.append(
                {
                    "dimension": dim,
                    "method": method,
                    "mean_queries": float(np.mean(queries)),
                    "std_queries": float(np.std(queries)),
                    "repetitions": base_spec.repetitions,
                    "censored": censored_count,
                }
            )

    if out_path is not None:
        out_path = Path(out_path)
        out_path.parent.mkdir(parents=True, exist_ok=True)
        lines = ["dimension,method,mean_queries,std_queries,repetitions,censored"]
        for row in rows:
            lines.append(
                f"{row['dimension']},{row['method']},{_fmt(row['mean_queries'])},"
                f"{_fmt(row['std_queries'])},{row['repetitions']},{row['censored']}"
            )
        with open(out_path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write("\n".join(lines) + "\n")
    return rows


def huber_divergence_demo(
    m: float,
    sigma: float,
    out_dir,
    seed: int = 0,
    max_iterations: int = 200,
) -> dict:
    """Run the bounded-adversarial-noise failure demo on the 1-d Huber objective.

    With ``sigma > m**2`` the adversary can flip estimated descent
    directions, so the run is expected to end with status ``divergence``
    or with an objective no better than the start; with ``sigma = 0``
    the same configuration converges.  The trace CSV documents whichever
    happens.
    """
    problem = make_huber_demo(m, sigma)
    noise = NoiseModel(
        kind="adversarial_sign" if sigma > 0 else "none",
        sigma=sigma,
        seed=_seed_for(seed, 13),
        target=np.zeros(1),
    )
    x0 = np.array([m / 2.0])
    delta = default_delta(sigma, problem.hessian_l1_bound, x0)
    cfg = SolverConfig(
        sparsity=1,
        delta=delta,
        max_iterations=max_iterations,
        seed=_seed_for(seed, 17),
    )
    x_final, trace = zoro_run(problem, noise, regularizers.zero(), x0, cfg)

    out_dir = Path(out_dir)
    path = out_dir / f"huber_demo_m{m}_sigma{sigma}.csv"
    write_trace_csv(trace, path)
    tail = trace.F[max(1, int(0.8 * len(trace.F))):]
    return {
        "status": trace.status,
        "F0": trace.F[0],
        "F_final": trace.F[-1],
        "plateau_median": float(np.median(tail)) if tail else trace.F[-1],
        "x_final": float(x_final[0]),
        "csv": path,
    }
