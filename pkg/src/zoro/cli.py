"""Command-line harness: run experiments, reports, sweeps, and the Huber demo.

Exit codes: 0 on success, 2 for configuration errors, 3 for I/O errors,
1 for anything else.  Failures print a single machine-readable JSON line
to stderr: ``{"error": "<kind>", "message": "..."}``.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .assets import AssetTableError
from .bench import (
    ConfigError,
    build_problem,
    compressibility_report,
    dimension_sweep,
    huber_divergence_demo,
    parse_experiment_file,
    run_experiment,
)
from .problems import NoiseModel


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="zoro-bench",
        description="Zeroth-order optimization benchmark harness (CSV in, CSV out).",
    )
    parser.add_argument("--quiet", action="store_true", help="suppress progress output")
    sub = parser.add_subparsers(dest="command", required=True)

    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=None, help="override the experiment seed")
    common.add_argument("--out-dir", type=Path, default=None, help="override the output directory")
    common.add_argument("--budget", type=int, default=None, help="override the query budget")
    common.add_argument("--sigma", type=float, default=None, help="override the oracle noise bound")

    run = sub.add_parser("run", parents=[common], help="run an experiment spec file")
    run.add_argument("spec", type=Path)

    rep = sub.add_parser("compress-report", parents=[common], help="gradient compressibility report")
    rep.add_argument("spec", type=Path, help="spec file; only [problem] is used")
    rep.add_argument("--points", type=int, default=100)
    rep.add_argument("--out", type=Path, default=None, help="decay CSV path")

    sweep = sub.add_parser("sweep", parents=[common], help="queries-to-threshold vs dimension")
    sweep.add_argument("spec", type=Path)
    sweep.add_argument("--dims", type=str, required=True, help="comma-separated dimensions")
    sweep.add_argument("--threshold", type=float, default=None, help="relative error threshold")
    sweep.add_argument("--out", type=Path, default=None, help="table CSV path")

    demo = sub.add_parser("huber-demo", parents=[common], help="adversarial-noise divergence demo")
    demo.add_argument("--m", type=float, default=0.1, help="Huber threshold")
    demo.add_argument("--demo-sigma", type=float, default=0.02, help="adversarial noise bound")
    demo.add_argument("--iterations", type=int, default=200)
    return parser


def _apply_overrides(spec, args):
    if args.seed is not None:
        spec.seed = args.seed
    if args.out_dir is not None:
        spec.out_dir = args.out_dir
    if args.budget is not None:
        spec.solver["query_budget"] = str(args.budget)
    if args.sigma is not None:
        spec.noise["sigma"] = str(args.sigma)
        if args.sigma > 0 and spec.noise.get("kind", "none") == "none":
            spec.noise["kind"] = "uniform_bounded"
    return spec


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    say = (lambda *a, **k: None) if args.quiet else print
    try:
        if args.command == "run":
            spec = _apply_overrides(parse_experiment_file(args.spec), args)
            rows = run_experiment(spec)
            say(f"wrote {len(rows)} runs to {spec.out_dir}")
            for row in rows:
                say(
                    f"  {row['method']} rep{row['repetition']}: "
                    f"queries_to_threshold={row['queries_to_threshold']}"
                    f"{' (censored)' if row['censored'] else ''} status={row['status']}"
                )
        elif args.command == "compress-report":
            spec = _apply_overrides(parse_experiment_file(args.spec), args)
            problem = build_problem(spec.problem, spec.seed)
            out = args.out or Path(spec.out_dir) / f"{spec.name}_decay.csv"
            noise = None
            if float(spec.noise.get("sigma", 0)) > 0:
                noise = NoiseModel(spec.noise.get("kind", "uniform_bounded"),
                                   float(spec.noise["sigma"]), seed=spec.seed)
            path = compressibility_report(problem, args.points, spec.seed, out, noise)
            say(f"wrote {path} and {path.with_name(path.stem + '_exponents.csv')}")
        elif args.command == "sweep":
            spec = _apply_overrides(parse_experiment_file(args.spec), args)
            dims = [int(tok) for tok in args.dims.split(",") if tok.strip()]
            out = args.out or Path(spec.out_dir) / f"{spec.name}_sweep.csv"
            rows = dimension_sweep(spec, dims, args.threshold, out)
            say(f"wrote {out}")
            for row in rows:
                say(
                    f"  d={row['dimension']} {row['method']}: mean={row['mean_queries']:.1f}"
                    f" std={row['std_queries']:.1f} censored={row['censored']}"
                )
        elif args.command == "huber-demo":
            out_dir = args.out_dir or Path("results")
            sigma = args.sigma if args.sigma is not None else args.demo_sigma
            result = huber_divergence_demo(
                args.m, sigma, out_dir, seed=args.seed or 0, max_iterations=args.iterations
            )
            say(
                f"status={result['status']} F0={result['F0']:.6g} "
                f"F_final={result['F_final']:.6g} -> {result['csv']}"
            )
        return 0
    except (ConfigError, AssetTableError, ValueError) as exc:
        print(json.dumps({"error": "config", "message": str(exc)}), file=sys.stderr)
        return 2
    except OSError as exc:
        print(json.dumps({"error": "io", "message": str(exc)}), file=sys.stderr)
        return 3
    except Exception as exc:  # pragma: no cover - last-resort reporting
        print(json.dumps({"error": "runtime", "message": str(exc)}), file=sys.stderr)
        return 1


if __name__ == "__main__":
    raise SystemExit(main())
