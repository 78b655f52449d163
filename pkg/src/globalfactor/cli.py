"""Command-line surface: synth, complete, global, sfm, bench.

Exit codes: 0 success, 2 bad configuration or input, 3 completion stopped
at max_iter without converging, 4 singular masked system, 5 degenerate
scene geometry.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import bench as bench_mod
from . import io as gio
from .completion import SolverConfig, complete
from .errors import (DegenerateConfigurationError, MergeConflictError,
                     ParameterError, ShapeMismatchError, SingularSystemError)
from .masked import MaskedMatrix
from .rearrange import DEFAULT_ALPHA, global_rearrange
from .sfm import RigidModel, evaluate_model, factorize_sfm
from .subspace_init import constant_init, heuristic_init, random_init
from .synth import SceneSpec, feature_of_column, gen_scene

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NO_CONVERGENCE = 3
EXIT_SINGULAR = 4
EXIT_DEGENERATE = 5

_SCENE_KEYS = {
    "num_points", "num_frames", "shape_kind", "rotation_sweep", "rotation_tilt",
    "noise_std", "window", "n_interrupted", "visible_frames", "interrupted_run",
    "full_len", "full_margin", "half_len", "seed",
}


def _load_scene_config(path: Path) -> SceneSpec:
    text = path.read_text()
    if path.suffix.lower() == ".json":
        payload = json.loads(text)
    elif path.suffix.lower() == ".toml":
        try:
            import tomllib  # py >= 3.11
        except ModuleNotFoundError:
            import tomli as tomllib
        payload = tomllib.loads(text)
    else:
        raise ParameterError(f"unsupported config extension: {path.suffix}")
    if "kind" in payload:
        payload["shape_kind"] = payload.pop("kind")
    unknown = set(payload) - _SCENE_KEYS
    if unknown:
        raise ParameterError(f"unknown scene config keys: {sorted(unknown)}")
    if "window" in payload:
        payload["window"] = tuple(payload["window"])
    return SceneSpec(**payload)


def _solver_config(args) -> SolverConfig:
    return SolverConfig(rank=args.rank, max_iter=args.max_iter, tol=args.tol,
                        ridge=args.ridge,
                        min_norm_fallback=getattr(args, "min_norm_fallback", False))


def _build_init(obs: MaskedMatrix, args):
    """Initial guess per --init; returns (guess, note)."""
    if args.init == "heuristic":
        guess = heuristic_init(obs, args.rank)
        return guess.guess, {"fallback": guess.fallback, "notes": guess.notes}
    if args.init == "random":
        scale = args.init_scale
        if scale is None:
            observed = obs.values[obs.mask > 0]
            scale = float(np.abs(observed).mean()) if observed.size else 1.0
        rng = np.random.default_rng(args.seed)
        return random_init(obs, scale, rng), {"random_mean": scale}
    if args.init == "constant":
        return constant_init(obs, args.init_value), {"constant": args.init_value}
    raise ParameterError(f"unknown init {args.init!r}")


def _outdir(args) -> Path:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def cmd_synth(args) -> int:
    spec = _load_scene_config(Path(args.config))
    obs, truth, plan = gen_scene(spec)
    out = _outdir(args)
    gio.write_matrix_csv(out / "observation.csv", obs)
    gio.write_mask_csv(out / "mask.csv", obs.mask)
    spec_dict = {k: getattr(spec, k) for k in _SCENE_KEYS}
    spec_dict["window"] = list(spec.window)
    gio.write_truth_sidecar(out / "truth.json", truth, plan, spec_dict)
    gio.write_manifest(out / "manifest.json", "synth",
                       {"config": str(args.config), "spec": spec_dict},
                       ["observation.csv", "mask.csv", "truth.json"])
    print(f"wrote {obs.n_rows}x{obs.n_cols} observation "
          f"({100 * (1 - obs.known_fraction):.1f}% missing) to {out}")
    return EXIT_OK


def cmd_complete(args) -> int:
    obs = gio.read_matrix_csv(args.matrix, args.mask)
    cfg = _solver_config(args)
    init, init_note = _build_init(obs, args)
    result = complete(obs, init, cfg, args.algo)
    out = _outdir(args)
    gio.write_dense_csv(out / "completed.csv", result.completed())
    gio.write_trace_csv(out / "trace.csv", result.error_trace, result.sigma1_trace)
    gio.write_json(out / "result.json", {
        "algo": args.algo, "iterations": result.iterations,
        "converged": result.converged, "final_error": result.final_error,
        "warnings": result.warnings, "init": init_note,
    })
    gio.write_manifest(out / "manifest.json", "complete",
                       {"matrix": str(args.matrix), "mask": args.mask,
                        "algo": args.algo, "rank": args.rank, "tol": args.tol,
                        "max_iter": args.max_iter, "ridge": args.ridge,
                        "init": args.init, "seed": args.seed},
                       ["completed.csv", "trace.csv", "result.json"])
    print(f"{args.algo}: {result.iterations} iterations, "
          f"final masked error {result.final_error:.3e}, converged={result.converged}")
    return EXIT_OK if result.converged else EXIT_NO_CONVERGENCE


def cmd_global(args) -> int:
    obs = gio.read_matrix_csv(args.matrix, args.mask)
    cfg = _solver_config(args)
    result = global_rearrange(obs, args.alpha, cfg, algo=args.algo,
                              screen_max_iter=args.screen_max_iter,
                              proximity_radius=args.proximity_radius)
    out = _outdir(args)
    gio.write_matrix_csv(out / "rearranged.csv", result.rearranged)
    gio.write_mask_csv(out / "rearranged_mask.csv", result.rearranged.mask)
    gio.write_dense_csv(out / "completed.csv", result.fit.completed())
    payload = result.plan.to_json_dict()
    payload["cost"] = result.cost
    payload["steps"] = result.per_step_costs
    gio.write_json(out / "plan.json", payload)
    gio.write_manifest(out / "manifest.json", "global",
                       {"matrix": str(args.matrix), "alpha": args.alpha,
                        "algo": args.algo, "rank": args.rank,
                        "screen_max_iter": args.screen_max_iter},
                       ["rearranged.csv", "rearranged_mask.csv", "plan.json",
                        "completed.csv"])
    merges = sum(1 for g in result.plan.groups if len(g) > 1)
    print(f"{obs.n_cols} -> {result.rearranged.n_cols} columns "
          f"({merges} merged groups), cost {result.cost:.4f}")
    return EXIT_OK


def cmd_sfm(args) -> int:
    obs = gio.read_matrix_csv(args.matrix, args.mask)
    completion_note = None
    if obs.n_observed < obs.values.size:
        cfg = _solver_config(args)
        init, _ = _build_init(obs, args)
        fit = complete(obs, init, cfg, args.algo)
        completed = fit.completed()
        completion_note = {"iterations": fit.iterations, "converged": fit.converged,
                           "final_error": fit.final_error}
    else:
        completed = obs.values
    model = factorize_sfm(completed)
    out = _outdir(args)
    gio.write_json(out / "model.json", model.to_json_dict())
    (out / "shape.ply").write_text(model.to_ply())
    outputs = ["model.json", "shape.ply"]
    if args.truth:
        truth_model, true_plan, _ = gio.read_truth_sidecar(args.truth)
        if model.n_points == truth_model.n_points:
            reference = truth_model
        elif model.n_points == true_plan.n_original:
            feat = feature_of_column(true_plan)
            reference = RigidModel(truth_model.rotations, truth_model.translations,
                                   truth_model.shape[feat])
        else:
            raise ParameterError(
                f"model has {model.n_points} points; truth has "
                f"{truth_model.n_points} features / {true_plan.n_original} columns")
        report = evaluate_model(model, reference)
        gio.write_json(out / "errors.json", report.to_json_dict())
        outputs.append("errors.json")
        print(f"shape RMSE {report.shape_rmse:.4f}, motion RMSE {report.motion_rmse:.4f}")
    gio.write_manifest(out / "manifest.json", "sfm",
                       {"matrix": str(args.matrix), "truth": args.truth,
                        "algo": args.algo, "rank": args.rank,
                        "completion": completion_note},
                       outputs)
    print(f"recovered {model.n_points} points over {model.n_frames} frames")
    return EXIT_OK


def cmd_bench(args) -> int:
    out = _outdir(args)
    kwargs = {"seed": args.seed, "jobs": args.jobs}
    if args.suite == "detect":
        rows = bench_mod.detect(trials=args.trials, sigmas=tuple(args.sigmas),
                                alpha=args.alpha, **kwargs)
    elif args.suite == "init-sensitivity":
        rows = bench_mod.init_sensitivity(trials=args.trials, **kwargs)
    elif args.suite == "noise-sweep":
        rows = bench_mod.noise_sweep(trials=args.trials, **kwargs)
    elif args.suite == "iter-cost":
        rows = bench_mod.iter_cost(seed=args.seed, sizes=tuple(args.sizes))
    else:  # pragma: no cover - argparse choices guard this
        raise ParameterError(f"unknown suite {args.suite!r}")
    bench_mod.write_rows_csv(out / "results.csv", rows)
    gio.write_manifest(out / "manifest.json", "bench",
                       {"suite": args.suite, "trials": args.trials,
                        "seed": args.seed}, ["results.csv"])
    print(f"{args.suite}: {len(rows)} result rows -> {out / 'results.csv'}")
    return EXIT_OK


def _add_solver_flags(parser, with_init=True):
    parser.add_argument("--algo", choices=("rc", "em"), default="rc")
    parser.add_argument("--rank", type=int, default=4)
    parser.add_argument("--tol", type=float, default=1e-9)
    parser.add_argument("--max-iter", type=int, default=100, dest="max_iter")
    parser.add_argument("--ridge", type=float, default=0.0)
    parser.add_argument("--min-norm-fallback", action="store_true",
                        dest="min_norm_fallback",
                        help="minimum-norm solutions for under-determined systems")
    if with_init:
        parser.add_argument("--init", choices=("heuristic", "random", "constant"),
                            default="heuristic")
        parser.add_argument("--init-scale", type=float, default=None,
                            help="mean magnitude for --init random")
        parser.add_argument("--init-value", type=float, default=0.0,
                            help="fill value for --init constant")
        parser.add_argument("--seed", type=int, default=0)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="globalfactor",
        description="Rank-deficient matrix completion and global factorization "
                    "of 2-D feature tracks into rigid 3-D structure and motion.")
    sub = parser.add_subparsers(dest="command", required=True)

    p_synth = sub.add_parser("synth", help="generate a synthetic dataset")
    p_synth.add_argument("--config", required=True, help="TOML or JSON scene spec")
    p_synth.add_argument("--out", required=True)
    p_synth.set_defaults(func=cmd_synth)

    p_complete = sub.add_parser("complete", help="fit a rank-r matrix to a masked CSV")
    p_complete.add_argument("matrix")
    p_complete.add_argument("--mask", default=None)
    p_complete.add_argument("--out", required=True)
    _add_solver_flags(p_complete)
    p_complete.set_defaults(func=cmd_complete)

    p_global = sub.add_parser("global", help="detect re-appearing tracks and merge")
    p_global.add_argument("matrix")
    p_global.add_argument("--mask", default=None)
    p_global.add_argument("--out", required=True)
    p_global.add_argument("--alpha", type=float, default=DEFAULT_ALPHA)
    p_global.add_argument("--screen-max-iter", type=int, default=12,
                          dest="screen_max_iter")
    p_global.add_argument("--proximity-radius", type=float, default=None,
                          dest="proximity_radius",
                          help="optional 3-D distance pre-filter for candidate pairs")
    _add_solver_flags(p_global)
    p_global.set_defaults(func=cmd_global)

    p_sfm = sub.add_parser("sfm", help="recover rigid 3-D structure and motion")
    p_sfm.add_argument("matrix", help="observation or rearranged matrix CSV")
    p_sfm.add_argument("--mask", default=None)
    p_sfm.add_argument("--truth", default=None, help="truth sidecar JSON")
    p_sfm.add_argument("--out", required=True)
    _add_solver_flags(p_sfm)
    p_sfm.set_defaults(func=cmd_sfm)

    p_bench = sub.add_parser("bench", help="run a benchmark suite")
    p_bench.add_argument("suite", choices=sorted(bench_mod.SUITES))
    p_bench.add_argument("--trials", type=int, default=100)
    p_bench.add_argument("--seed", type=int, default=0)
    p_bench.add_argument("--jobs", type=int, default=None,
                         help="worker processes (default: GLOBALFACTOR_JOBS)")
    p_bench.add_argument("--alpha", type=float, default=DEFAULT_ALPHA)
    p_bench.add_argument("--sigmas", type=float, nargs="+", default=[3.0, 5.0, 7.0])
    p_bench.add_argument("--sizes", type=int, nargs="+",
                         default=[24, 48, 96, 192, 384])
    p_bench.add_argument("--out", required=True)
    p_bench.set_defaults(func=cmd_bench)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except SingularSystemError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_SINGULAR
    except DegenerateConfigurationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DEGENERATE
    except (ParameterError, ShapeMismatchError, MergeConflictError,
            FileNotFoundError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
