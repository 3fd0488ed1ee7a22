"""Command-line interface.

Subcommands: ``rigidity``, ``solve``, ``phase-grid``, ``compare``,
``directions``. Each accepts ``--spec FILE`` (JSON) whose keys mirror the
flag names; explicit flags override spec-file values. Exit codes: 0 success,
2 spec/usage error, 3 non-rigid verdict (rigidity subcommand only),
4 numerical failure.
"""

from __future__ import annotations

import argparse
import json
import sys

import numpy as np

from . import __version__
from .errors import (
    ContractViolationError,
    DegenerateEstimateError,
    DegenerateTruthError,
    ExperimentSpecError,
    InnerSolverError,
    InsufficientSamplesError,
    LineEstimationError,
    LocestError,
    NoWellPosedSubproblemError,
    OracleSizeError,
    SignAmbiguousError,
    TrivialInputError,
    UnsolvableFormationError,
)
from .experiments import (
    ExperimentSpec,
    run_compare,
    run_directions_compare,
    run_phase_grid,
    spec_from_json,
    write_csv,
)
from .fileio import load_formation, save_locations
from .rigidity import extract_maximal_components, spectral_rigidity_test, theorem1_oracle
from .solvers import SOLVERS, SolverConfig

EXIT_OK = 0
EXIT_SPEC_ERROR = 2
EXIT_NOT_RIGID = 3
EXIT_NUMERICAL = 4

_USAGE_ERRORS = (ExperimentSpecError, OracleSizeError, TrivialInputError,
                 ContractViolationError, ValueError, OSError, json.JSONDecodeError)
_NUMERICAL_ERRORS = (InnerSolverError, UnsolvableFormationError, LineEstimationError,
                     InsufficientSamplesError, SignAmbiguousError,
                     NoWellPosedSubproblemError, DegenerateEstimateError,
                     DegenerateTruthError, np.linalg.LinAlgError)


def _load_json_options(path: str | None) -> dict:
    if path is None:
        return {}
    try:
        with open(path, "r", encoding="utf-8") as fh:
            data = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise ExperimentSpecError(f"cannot read spec {path}: {exc}") from exc
    if not isinstance(data, dict):
        raise ExperimentSpecError("spec file must contain a JSON object")
    return data


def _merged(args: argparse.Namespace, defaults: dict) -> dict:
    """Spec-file values fill options the user did not pass on the CLI."""
    opts = _load_json_options(args.spec)
    unknown = set(opts) - set(defaults)
    if unknown:
        raise ExperimentSpecError(f"unknown spec fields: {sorted(unknown)}")
    merged = dict(defaults)
    merged.update(opts)
    for key in defaults:
        flag_value = getattr(args, key, None)
        if flag_value is not None:
            merged[key] = flag_value
    return merged


def cmd_rigidity(args: argparse.Namespace) -> int:
    opts = _merged(args, {"formation": None, "dim": None, "oracle": False, "seed": 0})
    if not opts["formation"]:
        raise ExperimentSpecError("rigidity requires --formation")
    formation = load_formation(opts["formation"])
    dim = int(opts["dim"]) if opts["dim"] is not None else formation.dimension
    if opts["oracle"]:
        rigid = theorem1_oracle(formation.graph, dim)
        print(f"parallel rigid in R^{dim} (combinatorial oracle): {'yes' if rigid else 'no'}")
        if rigid:
            print(f"components: 1 [{' '.join(str(v) for v in range(formation.n))}]")
            return EXIT_OK
    else:
        report = spectral_rigidity_test(formation.graph, dim, seed=int(opts["seed"]))
        rigid = report.is_parallel_rigid
        print(f"parallel rigid in R^{dim}: {'yes' if rigid else 'no'} "
              f"(rank {report.measured_rank}/{report.required_rank}, "
              f"extra nullity {report.nullspace_dim_beyond_trivial})")
        if rigid:
            print(f"components: 1 [{' '.join(str(v) for v in range(formation.n))}]")
            return EXIT_OK
    full = extract_maximal_components(formation.graph, dim, seed=int(opts["seed"]))
    comps = full.components or ()
    print(f"components: {len(comps)}")
    for comp in comps:
        print("  [" + " ".join(str(v) for v in comp) + "]")
    return EXIT_NOT_RIGID


def cmd_solve(args: argparse.Namespace) -> int:
    opts = _merged(args, {"formation": None, "method": "lud", "dim": None,
                          "out": None, "trace": None, "seed": 0})
    if not opts["formation"]:
        raise ExperimentSpecError("solve requires --formation")
    if opts["method"] not in SOLVERS:
        raise ExperimentSpecError(f"unknown method {opts['method']!r}")
    formation = load_formation(opts["formation"])
    if opts["dim"] is not None and int(opts["dim"]) != formation.dimension:
        raise ExperimentSpecError(
            f"--dim {opts['dim']} does not match formation dimension {formation.dimension}")
    config = SolverConfig(seed=int(opts["seed"]))
    result = SOLVERS[opts["method"]](formation, config)
    for w in result.warnings:
        print(f"warning: {w}", file=sys.stderr)
    print(f"method={opts['method']} converged={result.converged} "
          f"iterations={result.iterations} objective={result.cost_trace[-1]:.6g} "
          f"min_dij={float(result.pair_scales.min()):.6g} well_posed={result.well_posed}")
    if opts["out"]:
        save_locations(opts["out"], result.locations)
    if opts["trace"]:
        rows = []
        for k in range(len(result.cost_trace)):
            rows.append((k + 1, float(result.cost_trace[k]),
                         float(result.reg_cost_trace[k]),
                         float(result.max_weight_trace[k]),
                         float(result.min_scale_trace[k])))
        write_csv(opts["trace"],
                  [("method", opts["method"]), ("formation", str(opts["formation"])),
                   ("seed", str(opts["seed"])), ("version", __version__)],
                  ["iter", "objective", "regularized_objective", "max_weight", "min_dij"],
                  rows)
    return EXIT_OK


def _experiment_spec(args: argparse.Namespace, kind: str) -> ExperimentSpec:
    if args.spec:
        overrides = {k: getattr(args, k, None) for k in
                     ("dimension", "n", "q_values", "p_values", "sigma_values", "trials",
                      "master_seed", "solvers", "out", "cameras", "points", "rot_noise",
                      "outlier_fraction", "pairs", "retry_cap", "threads")}
        return spec_from_json(args.spec, overrides=overrides, default_kind=kind)
    data = {"kind": kind}
    for key in ("dimension", "n", "q_values", "p_values", "sigma_values", "trials",
                "master_seed", "solvers", "out", "cameras", "points", "rot_noise",
                "outlier_fraction", "pairs", "retry_cap", "threads"):
        value = getattr(args, key, None)
        if value is not None:
            data[key] = tuple(value) if isinstance(value, list) else value
    return ExperimentSpec(**data)


def cmd_phase_grid(args: argparse.Namespace) -> int:
    spec = _experiment_spec(args, "phase-grid")
    if spec.out is None:
        raise ExperimentSpecError("phase-grid requires --out")
    res = run_phase_grid(spec)
    attained = sum(1 for r in res.cell_rows if r[5] == "ok")
    print(f"phase-grid: {len(res.cell_rows)} cells ({attained} attained) -> {spec.out}")
    return EXIT_OK


def cmd_compare(args: argparse.Namespace) -> int:
    spec = _experiment_spec(args, "compare")
    if spec.out is None:
        raise ExperimentSpecError("compare requires --out")
    res = run_compare(spec)
    print(f"compare: {len(res.rows)} rows ({', '.join(spec.solvers)}) -> {spec.out}")
    return EXIT_OK


def cmd_directions(args: argparse.Namespace) -> int:
    if getattr(args, "scene_seed", None) is not None:
        args.master_seed = args.scene_seed
    spec = _experiment_spec(args, "directions")
    if spec.out is None:
        raise ExperimentSpecError("directions requires --out")
    method = getattr(args, "method", None) or "both"
    if method not in ("robust", "pca", "both"):
        raise ExperimentSpecError(f"unknown method {method!r}")
    methods = ("robust", "pca") if method == "both" else (method,)
    res = run_directions_compare(spec, methods=methods)  # writes spec.out itself
    for row in res.summary_rows:
        print(f"{row[0]}: pairs={row[1]} median={row[2]:.6g} rad "
              f"p90={row[3]:.6g} rad skipped={row[4]}")
    return EXIT_OK


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--spec", help="JSON file with option values (flags override)")
    p.add_argument("--seed", type=int, default=None, help="seed (rigidity/solve commands)")


def _add_experiment_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--dimension", "--dim", dest="dimension", type=int, default=None)
    p.add_argument("--n", type=int, default=None, help="number of locations")
    p.add_argument("--q-values", dest="q_values", type=float, nargs="+", default=None)
    p.add_argument("--p-values", dest="p_values", type=float, nargs="+", default=None)
    p.add_argument("--sigma-values", dest="sigma_values", type=float, nargs="+", default=None)
    p.add_argument("--trials", type=int, default=None)
    p.add_argument("--master-seed", "--seed", dest="master_seed", type=int, default=None)
    p.add_argument("--out", default=None)
    p.add_argument("--retry-cap", dest="retry_cap", type=int, default=None)
    p.add_argument("--threads", type=int, default=None)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="locest",
        description="Robust location estimation from pairwise directions: "
                    "rigidity certification, LUD/CLS/LS solvers, robust direction "
                    "estimation, and synthetic experiment grids.")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("rigidity", help="test a formation file for parallel rigidity")
    _add_common(p)
    p.add_argument("--formation", help="formation file path")
    p.add_argument("--dim", type=int, default=None, help="ambient dimension (default: file's)")
    p.add_argument("--oracle", action="store_true", default=None,
                   help="use the exhaustive combinatorial oracle (small graphs)")
    p.set_defaults(func=cmd_rigidity)

    p = sub.add_parser("solve", help="solve a formation file for locations")
    _add_common(p)
    p.add_argument("--formation", help="formation file path")
    p.add_argument("--method", choices=sorted(SOLVERS), default=None)
    p.add_argument("--dim", type=int, default=None, help="expected dimension (validated)")
    p.add_argument("--out", default=None, help="write estimated locations here")
    p.add_argument("--trace", default=None, help="write per-iteration trace CSV here")
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("phase-grid", help="exact-recovery phase grid over (q, p)")
    p.add_argument("--spec", help="JSON experiment spec")
    _add_experiment_flags(p)
    p.set_defaults(func=cmd_phase_grid)

    p = sub.add_parser("compare", help="solver comparison on identical instances")
    p.add_argument("--spec", help="JSON experiment spec")
    _add_experiment_flags(p)
    p.add_argument("--solvers", nargs="+", choices=sorted(SOLVERS), default=None)
    p.set_defaults(func=cmd_compare)

    p = sub.add_parser("directions", help="robust-vs-PCA direction-estimator comparison")
    p.add_argument("--spec", help="JSON experiment spec")
    _add_experiment_flags(p)
    p.add_argument("--scene-seed", dest="scene_seed", type=int, default=None,
                   help="master seed for scene synthesis (alias of --master-seed)")
    p.add_argument("--cameras", type=int, default=None)
    p.add_argument("--points", type=int, default=None)
    p.add_argument("--rot-noise", dest="rot_noise", type=float, default=None,
                   help="rotation perturbation angle in radians")
    p.add_argument("--outlier-frac", dest="outlier_fraction", type=float, default=None)
    p.add_argument("--pairs", type=int, default=None, help="number of pairs to collect")
    p.add_argument("--method", choices=["robust", "pca", "both"], default=None)
    p.set_defaults(func=cmd_directions)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:  # argparse already printed the message
        return int(exc.code or 0)
    try:
        return args.func(args)
    except _USAGE_ERRORS as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_SPEC_ERROR
    except _NUMERICAL_ERRORS as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except LocestError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_SPEC_ERROR


if __name__ == "__main__":
    raise SystemExit(main())
