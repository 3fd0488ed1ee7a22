"""Reproducible synthetic experiment drivers.

Every run is a pure function of its spec and master seed: each grid cell and
trial derives an independent child seed from (master seed, cell indices,
trial, attempt), instances that fail the rigidity filter are regenerated with
a fresh attempt index up to a retry cap, and emitted rows are sorted by cell
key so that results do not depend on execution order or thread count. CSV
outputs start with a `# key=value` metadata block that echoes every spec
parameter.
"""

from __future__ import annotations

import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, fields

import numpy as np

from . import seeds
from .directions import (
    build_nu_samples,
    estimate_line_pca,
    estimate_line_robust,
    disambiguate_sign,
    inject_outlier_samples,
    perturb_cameras,
    synth_scene,
)
from .errors import (
    ExperimentSpecError,
    InsufficientSamplesError,
    LineEstimationError,
    SignAmbiguousError,
)
from .formation import (
    NoiseModelParams,
    corrupt_directions,
    exact_directions,
    generate_erdos_renyi,
    random_locations,
)
from .metrics import align_scale_translation, angular_error
from .rigidity import spectral_rigidity_test
from .solvers import SOLVERS, SolverConfig

HIST_BINS = 50
HIST_RANGE = (0.0, np.pi / 4.0)


@dataclass(frozen=True)
class ExperimentSpec:
    """Parameters of one experiment run; see the CLI docs for field meanings."""

    kind: str
    dimension: int = 3
    n: int = 100
    q_values: tuple[float, ...] = tuple(np.round(np.linspace(0.1, 1.0, 10), 10))
    p_values: tuple[float, ...] = tuple(np.round(np.linspace(0.0, 0.9, 10), 10))
    sigma_values: tuple[float, ...] = (0.0,)
    trials: int = 10
    master_seed: int = 0
    solvers: tuple[str, ...] = ("lud", "cls", "ls")
    out: str | None = None
    cameras: int = 16
    points: int = 150
    rot_noise: float = 0.0
    outlier_fraction: float = 0.0
    pairs: int = 200
    retry_cap: int = 20
    threads: int = 1

    def __post_init__(self):
        if self.kind not in ("phase-grid", "compare", "directions", "solve", "rigidity"):
            raise ExperimentSpecError(f"unknown experiment kind {self.kind!r}")
        if not self.q_values or not self.p_values or not self.sigma_values:
            raise ExperimentSpecError("parameter grids must be non-empty")
        if self.trials < 1:
            raise ExperimentSpecError("trials must be >= 1")
        if self.kind == "phase-grid" and len(self.sigma_values) != 1:
            raise ExperimentSpecError("phase-grid uses a single sigma value")
        for name in ("q_values", "p_values", "sigma_values", "solvers"):
            object.__setattr__(self, name, tuple(getattr(self, name)))
        unknown = set(self.solvers) - set(SOLVERS)
        if unknown:
            raise ExperimentSpecError(f"unknown solvers: {sorted(unknown)}")

    def metadata(self) -> list[tuple[str, str]]:
        """Parameters echoed into CSV headers.

        The output path is omitted: it is not needed to reproduce the run,
        and identical runs writing to different files must stay
        byte-identical.
        """
        meta = []
        for f in fields(self):
            if f.name == "out":
                continue
            v = getattr(self, f.name)
            if isinstance(v, tuple):
                v = ";".join(str(x) for x in v)
            meta.append((f.name, str(v)))
        return meta


def spec_from_json(path: str, overrides: dict | None = None,
                   default_kind: str | None = None) -> ExperimentSpec:
    """Load a spec from a JSON file, applying CLI overrides on top."""
    try:
        with open(path, "r", encoding="utf-8") as fh:
            data = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise ExperimentSpecError(f"cannot read spec {path}: {exc}") from exc
    if not isinstance(data, dict):
        raise ExperimentSpecError("spec file must contain a JSON object")
    known = {f.name for f in fields(ExperimentSpec)}
    unknown = set(data) - known
    if unknown:
        raise ExperimentSpecError(f"unknown spec fields: {sorted(unknown)}")
    if overrides:
        data.update({k: v for k, v in overrides.items() if v is not None})
    if default_kind and "kind" not in data:
        data["kind"] = default_kind
    for key in ("q_values", "p_values", "sigma_values", "solvers"):
        if key in data and isinstance(data[key], list):
            data[key] = tuple(data[key])
    try:
        return ExperimentSpec(**data)
    except TypeError as exc:
        raise ExperimentSpecError(str(exc)) from exc


def _csv_cell(x) -> str:
    if isinstance(x, float):
        return repr(x)  # shortest representation that round-trips the double
    return str(x)


def write_csv(path: str, metadata: list[tuple[str, str]], header: list[str],
              rows: list[tuple]) -> None:
    lines = [f"# {k}={v}" for k, v in metadata]
    lines.append(",".join(header))
    lines.extend(",".join(_csv_cell(x) for x in row) for row in rows)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")


def generate_rigid_instance(spec: ExperimentSpec, q: float, cell_key: tuple[int, ...]):
    """Draw (graph, locations, instance seed, attempts) for a rigid instance.

    Retries with fresh sub-seeds until the spectral test passes; returns None
    in place of the instance when the retry cap is exhausted.
    """
    for attempt in range(spec.retry_cap):
        inst = seeds.subseed(spec.master_seed, seeds.EXPERIMENT, *cell_key, attempt)
        graph = generate_erdos_renyi(spec.n, q, seeds.subseed(inst, seeds.GRAPH))
        report = spectral_rigidity_test(graph, spec.dimension,
                                        seed=seeds.subseed(inst, seeds.RIGIDITY))
        if report.is_parallel_rigid:
            locations = random_locations(spec.n, spec.dimension,
                                         seeds.subseed(inst, seeds.LOCATIONS))
            return graph, locations, inst, attempt + 1
    return None


def _solve_instance(spec: ExperimentSpec, q: float, p: float, sigma: float,
                    cell_key: tuple[int, ...], solver_names: tuple[str, ...]):
    """One rigid instance, corrupted and solved by each requested solver."""
    drawn = generate_rigid_instance(spec, q, cell_key)
    if drawn is None:
        return None
    graph, locations, inst, attempts = drawn
    clean = exact_directions(locations, graph)
    noisy = corrupt_directions(clean, NoiseModelParams(
        outlier_probability=p, gaussian_sigma=sigma,
        rng_seed=seeds.subseed(inst, seeds.NOISE)))
    config = SolverConfig(seed=seeds.subseed(inst, seeds.SOLVER))
    out = {}
    for name in solver_names:
        result = SOLVERS[name](noisy, config, well_posed=True)
        aligned = align_scale_translation(result.locations, locations)
        out[name] = (aligned.nrmse, result)
    return inst, attempts, out


@dataclass
class PhaseGridResult:
    spec: ExperimentSpec
    trial_rows: list[tuple] = field(default_factory=list)
    cell_rows: list[tuple] = field(default_factory=list)

    TRIAL_HEADER = ["q", "p", "trial", "instance_seed", "attempts", "nrmse"]
    CELL_HEADER = ["q", "p", "trials_recorded", "mean_nrmse", "log10_mean_nrmse", "status"]

    def write(self, path: str) -> None:
        write_csv(path, self.spec.metadata(), self.CELL_HEADER, self.cell_rows)
        trial_path = _sibling(path, "_trials")
        write_csv(trial_path, self.spec.metadata(), self.TRIAL_HEADER, self.trial_rows)


def _sibling(path: str, suffix: str) -> str:
    if path.endswith(".csv"):
        return path[:-4] + suffix + ".csv"
    return path + suffix


def _run_tasks(tasks, worker, threads: int):
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            return list(pool.map(worker, tasks))
    return [worker(t) for t in tasks]


def run_phase_grid(spec: ExperimentSpec) -> PhaseGridResult:
    """Mean LUD NRMSE on a (q, p) grid over rigidity-filtered instances."""
    if spec.kind != "phase-grid":
        raise ExperimentSpecError("spec.kind must be 'phase-grid'")
    sigma = spec.sigma_values[0]
    tasks = [(qi, pi, trial)
             for qi in range(len(spec.q_values))
             for pi in range(len(spec.p_values))
             for trial in range(spec.trials)]

    def worker(task):
        qi, pi, trial = task
        q, p = spec.q_values[qi], spec.p_values[pi]
        solved = _solve_instance(spec, q, p, sigma, (qi, pi, trial), ("lud",))
        if solved is None:
            return (qi, pi, trial, None)
        inst, attempts, out = solved
        return (qi, pi, trial, (inst, attempts, out["lud"][0]))

    results = _run_tasks(tasks, worker, spec.threads)
    results.sort(key=lambda r: r[:3])
    res = PhaseGridResult(spec=spec)
    by_cell: dict[tuple[int, int], list[float]] = {}
    unattainable: set[tuple[int, int]] = set()
    for qi, pi, trial, payload in results:
        q, p = spec.q_values[qi], spec.p_values[pi]
        if payload is None:
            unattainable.add((qi, pi))
            res.trial_rows.append((q, p, trial, -1, spec.retry_cap, float("nan")))
            continue
        inst, attempts, err = payload
        by_cell.setdefault((qi, pi), []).append(err)
        res.trial_rows.append((q, p, trial, inst, attempts, err))
    for qi in range(len(spec.q_values)):
        for pi in range(len(spec.p_values)):
            q, p = spec.q_values[qi], spec.p_values[pi]
            errs = by_cell.get((qi, pi), [])
            if errs:
                mean = float(np.mean(errs))
                log10 = float(np.log10(mean)) if mean > 0 else -np.inf
            else:
                mean, log10 = float("nan"), float("nan")
            status = "ok" if (qi, pi) not in unattainable else "unattainable"
            res.cell_rows.append((q, p, len(errs), mean, log10, status))
    if spec.out:
        res.write(spec.out)
    return res


@dataclass
class CompareResult:
    spec: ExperimentSpec
    rows: list[tuple] = field(default_factory=list)

    HEADER = ["q", "p", "sigma", "trial", "instance_seed", "solver", "nrmse",
              "converged", "iterations"]

    def write(self, path: str) -> None:
        write_csv(path, self.spec.metadata(), self.HEADER, self.rows)

    def mean_nrmse(self, solver: str, p: float, sigma: float) -> float:
        vals = [r[6] for r in self.rows
                if r[5] == solver and r[1] == p and r[2] == sigma and np.isfinite(r[6])]
        return float(np.mean(vals)) if vals else float("nan")


def run_compare(spec: ExperimentSpec) -> CompareResult:
    """Per-solver NRMSE on identical formations across a (q, p, sigma) grid."""
    if spec.kind != "compare":
        raise ExperimentSpecError("spec.kind must be 'compare'")
    tasks = [(qi, pi, si, trial)
             for qi in range(len(spec.q_values))
             for pi in range(len(spec.p_values))
             for si in range(len(spec.sigma_values))
             for trial in range(spec.trials)]

    def worker(task):
        qi, pi, si, trial = task
        q, p, sigma = spec.q_values[qi], spec.p_values[pi], spec.sigma_values[si]
        solved = _solve_instance(spec, q, p, sigma, (qi, pi, si, trial), spec.solvers)
        return (qi, pi, si, trial, solved)

    results = _run_tasks(tasks, worker, spec.threads)
    results.sort(key=lambda r: r[:4])
    res = CompareResult(spec=spec)
    for qi, pi, si, trial, solved in results:
        q, p, sigma = spec.q_values[qi], spec.p_values[pi], spec.sigma_values[si]
        if solved is None:
            for name in spec.solvers:
                res.rows.append((q, p, sigma, trial, -1, name, float("nan"), False, 0))
            continue
        inst, _, out = solved
        for name in spec.solvers:
            err, result = out[name]
            res.rows.append((q, p, sigma, trial, inst, name, err,
                             result.converged, result.iterations))
    if spec.out:
        res.write(spec.out)
    return res


@dataclass
class DirectionsResult:
    spec: ExperimentSpec
    pair_rows: list[tuple] = field(default_factory=list)
    summary_rows: list[tuple] = field(default_factory=list)
    hist_rows: list[tuple] = field(default_factory=list)
    skipped_pairs: int = 0

    PAIR_HEADER = ["method", "scene", "i", "j", "gamma_x", "gamma_y", "gamma_z",
                   "angular_error_to_truth_rad", "condition_flag"]
    SUMMARY_HEADER = ["method", "pairs", "median_rad", "p90_rad", "skipped_pairs"]
    HIST_HEADER = ["method", "bin_lo", "bin_hi", "count"]

    def errors(self, method: str) -> np.ndarray:
        return np.array([r[7] for r in self.pair_rows if r[0] == method])

    def write(self, path: str, single_method: str | None = None) -> None:
        meta = self.spec.metadata()
        if single_method:
            rows = [r[2:] for r in self.pair_rows if r[0] == single_method]
            write_csv(path, meta, self.PAIR_HEADER[2:], rows)
        else:
            write_csv(path, meta, self.PAIR_HEADER, self.pair_rows)
        write_csv(_sibling(path, "_summary"), meta, self.SUMMARY_HEADER, self.summary_rows)
        write_csv(_sibling(path, "_hist"), meta, self.HIST_HEADER, self.hist_rows)


def run_directions_compare(spec: ExperimentSpec,
                           methods: tuple[str, ...] = ("robust", "pca")) -> DirectionsResult:
    """Head-to-head comparison of the robust and PCA line estimators.

    Synthesizes ring scenes, perturbs the camera rotations, injects outlier
    subspace samples, and records per-pair signed angular errors against the
    ground-truth directions until ``spec.pairs`` pairs are collected.
    """
    if spec.kind != "directions":
        raise ExperimentSpecError("spec.kind must be 'directions'")
    res = DirectionsResult(spec=spec)
    collected = 0
    scene_idx = 0
    max_scenes = max(1, 4 * spec.pairs // max(1, spec.cameras * (spec.cameras - 1) // 2) + 4)
    while collected < spec.pairs and scene_idx < max_scenes:
        scene_seed = seeds.subseed(spec.master_seed, seeds.SCENE, scene_idx)
        cameras, _, image_obs = synth_scene(spec.cameras, spec.points, scene_seed)
        est_cameras = perturb_cameras(cameras, spec.rot_noise,
                                      seeds.subseed(scene_seed, seeds.SCENE, 1))
        for i in range(spec.cameras):
            if collected >= spec.pairs:
                break
            for j in range(i + 1, spec.cameras):
                if collected >= spec.pairs:
                    break
                baseline = cameras[i].location - cameras[j].location
                gamma_true = baseline / np.linalg.norm(baseline)
                try:
                    samples = build_nu_samples(est_cameras, image_obs, (i, j))
                    samples = inject_outlier_samples(
                        samples, spec.outlier_fraction,
                        seeds.subseed(scene_seed, seeds.OUTLIERS, i, j))
                    pair_rows = []
                    for method in methods:
                        fit = (estimate_line_robust(samples) if method == "robust"
                               else estimate_line_pca(samples))
                        sign = disambiguate_sign(fit.direction, est_cameras, image_obs, (i, j))
                        signed = sign * fit.direction
                        err = angular_error(signed / np.linalg.norm(signed), gamma_true)
                        pair_rows.append((method, scene_idx, i, j,
                                          float(signed[0]), float(signed[1]),
                                          float(signed[2]), err, float(fit.condition)))
                except (InsufficientSamplesError, LineEstimationError, SignAmbiguousError):
                    res.skipped_pairs += 1
                    continue
                res.pair_rows.extend(pair_rows)
                collected += 1
        scene_idx += 1
    for method in methods:
        errs = res.errors(method)
        if errs.size:
            res.summary_rows.append((method, int(errs.size), float(np.median(errs)),
                                     float(np.quantile(errs, 0.9)), res.skipped_pairs))
            counts, edges = np.histogram(errs, bins=HIST_BINS, range=HIST_RANGE)
            for b in range(HIST_BINS):
                res.hist_rows.append((method, float(edges[b]), float(edges[b + 1]),
                                      int(counts[b])))
    if spec.out:
        res.write(spec.out, single_method=methods[0] if len(methods) == 1 else None)
    return res
