"""Location solvers: LUD via iteratively reweighted least squares, the
constrained least-squares (CLS) baseline, and the spectral least-squares (LS)
baseline.

The LUD program minimizes the sum of unsquared residual norms
||t_i - t_j - d_ij * gamma_ij|| subject to sum_i t_i = 0 and d_ij >= c, which
removes the translational and scale ambiguities while staying robust to
outlier directions. It is solved by IRLS: each outer iteration minimizes the
weighted squared objective with weights (||r_ij||^2 + delta)^(-1/2) from the
previous residuals. The weighted subproblem is itself solved by block
coordinate descent: for fixed locations each pair scale has the closed form
max(c, gamma^T (t_i - t_j)); for fixed scales the locations solve a weighted
graph-Laplacian system, rank-completed by the centering term so the returned
iterate satisfies the zero-sum constraint. Warm-starting each subproblem at
the previous outer iterate makes the delta-regularized objective
non-increasing across outer iterations (majorize-minimize).

CLS is the same subproblem with unit weights, solved once. LS drops the pair
scales and minimizes sum ||(I - gamma gamma^T)(t_i - t_j)||^2 over centered
unit-norm configurations, solved as a smallest-eigenvector problem; its pair
scales are reported post hoc.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
from scipy.linalg import cho_factor, cho_solve

from . import seeds
from .errors import InnerSolverError, UnsolvableFormationError
from .formation import Formation, LocationSet
from .rigidity import spectral_rigidity_test

_OBJECTIVE_FLOOR = 1e-24


@dataclass(frozen=True)
class SolverConfig:
    """Tolerances and limits shared by the solvers.

    ``scale_floor`` is the lower bound c on every pair scale. ``irls_delta``
    is the final smoothing level of the LUD objective: the solver anneals the
    regularization geometrically from 1e-2 down to this value, warm-starting
    each stage (weights are capped at delta^(-1/2), so the smoothed optimum
    sits ~sqrt(delta) from the exact one; 1e-13 keeps that bias below the
    1e-6 exact-recovery scale). Setting ``irls_delta`` >= 1e-2 reproduces a
    single-smoothing run. A stage ends when the relative change of the
    regularized objective and of the iterates both fall below ``irls_tol``;
    ``max_outer_iters`` caps the total weighted solves across all stages.
    """

    scale_floor: float = 1.0
    irls_delta: float = 1e-13
    irls_tol: float = 1e-8
    max_outer_iters: int = 1000
    inner_tol: float = 1e-10
    inner_max_iters: int = 2000
    seed: int = 0

    def __post_init__(self):
        if self.scale_floor <= 0:
            raise ValueError("scale_floor must be > 0")
        if self.irls_delta <= 0 or self.irls_tol <= 0 or self.inner_tol <= 0:
            raise ValueError("tolerances must be > 0")

    def delta_schedule(self) -> list[float]:
        deltas = []
        delta = 1e-2
        while delta > self.irls_delta * 1.0001:
            deltas.append(delta)
            delta *= 0.1
        deltas.append(self.irls_delta)
        return deltas


@dataclass(frozen=True)
class SolverResult:
    """Solver output: centered location estimates plus per-edge scales.

    ``pair_scales`` is aligned with ``formation.graph.edges``. ``cost_trace``
    holds the raw objective per outer iteration (sum of residual norms for
    LUD, squared sum for CLS, projector quadratic for LS); ``reg_cost_trace``
    is the delta-regularized LUD objective, NaN where not defined (CLS/LS).
    ``well_posed`` reflects the parallel rigidity of the input graph (tested
    here unless the caller supplied the verdict).
    """

    locations: LocationSet
    pair_scales: np.ndarray
    cost_trace: np.ndarray
    reg_cost_trace: np.ndarray
    max_weight_trace: np.ndarray
    min_scale_trace: np.ndarray
    converged: bool
    iterations: int
    well_posed: bool
    warnings: tuple[str, ...] = ()

    def pair_scale_map(self, formation: Formation) -> dict[tuple[int, int], float]:
        return {(int(i), int(j)): float(s)
                for (i, j), s in zip(formation.graph.edges, self.pair_scales)}


class _Problem:
    """Per-solve cache: edge arrays and the sparse incidence transpose."""

    def __init__(self, formation: Formation):
        self.n = formation.n
        self.d = formation.dimension
        self.edges = formation.graph.edges
        self.gammas = formation.directions
        self.ei = self.edges[:, 0]
        self.ej = self.edges[:, 1]
        m = formation.m
        rows = np.concatenate([self.ei, self.ej])
        cols = np.tile(np.arange(m), 2)
        vals = np.concatenate([np.ones(m), -np.ones(m)])
        self.scatter = sp.csr_matrix((vals, (rows, cols)), shape=(self.n, m))

    def projections(self, t: np.ndarray) -> np.ndarray:
        return np.einsum("ed,ed->e", self.gammas, t[self.ei] - t[self.ej])

    def residual_sq(self, t: np.ndarray, dvec: np.ndarray) -> np.ndarray:
        r = t[self.ei] - t[self.ej] - dvec[:, None] * self.gammas
        return np.einsum("ed,ed->e", r, r)


def _check_solvable(formation: Formation) -> None:
    if formation.m == 0:
        raise UnsolvableFormationError("formation has no edges")


def _check_connected(formation: Formation, for_ls: bool = False) -> None:
    if not formation.graph.is_connected():
        if for_ls:
            raise UnsolvableFormationError("LS baseline requires a connected graph")
        raise InnerSolverError("graph is disconnected; Laplacian system is singular")


def _resolve_well_posed(formation: Formation, config: SolverConfig,
                        well_posed: bool | None) -> tuple[bool, tuple[str, ...]]:
    if well_posed is None:
        report = spectral_rigidity_test(formation.graph, formation.dimension,
                                        seed=seeds.subseed(config.seed, seeds.RIGIDITY))
        well_posed = report.is_parallel_rigid
    warns = () if well_posed else ("formation is not parallel rigid; solution is not unique",)
    return bool(well_posed), warns


def _laplacian_factor(problem: _Problem, weights: np.ndarray):
    n = problem.n
    L = np.zeros((n, n), dtype=np.float64)
    L[problem.ei, problem.ej] = -weights
    L[problem.ej, problem.ei] = -weights
    diag = np.zeros(n)
    np.add.at(diag, problem.ei, weights)
    np.add.at(diag, problem.ej, weights)
    L[np.arange(n), np.arange(n)] = diag
    L += max(1.0, float(weights.sum()) / n) / n
    try:
        return cho_factor(L, lower=True)
    except np.linalg.LinAlgError as exc:
        raise InnerSolverError(f"Laplacian factorization failed: {exc}") from exc


def _optimal_rescale(proj: np.ndarray, dist_sq: np.ndarray, weights: np.ndarray,
                     c: float) -> float:
    """Smallest minimizer of phi(s) = min_{d >= c} sum_e w_e ||s*D_e - d_e*g_e||^2.

    Residuals are linear in a joint rescaling s of the locations, so phi is a
    convex piecewise quadratic in s with breakpoints c/proj_e where edge e
    leaves the scale floor. Minimizing it exactly removes the flat (or
    near-flat) global-scaling direction that plain two-block descent crawls
    along, and lands noiseless instances on the zero-cost point whose
    smallest pair scale sits exactly at the floor.
    """
    wd = weights * dist_sq
    A0 = float(wd.sum())
    if A0 <= 0.0:
        return 1.0
    wcp = weights * c * proj
    B0 = float(wcp.sum())
    pos = proj > 0.0
    if not np.any(pos):
        return max(B0 / A0, 1e-12) if B0 > 0 else 1e-12
    bps = c / proj[pos]
    order = np.argsort(bps)
    bps = bps[order]
    # A_k, B_k hold phi'(s)/2 = s*A_k - B_k on the k-th interval; an edge
    # crossing its breakpoint moves from the clamped to the unclamped form.
    dA = (weights[pos] * proj[pos] ** 2)[order]
    dB = wcp[pos][order]
    A = np.concatenate([[A0], A0 - np.cumsum(dA)])
    B = np.concatenate([[B0], B0 - np.cumsum(dB)])
    lo = np.concatenate([[0.0], bps])
    hi = np.concatenate([bps, [np.inf]])
    slope_end = np.empty_like(A)
    slope_end[:-1] = hi[:-1] * A[:-1] - B[:-1]
    slope_end[-1] = np.inf if A[-1] > 0 else -B[-1]
    crossing = np.nonzero(slope_end >= 0.0)[0]
    k = int(crossing[0]) if crossing.size else len(A) - 1
    if A[k] > 0.0:
        s = min(max(B[k] / A[k], lo[k]), hi[k] if np.isfinite(hi[k]) else B[k] / A[k])
    else:
        s = lo[k]
    return float(max(s, 1e-12))


def _active_set_refine(problem: _Problem, weights: np.ndarray, t: np.ndarray,
                       c: float):
    """Exact solve of the reduced system for the current floor-active set.

    Eliminating the unclamped scales d_e = gamma^T (t_i - t_j) turns their
    terms into projector quadratics, while floor-active edges keep the full
    w ||Delta - c*gamma||^2 form; the minimizing locations solve one SPD
    system. Returns (t, d, objective) for the refined point, or None when
    the reduced system is singular (active set pins no scale).
    """
    n, d = problem.n, problem.d
    g = problem.gammas
    proj = problem.projections(t)
    active = proj <= c
    blocks = np.broadcast_to(np.eye(d), (g.shape[0], d, d)).copy()
    blocks[~active] -= g[~active][:, :, None] * g[~active][:, None, :]
    blocks *= weights[:, None, None]
    M = np.zeros((n * d, n * d))
    ar = np.arange(d)
    rows_i = (problem.ei * d)[:, None, None] + ar[None, :, None]
    cols_i = (problem.ei * d)[:, None, None] + ar[None, None, :]
    rows_j = (problem.ej * d)[:, None, None] + ar[None, :, None]
    cols_j = (problem.ej * d)[:, None, None] + ar[None, None, :]
    np.add.at(M, (rows_i, cols_i), blocks)
    np.add.at(M, (rows_j, cols_j), blocks)
    np.add.at(M, (rows_i, cols_j), -blocks)
    np.add.at(M, (rows_j, cols_i), -blocks)
    # Deflate translations; the RHS sums to zero so centering is preserved.
    alpha = max(1.0, float(weights.sum()))
    T = np.kron(np.full((n, 1), 1.0 / np.sqrt(n)), np.eye(d))
    M += alpha * (T @ T.T)
    rhs = np.zeros((n, d))
    wc = (weights[active] * c)[:, None] * g[active]
    np.add.at(rhs, problem.ei[active], wc)
    np.add.at(rhs, problem.ej[active], -wc)
    try:
        t_new = cho_solve(cho_factor(M, lower=True), rhs.ravel()).reshape(n, d)
    except np.linalg.LinAlgError:
        return None
    t_new -= t_new.mean(axis=0)
    d_new = np.maximum(c, problem.projections(t_new))
    f_new = float(np.sum(weights * problem.residual_sq(t_new, d_new)))
    if not np.isfinite(f_new):
        return None
    return t_new, d_new, f_new


def _bcd_inner(problem: _Problem, weights: np.ndarray, t0: np.ndarray,
               config: SolverConfig, polish: bool = True):
    """Block coordinate descent on the weighted subproblem.

    Each iteration performs an exact line search along the global scaling
    direction (which also yields the closed-form scale update
    d = max(c, gamma^T (t_i - t_j)) at the chosen scale) followed by the
    Laplacian solve for the locations, until the relative objective change
    falls below ``inner_tol``. With ``polish`` the exit point is passed
    through exact active-set solves: plain coordinate descent can crawl
    along near-flat directions, and the refinement walks the active set to
    the true optimum in a few rounds (descent-only acceptance). IRLS skips
    the polish on its coarse smoothing stages where subproblem accuracy is
    not load-bearing. Returns (t, pair_scales, objective, iterations,
    hit_tolerance).
    """
    c = config.scale_floor
    factor = _laplacian_factor(problem, weights)
    t = t0 - t0.mean(axis=0)
    f_prev = np.inf
    floor = _OBJECTIVE_FLOOR * max(1.0, float(weights.max()))
    dvec = np.full(problem.edges.shape[0], c)
    hit_tol = False
    iters = 0
    for iters in range(1, config.inner_max_iters + 1):
        proj = problem.projections(t)
        # The scale search dominates the per-iteration cost (an m log m sort);
        # refreshing it periodically keeps its acceleration without paying for
        # it in every plain coordinate pass.
        if iters == 1 or iters % 8 == 0:
            diffs = t[problem.ei] - t[problem.ej]
            dist_sq = np.einsum("ed,ed->e", diffs, diffs)
            s = _optimal_rescale(proj, dist_sq, weights, c)
            t = s * t
            proj = s * proj
        dvec = np.maximum(c, proj)
        b = (weights * dvec)[:, None] * problem.gammas
        t = cho_solve(factor, problem.scatter @ b)
        t -= t.mean(axis=0)
        f = float(np.sum(weights * problem.residual_sq(t, dvec)))
        if f <= floor:
            hit_tol = True
            return t, dvec, f, iters, hit_tol
        if np.isfinite(f_prev) and abs(f_prev - f) <= config.inner_tol * max(f_prev, 1e-300):
            hit_tol = True
            break
        f_prev = f
    for _ in range(12 if polish else 0):
        refined = _active_set_refine(problem, weights, t, c)
        if refined is None or refined[2] >= f:
            break
        improved = f - refined[2] > config.inner_tol * max(f, 1e-300)
        t, dvec, f = refined
        if not improved:
            break
    if not np.all(np.isfinite(t)):
        raise InnerSolverError("non-finite iterate in weighted subproblem")
    return t, dvec, f, iters, hit_tol


def solve_inner_subproblem(formation: Formation, weights: np.ndarray,
                           config: SolverConfig | None = None,
                           warm_start: LocationSet | np.ndarray | None = None,
                           ) -> tuple[LocationSet, np.ndarray]:
    """Solve min sum w_ij ||t_i - t_j - d_ij gamma_ij||^2 with sum t_i = 0,
    d_ij >= c. Returns centered locations and the per-edge scales."""
    config = config or SolverConfig()
    _check_solvable(formation)
    _check_connected(formation)
    w = np.asarray(weights, dtype=np.float64)
    if w.shape != (formation.m,) or np.any(w <= 0):
        raise ValueError("weights must be positive, one per edge")
    if warm_start is None:
        t0 = np.zeros((formation.n, formation.dimension))
    else:
        t0 = warm_start.points if isinstance(warm_start, LocationSet) else np.asarray(warm_start)
        t0 = np.array(t0, dtype=np.float64)
    t, dvec, _, _, _ = _bcd_inner(_Problem(formation), w, t0, config)
    return LocationSet(t), dvec


def _ls_estimate(formation: Formation) -> tuple[np.ndarray, float, float]:
    """Smallest-eigenvector LS baseline on centered unit-norm configurations.

    Returns (t, objective, relative eigengap)."""
    n, d = formation.n, formation.dimension
    e, g = formation.graph.edges, formation.directions
    proj = np.broadcast_to(np.eye(d), (formation.m, d, d)) - g[:, :, None] * g[:, None, :]
    H = np.zeros((n * d, n * d))
    ar = np.arange(d)
    rows_i = (e[:, 0] * d)[:, None, None] + ar[None, :, None]
    cols_i = (e[:, 0] * d)[:, None, None] + ar[None, None, :]
    rows_j = (e[:, 1] * d)[:, None, None] + ar[None, :, None]
    cols_j = (e[:, 1] * d)[:, None, None] + ar[None, None, :]
    np.add.at(H, (rows_i, cols_i), proj)
    np.add.at(H, (rows_j, cols_j), proj)
    np.add.at(H, (rows_i, cols_j), -proj)
    np.add.at(H, (rows_j, cols_i), -proj)

    # Push the d translation directions out of the bottom of the spectrum.
    shift = 2.0 * (float(formation.graph.degrees().max()) + 1.0)
    T = np.kron(np.full((n, 1), 1.0 / np.sqrt(n)), np.eye(d))
    H_defl = H + shift * (T @ T.T)
    evals, evecs = np.linalg.eigh(H_defl)
    v = evecs[:, 0]
    t = v.reshape(n, d)
    t -= t.mean(axis=0)
    nrm = np.linalg.norm(t)
    if nrm == 0.0:
        raise InnerSolverError("LS eigenvector is a pure translation")
    t /= nrm
    if np.einsum("ed,ed->", g, t[e[:, 0]] - t[e[:, 1]]) < 0:
        t = -t
    gap = float((evals[1] - evals[0]) / max(evals[-1], np.finfo(float).tiny))
    return t, float(evals[0]), gap


def _initial_locations(formation: Formation, config: SolverConfig) -> np.ndarray:
    """LS baseline estimate when available, else seeded random normal.

    Only the shape matters: the first inner iteration's scale line search
    picks the optimal global scale for whatever initialization it is given.
    """
    try:
        t, _, _ = _ls_estimate(formation)
        return t
    except (np.linalg.LinAlgError, InnerSolverError):
        rng = seeds.rng_from(seeds.subseed(config.seed, seeds.SOLVER))
        t = rng.normal(size=(formation.n, formation.dimension))
        t -= t.mean(axis=0)
        return t / np.linalg.norm(t)


def solve_lud(formation: Formation, config: SolverConfig | None = None,
              well_posed: bool | None = None) -> SolverResult:
    """Least unsquared deviations solver (IRLS over weighted subproblems).

    ``well_posed`` may carry a caller-supplied rigidity verdict; when None
    the graph is tested here. Non-rigid inputs are still solved but the
    result carries a warning and ``well_posed=False``.
    """
    config = config or SolverConfig()
    _check_solvable(formation)
    _check_connected(formation)
    wp, warns = _resolve_well_posed(formation, config, well_posed)

    problem = _Problem(formation)
    t = _initial_locations(formation, config)
    weights = np.ones(formation.m)
    schedule = config.delta_schedule()
    raw_trace, reg_trace, wmax_trace, dmin_trace = [], [], [], []
    converged = False
    iterations = 0
    dvec = None

    for stage, delta in enumerate(schedule):
        remaining = config.max_outer_iters - iterations
        if remaining <= 0:
            converged = False
            break
        final_stage = stage == len(schedule) - 1
        stage_cap = remaining if final_stage else max(5, remaining // (len(schedule) - stage))
        # Coarse smoothing levels only need to hand a good warm start to the
        # next stage; full irls_tol precision is required of the last one.
        stage_tol = config.irls_tol if final_stage else max(config.irls_tol, 1e-3)
        reg_prev = t_prev = dvec_prev = None
        converged = False
        for _ in range(min(stage_cap, remaining)):
            iterations += 1
            try:
                t, dvec, _, _, _ = _bcd_inner(problem, weights, t, config,
                                              polish=False)
            except np.linalg.LinAlgError as exc:
                raise InnerSolverError(f"inner solve failed: {exc}",
                                       iteration=iterations) from exc
            rsq = problem.residual_sq(t, dvec)
            reg = float(np.sum(np.sqrt(rsq + delta)))
            raw_trace.append(float(np.sum(np.sqrt(rsq))))
            reg_trace.append(reg)
            wmax_trace.append(float(weights.max()))
            dmin_trace.append(float(dvec.min()))

            if reg_prev is not None:
                obj_change = abs(reg_prev - reg) / max(reg_prev, 1e-300)
                t_change = np.linalg.norm(t - t_prev) / max(np.linalg.norm(t_prev), 1e-300)
                d_change = (np.linalg.norm(dvec - dvec_prev)
                            / max(np.linalg.norm(dvec_prev), 1e-300))
                if obj_change < stage_tol and t_change < stage_tol \
                        and d_change < stage_tol:
                    converged = True
                    break
            reg_prev, t_prev, dvec_prev = reg, t, dvec
            weights = 1.0 / np.sqrt(rsq + delta)
        # Entering the next stage re-derives the weights at its smaller delta,
        # which only lowers the regularized objective (monotone continuation).
        weights = 1.0 / np.sqrt(problem.residual_sq(t, dvec)
                                + (schedule[stage + 1] if stage + 1 < len(schedule) else delta))

    # One final polished solve certifies the returned subproblem solution
    # (exact active-set refinement; descent-only, so the trace stays monotone).
    delta = schedule[-1]
    t, dvec, _, _, _ = _bcd_inner(problem, weights, t, config, polish=True)
    rsq = problem.residual_sq(t, dvec)
    raw_trace.append(float(np.sum(np.sqrt(rsq))))
    reg_trace.append(float(np.sum(np.sqrt(rsq + delta))))
    wmax_trace.append(float(weights.max()))
    dmin_trace.append(float(dvec.min()))
    iterations += 1

    return SolverResult(
        locations=LocationSet(t),
        pair_scales=dvec,
        cost_trace=np.array(raw_trace),
        reg_cost_trace=np.array(reg_trace),
        max_weight_trace=np.array(wmax_trace),
        min_scale_trace=np.array(dmin_trace),
        converged=converged,
        iterations=iterations,
        well_posed=wp,
        warnings=warns,
    )


def solve_cls(formation: Formation, config: SolverConfig | None = None,
              well_posed: bool | None = None) -> SolverResult:
    """Constrained least squares: the unit-weight subproblem, solved once."""
    config = config or SolverConfig()
    _check_solvable(formation)
    _check_connected(formation)
    wp, warns = _resolve_well_posed(formation, config, well_posed)
    t0 = _initial_locations(formation, config)
    t, dvec, f, _, hit_tol = _bcd_inner(_Problem(formation), np.ones(formation.m), t0, config)
    return SolverResult(
        locations=LocationSet(t),
        pair_scales=dvec,
        cost_trace=np.array([f]),
        reg_cost_trace=np.array([np.nan]),
        max_weight_trace=np.array([1.0]),
        min_scale_trace=np.array([float(dvec.min())]),
        converged=hit_tol,
        iterations=1,
        well_posed=wp,
        warnings=warns,
    )


def solve_ls(formation: Formation, config: SolverConfig | None = None,
             well_posed: bool | None = None) -> SolverResult:
    """Least-squares baseline: smallest eigenvector of the projector system."""
    config = config or SolverConfig()
    _check_solvable(formation)
    _check_connected(formation, for_ls=True)
    wp, warns = _resolve_well_posed(formation, config, well_posed)
    t, objective, gap = _ls_estimate(formation)
    converged = gap > 1e-12
    if not converged:
        warns = warns + ("LS eigengap degenerate; returning smallest eigenvector",)
    e, g = formation.graph.edges, formation.directions
    proj = np.einsum("ed,ed->e", g, t[e[:, 0]] - t[e[:, 1]])
    dvec = np.maximum(config.scale_floor, proj)
    return SolverResult(
        locations=LocationSet(t),
        pair_scales=dvec,
        cost_trace=np.array([objective]),
        reg_cost_trace=np.array([np.nan]),
        max_weight_trace=np.array([np.nan]),
        min_scale_trace=np.array([float(dvec.min())]),
        converged=converged,
        iterations=1,
        well_posed=wp,
        warnings=warns,
    )


SOLVERS = {"lud": solve_lud, "cls": solve_cls, "ls": solve_ls}
