"""Parallel rigidity: deciding whether pairwise directions determine locations
uniquely up to global translation and scale.

Two tests are provided. ``theorem1_oracle`` decides the combinatorial
characterization exactly on small graphs: the graph is generically rigid in
R^d iff the multigraph of (d-1) copies of each edge contains d*n - (d+1)
edge copies such that every nonempty sub-multiset D' satisfies
|D'| <= d*|V(D')| - (d+1). Sets satisfying those counts form the independent
sets of a count matroid (the bound d+1 <= 2d - 1 holds for d >= 2), so a
maximum such set is found greedily with an exact induced-count independence
check over all vertex subsets; the verdict matches exhaustive search.

``spectral_rigidity_test`` scales to general graphs: draw a generic random
realization, assemble the direction-constraint matrix whose rows force each
displacement x_i - x_j to stay parallel to the realized edge direction, and
compare its numerical rank against d*n - (d+1). The nullspace always contains
the d translations and the global scaling; any excess encodes independent
rescalings of rigid pieces, which ``extract_maximal_components`` turns into
the maximal rigid components via per-edge rescale ratios.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .errors import NoWellPosedSubproblemError, OracleSizeError, TrivialInputError
from .formation import Formation, Graph, random_locations
from .seeds import rng_from, subseed

DEFAULT_RANK_TOL = 1e-9
DEFAULT_RATIO_TOL = 1e-6
NULLSPACE_SAMPLES = 4
ORACLE_VERTEX_LIMIT = 8


@dataclass(frozen=True)
class RigidityReport:
    """Outcome of a rigidity analysis.

    ``components`` is None for the plain spectral test; component extraction
    fills it with vertex sets (each of size >= 2) whose induced formations
    are parallel rigid. Components partition the edge set; the vertex sets of
    adjacent components may overlap in single vertices.
    """

    is_parallel_rigid: bool
    measured_rank: int
    required_rank: int
    nullspace_dim_beyond_trivial: int
    components: tuple[tuple[int, ...], ...] | None = None


def theorem1_oracle(graph: Graph, d: int, vertex_limit: int = ORACLE_VERTEX_LIMIT) -> bool:
    """Exact combinatorial rigidity verdict for graphs with few vertices."""
    n, m = graph.n, graph.m
    if d < 2:
        raise ValueError("d must be >= 2")
    if n > vertex_limit:
        raise OracleSizeError(
            f"oracle limited to {vertex_limit} vertices (got {n}); use spectral_rigidity_test")
    if n < 2:
        raise TrivialInputError("need at least 2 vertices")
    target = d * n - (d + 1)
    if (d - 1) * m < target:
        return False

    full = 1 << n
    capacity = np.array([d * bin(w).count("1") - (d + 1) for w in range(full)], dtype=np.int64)
    count = np.zeros(full, dtype=np.int64)

    # Masks containing both endpoints, per edge; an added copy increments the
    # induced count of exactly these vertex subsets.
    masks_per_edge = []
    for i, j in graph.edges:
        base = (1 << int(i)) | (1 << int(j))
        rest = (full - 1) ^ base
        sub, masks = rest, []
        while True:
            masks.append(base | sub)
            if sub == 0:
                break
            sub = (sub - 1) & rest
        masks_per_edge.append(np.array(masks, dtype=np.int64))

    size = 0
    for masks in masks_per_edge:
        for _copy in range(d - 1):
            if np.all(count[masks] + 1 <= capacity[masks]):
                count[masks] += 1
                size += 1
                if size == target:
                    return True
            else:
                break  # further copies of this edge hit the same bound
    return False


def _orthonormal_complements(directions: np.ndarray) -> np.ndarray:
    """(m, d-1, d) stack of orthonormal bases of each direction's complement."""
    m, d = directions.shape
    sign0 = np.where(directions[:, 0] >= 0.0, 1.0, -1.0)
    v = directions.copy()
    v[:, 0] += sign0
    scal = 2.0 / np.sum(v * v, axis=1)
    # Columns 1..d-1 of the Householder reflection mapping +-e1 to the direction.
    basis = np.broadcast_to(np.eye(d)[1:, :], (m, d - 1, d)).copy()
    basis -= (scal[:, None] * v[:, 1:])[:, :, None] * v[:, None, :]
    return basis


def direction_constraint_matrix(points: np.ndarray, edges: np.ndarray) -> np.ndarray:
    """((d-1)*m, d*n) matrix whose nullspace is the parallel redrawings.

    The row block of edge (i, j) holds an orthonormal basis of the realized
    direction's orthogonal complement in vertex block i and its negation in
    block j, so M x = 0 iff every x_i - x_j is parallel to t_i - t_j.
    """
    n, d = points.shape
    m = edges.shape[0]
    diffs = points[edges[:, 0]] - points[edges[:, 1]]
    norms = np.linalg.norm(diffs, axis=1)
    basis = _orthonormal_complements(diffs / norms[:, None])
    M = np.zeros(((d - 1) * m, d * n), dtype=np.float64)
    rows = (np.arange(m) * (d - 1))[:, None] + np.arange(d - 1)[None, :]
    cols_i = (edges[:, 0] * d)[:, None] + np.arange(d)[None, :]
    cols_j = (edges[:, 1] * d)[:, None] + np.arange(d)[None, :]
    M[rows[:, :, None], cols_i[:, None, :]] = basis
    M[rows[:, :, None], cols_j[:, None, :]] = -basis
    return M


def _generic_realization(n: int, d: int, seed: int) -> np.ndarray:
    return random_locations(n, d, seed).points


def _rank_from_singular_values(s: np.ndarray, rank_tol: float) -> int:
    if s.size == 0 or s[0] == 0.0:
        return 0
    return int(np.sum(s > rank_tol * s[0]))


def spectral_rigidity_test(graph: Graph, d: int, seed: int = 0,
                           rank_tol: float = DEFAULT_RANK_TOL) -> RigidityReport:
    """Randomized rank test against the generic rigidity threshold.

    Disconnected graphs are never rigid; each extra connected component (and
    each isolated vertex) inflates the nullspace beyond the d+1 trivial
    dimensions, so the single whole-graph rank comparison gives the same
    verdict as per-component testing.
    """
    if d < 2:
        raise ValueError("d must be >= 2")
    if graph.n < 2:
        raise TrivialInputError("need at least 2 vertices")
    required = d * graph.n - (d + 1)
    if graph.m == 0:
        return RigidityReport(False, 0, required, d * graph.n - (d + 1))
    points = _generic_realization(graph.n, d, seed)
    M = direction_constraint_matrix(points, graph.edges)
    s = np.linalg.svd(M, compute_uv=False)
    rank = _rank_from_singular_values(s, rank_tol)
    return RigidityReport(
        is_parallel_rigid=rank == required,
        measured_rank=rank,
        required_rank=required,
        nullspace_dim_beyond_trivial=(d * graph.n - rank) - (d + 1),
    )


def _edge_subgraph(edges: np.ndarray) -> tuple[Graph, np.ndarray]:
    """Relabel an edge set onto dense vertices; returns (graph, old labels)."""
    verts = np.unique(edges)
    remap = {int(v): k for k, v in enumerate(verts)}
    new_edges = np.array([[remap[int(i)], remap[int(j)]] for i, j in edges], dtype=np.int64)
    return Graph(n=verts.size, edges=new_edges), verts


def _cluster_edges_by_ratio(ratios: np.ndarray, tol: float) -> list[np.ndarray]:
    """Union-find over edges whose rescale-ratio vectors agree within tol."""
    m = ratios.shape[0]
    parent = np.arange(m)

    def find(x):
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    scale = np.maximum(np.abs(ratios), 1.0)
    for e in range(m):
        close = np.all(np.abs(ratios - ratios[e]) <= tol * np.maximum(scale, scale[e]) + 1e-12,
                       axis=1)
        for f in np.nonzero(close)[0]:
            ri, rf = find(e), find(int(f))
            if ri != rf:
                parent[max(ri, rf)] = min(ri, rf)
    roots = np.array([find(e) for e in range(m)])
    return [np.nonzero(roots == r)[0] for r in np.unique(roots)]


def _group_is_rigid(edges: np.ndarray, d: int, seed: int, rank_tol: float) -> bool:
    sub, _ = _edge_subgraph(edges)
    return spectral_rigidity_test(sub, d, seed=seed, rank_tol=rank_tol).is_parallel_rigid


def extract_maximal_components(graph: Graph, d: int, seed: int = 0,
                               rank_tol: float = DEFAULT_RANK_TOL,
                               ratio_tol: float = DEFAULT_RATIO_TOL,
                               num_samples: int = NULLSPACE_SAMPLES,
                               _depth: int = 0) -> RigidityReport:
    """Decompose a graph into maximal parallel rigid components.

    Nullspace vectors of the constraint matrix restrict, on each maximal
    rigid component, to a translation plus rescaling of the generating
    realization, so the per-edge ratio ||x_i - x_j|| / ||t_i - t_j|| is
    constant on a component and generically distinct across components.
    Edges are grouped by their ratio vectors over several independent
    nullspace samples; groups sharing a vertex are merged only if their
    union passes the spectral test, and every final group is re-verified
    (failed groups are re-extracted with a fresh seed, so reported
    components are rigid by construction).
    """
    if graph.m < 1:
        raise ValueError("component extraction needs at least one edge")
    if d < 2:
        raise ValueError("d must be >= 2")
    n = graph.n
    required = d * n - (d + 1)
    points = _generic_realization(n, d, subseed(seed, 1))
    M = direction_constraint_matrix(points, graph.edges)
    _, s, vt = np.linalg.svd(M, full_matrices=True)
    rank = _rank_from_singular_values(s, rank_tol)
    report = RigidityReport(
        is_parallel_rigid=rank == required,
        measured_rank=rank,
        required_rank=required,
        nullspace_dim_beyond_trivial=(d * n - rank) - (d + 1),
    )
    if report.is_parallel_rigid:
        return replace(report, components=(tuple(range(n)),))

    null_basis = vt[rank:].T  # (d*n, nullity)
    rng = rng_from(subseed(seed, 2))
    coeffs = rng.normal(size=(null_basis.shape[1], num_samples))
    samples = (null_basis @ coeffs).reshape(n, d, num_samples)
    e = graph.edges
    edge_lens = np.linalg.norm(points[e[:, 0]] - points[e[:, 1]], axis=1)
    diffs = samples[e[:, 0]] - samples[e[:, 1]]          # (m, d, K)
    ratios = np.linalg.norm(diffs, axis=1) / edge_lens[:, None]  # (m, K)

    groups = _cluster_edges_by_ratio(ratios, ratio_tol)

    # Merge vertex-sharing groups whose union survives the rank test. Ratio
    # clustering can only over-split at tolerance boundaries; maximality is
    # restored here rather than by loosening the tolerance.
    merged = True
    while merged and len(groups) > 1:
        merged = False
        groups.sort(key=lambda g: (int(e[g].min()), -len(g)))
        vsets = [set(np.unique(e[g]).tolist()) for g in groups]
        for a in range(len(groups)):
            for b in range(a + 1, len(groups)):
                if vsets[a] & vsets[b]:
                    union = np.concatenate([groups[a], groups[b]])
                    if _group_is_rigid(e[union], d, subseed(seed, 3, a, b), rank_tol):
                        groups[a] = np.sort(union)
                        del groups[b]
                        merged = True
                        break
            if merged:
                break

    components: list[tuple[int, ...]] = []
    for gidx, g in enumerate(groups):
        sub_edges = e[g]
        if len(g) > 1 and not _group_is_rigid(sub_edges, d, subseed(seed, 4, gidx), rank_tol):
            # Pathological cluster (probability-zero ratio collision): decompose
            # it recursively with a fresh seed; after the depth cap fall back to
            # single-edge components, which are always rigid.
            if _depth < 3:
                sub, verts = _edge_subgraph(sub_edges)
                inner = extract_maximal_components(sub, d, seed=subseed(seed, 5, gidx),
                                                   rank_tol=rank_tol, ratio_tol=ratio_tol,
                                                   num_samples=num_samples, _depth=_depth + 1)
                for comp in inner.components or ():
                    components.append(tuple(int(verts[v]) for v in comp))
                continue
            for i, j in sub_edges:
                components.append((int(i), int(j)))
            continue
        components.append(tuple(int(v) for v in np.unique(sub_edges)))

    components.sort(key=lambda c: (-len(c), c))
    return replace(report, components=tuple(components))


def largest_component_restriction(formation: Formation,
                                  report: RigidityReport) -> tuple[Formation, np.ndarray]:
    """Induced sub-formation on the largest rigid component.

    Ties are broken toward the component containing the smallest vertex
    index. Vertices are re-mapped densely; returns the restricted formation
    and an array mapping new indices back to original vertex labels.
    """
    if report.components is None:
        raise ValueError("report carries no components; run extract_maximal_components")
    usable = [c for c in report.components if len(c) >= 2]
    if not usable:
        raise NoWellPosedSubproblemError("no rigid component with >= 2 vertices")
    usable.sort(key=lambda c: (-len(c), min(c)))
    verts = np.array(sorted(usable[0]), dtype=np.int64)
    remap = {int(v): k for k, v in enumerate(verts)}
    inside = np.isin(formation.graph.edges, verts).all(axis=1)
    old_edges = formation.graph.edges[inside]
    new_edges = np.array([[remap[int(i)], remap[int(j)]] for i, j in old_edges],
                         dtype=np.int64).reshape(-1, 2)
    sub = Formation(graph=Graph(n=verts.size, edges=new_edges),
                    directions=formation.directions[inside])
    return sub, verts


def well_posed_subproblem(formation: Formation, d: int | None = None,
                          seed: int = 0) -> tuple[Formation, np.ndarray, RigidityReport]:
    """Rigidity workflow: test, and if non-rigid restrict to the largest
    rigid component. Returns (formation, vertex map, report)."""
    dim = formation.dimension if d is None else d
    report = spectral_rigidity_test(formation.graph, dim, seed=seed)
    if report.is_parallel_rigid:
        return formation, np.arange(formation.n, dtype=np.int64), report
    full = extract_maximal_components(formation.graph, dim, seed=seed)
    sub, verts = largest_component_restriction(formation, full)
    return sub, verts, full
