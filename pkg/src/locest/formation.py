"""Core data types: point sets, measurement graphs, formations, and the
synthetic noise model.

A formation is an undirected simple graph together with one unit direction per
edge. Edges are stored canonically with i < j and direction
gamma_ij = (t_i - t_j) / ||t_i - t_j||; querying the reversed pair (j, i)
returns the negated vector. All types are immutable after construction and
safe to share across threads.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DegeneratePairError
from .seeds import rng_from

UNIT_NORM_TOL = 1e-12


def _freeze(a: np.ndarray) -> np.ndarray:
    # Copy so the caller's array is never frozen in place.
    a = np.array(a, order="C")
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class LocationSet:
    """An ordered assignment of n points in R^d (n >= 2, d >= 2)."""

    points: np.ndarray  # (n, d) float64

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=np.float64)
        if pts.ndim != 2:
            raise ValueError("points must be a 2-D array of shape (n, d)")
        n, d = pts.shape
        if n < 2:
            raise ValueError(f"need at least 2 points, got {n}")
        if d < 2:
            raise ValueError(f"dimension must be >= 2, got {d}")
        if not np.all(np.isfinite(pts)):
            raise ValueError("points must be finite")
        object.__setattr__(self, "points", _freeze(pts))

    @property
    def n(self) -> int:
        return self.points.shape[0]

    @property
    def dimension(self) -> int:
        return self.points.shape[1]

    def centroid(self) -> np.ndarray:
        return self.points.mean(axis=0)


@dataclass(frozen=True)
class Graph:
    """Undirected simple graph on vertices 0..n-1 with canonical (i < j) edges."""

    n: int
    edges: np.ndarray  # (m, 2) int64, lexicographically sorted, i < j

    def __post_init__(self):
        e = np.asarray(self.edges, dtype=np.int64).reshape(-1, 2)
        if self.n < 1:
            raise ValueError("graph needs at least one vertex")
        if e.size:
            if np.any(e[:, 0] >= e[:, 1]):
                raise ValueError("edges must satisfy i < j (no self-loops)")
            if np.any(e < 0) or np.any(e >= self.n):
                raise ValueError("edge endpoint out of range")
            order = np.lexsort((e[:, 1], e[:, 0]))
            e = e[order]
            if np.any(np.all(e[1:] == e[:-1], axis=1)):
                raise ValueError("duplicate edges")
        object.__setattr__(self, "edges", _freeze(e))

    @property
    def m(self) -> int:
        return self.edges.shape[0]

    def degrees(self) -> np.ndarray:
        deg = np.zeros(self.n, dtype=np.int64)
        if self.m:
            np.add.at(deg, self.edges[:, 0], 1)
            np.add.at(deg, self.edges[:, 1], 1)
        return deg

    def connected_components(self) -> np.ndarray:
        """Label vertices by connected component (labels are 0..k-1, ordered
        by smallest vertex index)."""
        parent = np.arange(self.n)

        def find(x):
            while parent[x] != x:
                parent[x] = parent[parent[x]]
                x = parent[x]
            return x

        for i, j in self.edges:
            ri, rj = find(i), find(j)
            if ri != rj:
                parent[max(ri, rj)] = min(ri, rj)
        roots = np.array([find(v) for v in range(self.n)])
        _, labels = np.unique(roots, return_inverse=True)
        return labels

    def is_connected(self) -> bool:
        return self.n == 1 or int(self.connected_components().max()) == 0


@dataclass(frozen=True)
class Formation:
    """A measurement graph with one unit direction per canonical edge."""

    graph: Graph
    directions: np.ndarray  # (m, d); row k is gamma_ij for edge k = (i, j), i < j

    def __post_init__(self):
        dirs = np.asarray(self.directions, dtype=np.float64)
        if dirs.ndim != 2 or dirs.shape[0] != self.graph.m:
            raise ValueError("directions must be (m, d) with one row per edge")
        if dirs.shape[1] < 2:
            raise ValueError("dimension must be >= 2")
        if dirs.size:
            norms = np.linalg.norm(dirs, axis=1)
            if np.any(np.abs(norms - 1.0) > UNIT_NORM_TOL):
                raise ValueError("all directions must be unit norm within 1e-12")
        object.__setattr__(self, "directions", _freeze(dirs))

    @property
    def n(self) -> int:
        return self.graph.n

    @property
    def m(self) -> int:
        return self.graph.m

    @property
    def dimension(self) -> int:
        return self.directions.shape[1]

    def edge_index(self) -> dict[tuple[int, int], int]:
        return {(int(i), int(j)): k for k, (i, j) in enumerate(self.graph.edges)}

    def direction(self, i: int, j: int) -> np.ndarray:
        """gamma_ij for any vertex order; gamma_ji == -gamma_ij exactly."""
        if i < j:
            k = self._lookup(i, j)
            return self.directions[k]
        k = self._lookup(j, i)
        return -self.directions[k]

    def _lookup(self, i: int, j: int) -> int:
        e = self.graph.edges
        k = np.searchsorted(e[:, 0] * (self.n + 1) + e[:, 1], i * (self.n + 1) + j)
        if k >= self.m or e[k, 0] != i or e[k, 1] != j:
            raise KeyError(f"no edge ({i}, {j})")
        return int(k)


@dataclass(frozen=True)
class NoiseModelParams:
    """Outlier/Gaussian corruption parameters for direction measurements.

    Each edge is independently replaced by a uniform random unit vector with
    probability ``outlier_probability``; otherwise a centered Gaussian vector
    scaled by ``gaussian_sigma`` is added to the true direction. The result is
    re-normalized to unit length.
    """

    outlier_probability: float
    gaussian_sigma: float
    rng_seed: int = 0

    def __post_init__(self):
        if not 0.0 <= self.outlier_probability <= 1.0:
            raise ValueError("outlier_probability must be in [0, 1]")
        if self.gaussian_sigma < 0.0:
            raise ValueError("gaussian_sigma must be >= 0")


def random_locations(n: int, d: int, seed: int) -> LocationSet:
    """n i.i.d. standard-normal points in R^d; deterministic per seed.

    Regenerates (only) on exact coincidence of a pair, a probability-zero
    event; near-coincident points are kept.
    """
    if n < 2:
        raise ValueError("n must be >= 2")
    if d < 2:
        raise ValueError("d must be >= 2")
    rng = rng_from(seed)
    pts = rng.normal(size=(n, d))
    while _has_exact_duplicate(pts):
        pts = rng.normal(size=(n, d))
    return LocationSet(pts)


def _has_exact_duplicate(pts: np.ndarray) -> bool:
    # n is desk-scale; resolve with a sorted view rather than an n^2 sweep.
    view = pts[np.lexsort(pts.T[::-1])]
    return bool(np.any(np.all(view[1:] == view[:-1], axis=1)))


def generate_erdos_renyi(n: int, q: float, seed: int) -> Graph:
    """G(n, q): each unordered pair is an edge independently with probability q."""
    if n < 2:
        raise ValueError("n must be >= 2")
    if not 0.0 < q <= 1.0:
        raise ValueError("q must be in (0, 1]")
    rng = rng_from(seed)
    iu, ju = np.triu_indices(n, k=1)
    keep = rng.random(iu.shape[0]) < q
    edges = np.column_stack([iu[keep], ju[keep]])
    return Graph(n=n, edges=edges)


def exact_directions(locations: LocationSet, graph: Graph) -> Formation:
    """Noiseless formation: gamma_ij = (t_i - t_j) / ||t_i - t_j|| for i < j."""
    if graph.n != locations.n:
        raise ValueError("graph vertex count does not match location count")
    pts = locations.points
    e = graph.edges
    diffs = pts[e[:, 0]] - pts[e[:, 1]]
    norms = np.linalg.norm(diffs, axis=1)
    if np.any(norms == 0.0):
        k = int(np.argmax(norms == 0.0))
        raise DegeneratePairError(int(e[k, 0]), int(e[k, 1]))
    return Formation(graph=graph, directions=diffs / norms[:, None])


def corrupt_directions(formation: Formation, params: NoiseModelParams) -> Formation:
    """Apply the outlier/Gaussian mixture to each edge direction independently.

    With probability p the direction becomes a uniform random unit vector;
    otherwise sigma times a standard-normal vector is added. The perturbed
    vector is normalized to unit length (the zero-norm event is resampled).
    Deterministic for a fixed seed: all random draws happen in a fixed order
    regardless of which branch each edge takes.
    """
    m, d = formation.m, formation.dimension
    rng = rng_from(params.rng_seed)
    coins = rng.random(m)
    uniform_raw = rng.normal(size=(m, d))
    gauss = rng.normal(size=(m, d))

    outlier = coins < params.outlier_probability
    tilde = formation.directions + params.gaussian_sigma * gauss
    tilde[outlier] = uniform_raw[outlier]

    norms = np.linalg.norm(tilde, axis=1)
    while np.any(norms == 0.0):
        bad = norms == 0.0
        resample = rng.normal(size=(int(bad.sum()), d))
        tilde[bad] = np.where(outlier[bad, None], resample,
                              formation.directions[bad] + params.gaussian_sigma * resample)
        norms = np.linalg.norm(tilde, axis=1)

    # Untouched rows stay bit-identical (p=0, sigma=0 is the exact identity);
    # renormalizing them would flip last bits through division by norm ~ 1.
    modified = outlier if params.gaussian_sigma == 0.0 else np.ones(m, dtype=bool)
    out = np.array(formation.directions)
    out[modified] = tilde[modified] / norms[modified, None]
    return Formation(graph=formation.graph, directions=out)
