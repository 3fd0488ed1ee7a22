"""Plain-text formats for formations and location sets.

Formation files: header line ``d n m`` followed by m lines ``i j g_1 ... g_d``
with i < j. Location files: header ``d n`` followed by n coordinate lines.
Floats are written with 17 significant digits, which round-trips IEEE doubles
bit-stably through parse/serialize.
"""

from __future__ import annotations

import numpy as np

from .formation import Formation, Graph, LocationSet


def _fmt(x: float) -> str:
    return format(float(x), ".17g")


def dumps_formation(formation: Formation) -> str:
    lines = [f"{formation.dimension} {formation.n} {formation.m}"]
    for (i, j), g in zip(formation.graph.edges, formation.directions):
        lines.append(f"{int(i)} {int(j)} " + " ".join(_fmt(c) for c in g))
    return "\n".join(lines) + "\n"


def loads_formation(text: str) -> Formation:
    rows = [r for r in (line.strip() for line in text.splitlines()) if r]
    if not rows:
        raise ValueError("empty formation file")
    head = rows[0].split()
    if len(head) != 3:
        raise ValueError("formation header must be 'd n m'")
    d, n, m = (int(x) for x in head)
    if len(rows) - 1 != m:
        raise ValueError(f"expected {m} edge lines, found {len(rows) - 1}")
    edges = np.empty((m, 2), dtype=np.int64)
    dirs = np.empty((m, d), dtype=np.float64)
    for k, row in enumerate(rows[1:]):
        tok = row.split()
        if len(tok) != 2 + d:
            raise ValueError(f"edge line {k} must have 2 indices and {d} coordinates")
        edges[k] = (int(tok[0]), int(tok[1]))
        dirs[k] = [float(t) for t in tok[2:]]
    return Formation(graph=Graph(n=n, edges=edges), directions=dirs)


def save_formation(path, formation: Formation) -> None:
    with open(path, "w", encoding="ascii") as fh:
        fh.write(dumps_formation(formation))


def load_formation(path) -> Formation:
    with open(path, "r", encoding="ascii") as fh:
        return loads_formation(fh.read())


def dumps_locations(locations: LocationSet) -> str:
    lines = [f"{locations.dimension} {locations.n}"]
    for p in locations.points:
        lines.append(" ".join(_fmt(c) for c in p))
    return "\n".join(lines) + "\n"


def loads_locations(text: str) -> LocationSet:
    rows = [r for r in (line.strip() for line in text.splitlines()) if r]
    if not rows:
        raise ValueError("empty locations file")
    head = rows[0].split()
    if len(head) != 2:
        raise ValueError("locations header must be 'd n'")
    d, n = (int(x) for x in head)
    if len(rows) - 1 != n:
        raise ValueError(f"expected {n} coordinate lines, found {len(rows) - 1}")
    pts = np.empty((n, d), dtype=np.float64)
    for k, row in enumerate(rows[1:]):
        tok = row.split()
        if len(tok) != d:
            raise ValueError(f"coordinate line {k} must have {d} values")
        pts[k] = [float(t) for t in tok]
    return LocationSet(pts)


def save_locations(path, locations: LocationSet) -> None:
    with open(path, "w", encoding="ascii") as fh:
        fh.write(dumps_locations(locations))


def load_locations(path) -> LocationSet:
    with open(path, "r", encoding="ascii") as fh:
        return loads_locations(fh.read())
