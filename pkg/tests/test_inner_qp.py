"""Inner weighted subproblem vs the independent projected-gradient oracle."""

import numpy as np
import pytest

from locest.errors import InnerSolverError
from locest.formation import Formation, Graph, exact_directions, random_locations
from locest.solvers import solve_inner_subproblem

from conftest import random_connected_graph, single_edge
from oracles import qp_objective, solve_qp_oracle


def _random_instance(rng, n):
    g = random_connected_graph(rng, n, extra_edge_prob=0.5)
    raw = rng.normal(size=(g.m, 2))
    dirs = raw / np.linalg.norm(raw, axis=1, keepdims=True)
    f = Formation(g, dirs)
    weights = rng.uniform(0.2, 5.0, size=g.m)
    return f, weights


def test_matches_oracle_on_random_instances(rng):
    worst = 0.0
    for k in range(20):
        n = int(rng.integers(4, 11))
        f, weights = _random_instance(rng, n)
        loc, dvec = solve_inner_subproblem(f, weights)
        ours = qp_objective(f.graph.edges, f.directions, weights, loc.points, dvec)
        _, _, ref = solve_qp_oracle(f.graph.edges, f.directions, weights, n)
        rel = abs(ours - ref) / max(ref, 1e-10)
        worst = max(worst, rel)
        assert rel <= 1e-6, f"instance {k}: ours={ours}, oracle={ref}"
    assert worst <= 1e-6


def test_zero_cost_on_noiseless_data(rng):
    loc = random_locations(8, 2, seed=13)
    g = random_connected_graph(rng, 8, extra_edge_prob=0.6)
    f = exact_directions(loc, g)
    est, dvec = solve_inner_subproblem(f, np.ones(f.m))
    obj = qp_objective(g.edges, f.directions, np.ones(f.m), est.points, dvec)
    assert obj <= 1e-18


def test_scale_update_closed_form(rng):
    # For fixed locations the optimal d is max(c, gamma^T (t_i - t_j)).
    loc = random_locations(6, 2, seed=3)
    g = random_connected_graph(rng, 6)
    f = exact_directions(loc, g)
    t = rng.normal(size=(6, 2))
    proj = np.einsum("ed,ed->e", f.directions, t[g.edges[:, 0]] - t[g.edges[:, 1]])
    expected = np.maximum(1.0, proj)
    for e in range(f.m):
        grid = np.linspace(1.0, max(2.0, expected[e] * 1.5), 400)
        r = t[g.edges[e, 0]] - t[g.edges[e, 1]]
        costs = [np.sum((r - dv * f.directions[e]) ** 2) for dv in grid]
        assert abs(grid[int(np.argmin(costs))] - expected[e]) <= grid[1] - grid[0] + 1e-9


def test_constraints_hold(rng):
    f, weights = _random_instance(rng, 9)
    loc, dvec = solve_inner_subproblem(f, weights)
    assert np.all(np.abs(loc.points.sum(axis=0)) <= 1e-8)
    assert np.all(dvec >= 1.0 - 1e-10)


def test_warm_start_accepted(rng):
    f, weights = _random_instance(rng, 7)
    cold_loc, cold_d = solve_inner_subproblem(f, weights)
    warm_loc, warm_d = solve_inner_subproblem(f, weights, warm_start=cold_loc)
    a = qp_objective(f.graph.edges, f.directions, weights, cold_loc.points, cold_d)
    b = qp_objective(f.graph.edges, f.directions, weights, warm_loc.points, warm_d)
    assert b <= a * (1 + 1e-9) + 1e-18


def test_disconnected_graph_raises():
    g = Graph(4, np.array([[0, 1], [2, 3]]))
    dirs = np.array([[1.0, 0.0], [0.0, 1.0]])
    with pytest.raises(InnerSolverError):
        solve_inner_subproblem(Formation(g, dirs), np.ones(2))


def test_single_edge_inner():
    f = Formation(single_edge(), np.array([[0.0, 1.0]]))
    loc, dvec = solve_inner_subproblem(f, np.ones(1))
    assert dvec[0] == pytest.approx(1.0)
    assert np.allclose(loc.points[0] - loc.points[1], [0.0, 1.0], atol=1e-12)


def test_bad_weights_rejected(rng):
    f, _ = _random_instance(rng, 5)
    with pytest.raises(ValueError):
        solve_inner_subproblem(f, np.zeros(f.m))
    with pytest.raises(ValueError):
        solve_inner_subproblem(f, np.ones(f.m + 1))
