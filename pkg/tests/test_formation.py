import numpy as np
import pytest

from locest.errors import DegeneratePairError
from locest.formation import (
    Formation,
    Graph,
    LocationSet,
    NoiseModelParams,
    corrupt_directions,
    exact_directions,
    generate_erdos_renyi,
    random_locations,
)

from conftest import complete, single_edge


class TestGenerateErdosRenyi:
    def test_complete_graph_at_q1(self):
        g = generate_erdos_renyi(5, 1.0, seed=0)
        assert g.m == 10
        assert np.array_equal(g.edges, complete(5).edges)

    def test_two_vertices(self):
        g = generate_erdos_renyi(2, 1.0, seed=3)
        assert g.m == 1
        assert tuple(g.edges[0]) == (0, 1)

    def test_edge_count_matches_binomial(self):
        # n=1000, q=0.5: mean 249750, std ~353.4; 5 sigma over 20 seeds.
        n, q = 1000, 0.5
        pairs = n * (n - 1) // 2
        mean = pairs * q
        std = np.sqrt(pairs * q * (1 - q))
        for seed in range(20):
            g = generate_erdos_renyi(n, q, seed=seed)
            assert abs(g.m - mean) <= 5 * std

    def test_deterministic(self):
        a = generate_erdos_renyi(50, 0.3, seed=11)
        b = generate_erdos_renyi(50, 0.3, seed=11)
        assert np.array_equal(a.edges, b.edges)

    def test_rejects_bad_q(self):
        with pytest.raises(ValueError):
            generate_erdos_renyi(5, 0.0, seed=0)


class TestExactDirections:
    def test_unit_x_axis(self):
        loc = LocationSet(np.array([[0.0, 0.0], [1.0, 0.0]]))
        f = exact_directions(loc, single_edge())
        assert np.allclose(f.directions[0], [-1.0, 0.0])

    def test_diagonal_3d(self):
        loc = LocationSet(np.array([[0.0, 0.0, 0.0], [1.0, 1.0, 1.0]]))
        f = exact_directions(loc, Graph(2, np.array([[0, 1]])))
        assert np.allclose(f.directions[0], -np.ones(3) / np.sqrt(3))

    def test_coincident_endpoints_raise(self):
        loc = LocationSet(np.array([[1.0, 2.0], [1.0, 2.0]]))
        with pytest.raises(DegeneratePairError) as exc:
            exact_directions(loc, single_edge())
        assert exc.value.edge == (0, 1)

    def test_unit_norm_invariant(self, rng):
        loc = LocationSet(rng.normal(size=(30, 3)))
        g = generate_erdos_renyi(30, 0.4, seed=5)
        f = exact_directions(loc, g)
        assert np.all(np.abs(np.linalg.norm(f.directions, axis=1) - 1.0) <= 1e-12)


class TestCorruptDirections:
    def _formation(self, n=40, d=3, seed=2):
        loc = random_locations(n, d, seed)
        g = generate_erdos_renyi(n, 0.6, seed + 1)
        return exact_directions(loc, g)

    def test_noiseless_branch_is_identity(self):
        f = self._formation()
        out = corrupt_directions(f, NoiseModelParams(0.0, 0.0, rng_seed=9))
        assert np.array_equal(out.directions, f.directions)

    def test_all_outliers_mean_concentrates(self):
        loc = random_locations(60, 3, 4)
        g = generate_erdos_renyi(60, 0.7, 5)
        f = exact_directions(loc, g)
        assert f.m >= 1000
        out = corrupt_directions(f, NoiseModelParams(1.0, 0.0, rng_seed=12))
        assert np.linalg.norm(out.directions.mean(axis=0)) <= 0.1

    def test_gaussian_noise_matches_monte_carlo_oracle(self):
        # Median angular error under sigma=0.05 in d=3 vs a direct simulation.
        sigma = 0.05
        loc = random_locations(150, 3, 21)
        g = generate_erdos_renyi(150, 0.95, 22)
        f = exact_directions(loc, g)
        assert f.m >= 10000
        out = corrupt_directions(f, NoiseModelParams(0.0, sigma, rng_seed=23))
        cosines = np.clip(np.einsum("ed,ed->e", out.directions, f.directions), -1, 1)
        median_obs = np.median(np.arccos(cosines))

        oracle_rng = np.random.default_rng(77)
        raw = oracle_rng.normal(size=(10000, 3))
        gam = raw / np.linalg.norm(raw, axis=1, keepdims=True)
        pert = gam + sigma * oracle_rng.normal(size=(10000, 3))
        pert /= np.linalg.norm(pert, axis=1, keepdims=True)
        median_ref = np.median(np.arccos(np.clip(np.einsum("ed,ed->e", pert, gam), -1, 1)))
        assert abs(median_obs - median_ref) <= 0.2 * median_ref

    def test_unit_norm_after_corruption(self):
        f = self._formation()
        out = corrupt_directions(f, NoiseModelParams(0.3, 0.1, rng_seed=8))
        assert np.all(np.abs(np.linalg.norm(out.directions, axis=1) - 1.0) <= 1e-12)

    def test_deterministic_per_seed(self):
        f = self._formation()
        params = NoiseModelParams(0.25, 0.05, rng_seed=123)
        a = corrupt_directions(f, params)
        b = corrupt_directions(f, params)
        assert np.array_equal(a.directions, b.directions)

    def test_invalid_params(self):
        with pytest.raises(ValueError):
            NoiseModelParams(1.5, 0.0)
        with pytest.raises(ValueError):
            NoiseModelParams(0.5, -1.0)


class TestRandomLocations:
    def test_distinct_points(self):
        loc = random_locations(2, 2, seed=0)
        assert not np.array_equal(loc.points[0], loc.points[1])

    def test_deterministic(self):
        a = random_locations(10, 3, seed=42)
        b = random_locations(10, 3, seed=42)
        assert np.array_equal(a.points, b.points)

    def test_standard_normal_moments(self):
        loc = random_locations(10000, 3, seed=6)
        means = loc.points.mean(axis=0)
        variances = loc.points.var(axis=0)
        assert np.all(np.abs(means) <= 0.1)
        assert np.all((variances >= 0.9) & (variances <= 1.1))

    def test_rejects_small_inputs(self):
        with pytest.raises(ValueError):
            random_locations(1, 2, seed=0)
        with pytest.raises(ValueError):
            random_locations(5, 1, seed=0)


class TestFormationType:
    def test_antisymmetry_is_exact(self, rng):
        loc = LocationSet(rng.normal(size=(8, 2)))
        g = generate_erdos_renyi(8, 0.8, seed=3)
        f = exact_directions(loc, g)
        for i, j in g.edges:
            assert np.array_equal(f.direction(int(j), int(i)), -f.direction(int(i), int(j)))

    def test_missing_edge_lookup_raises(self):
        loc = LocationSet(np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]]))
        f = exact_directions(loc, Graph(3, np.array([[0, 1]])))
        with pytest.raises(KeyError):
            f.direction(1, 2)

    def test_rejects_non_unit_directions(self):
        with pytest.raises(ValueError):
            Formation(single_edge(), np.array([[0.5, 0.5]]))

    def test_rejects_duplicate_and_self_edges(self):
        with pytest.raises(ValueError):
            Graph(3, np.array([[0, 1], [0, 1]]))
        with pytest.raises(ValueError):
            Graph(3, np.array([[1, 1]]))

    def test_graph_connectivity_helpers(self):
        g = Graph(4, np.array([[0, 1], [2, 3]]))
        labels = g.connected_components()
        assert labels[0] == labels[1]
        assert labels[2] == labels[3]
        assert labels[0] != labels[2]
        assert not g.is_connected()

    def test_corrupt_then_identity_roundtrip(self, rng):
        loc = LocationSet(rng.normal(size=(12, 3)))
        g = generate_erdos_renyi(12, 0.5, seed=9)
        f = exact_directions(loc, g)
        out = corrupt_directions(f, NoiseModelParams(0.0, 0.0, rng_seed=1))
        assert np.array_equal(out.directions, f.directions)
