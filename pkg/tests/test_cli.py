import json

import numpy as np
import pytest

from locest.cli import main
from locest.fileio import load_locations, save_formation
from locest.formation import (
    Formation,
    Graph,
    exact_directions,
    generate_erdos_renyi,
    random_locations,
)

from conftest import bowtie, complete


@pytest.fixture
def rigid_formation_file(tmp_path):
    loc = random_locations(12, 3, seed=3)
    g = generate_erdos_renyi(12, 0.7, seed=4)
    f = exact_directions(loc, g)
    path = tmp_path / "rigid.txt"
    save_formation(path, f)
    return str(path)


@pytest.fixture
def bowtie_formation_file(tmp_path):
    loc = random_locations(5, 2, seed=6)
    f = exact_directions(loc, bowtie())
    path = tmp_path / "bowtie.txt"
    save_formation(path, f)
    return str(path)


class TestRigidityCommand:
    def test_rigid_exit_zero(self, rigid_formation_file, capsys):
        code = main(["rigidity", "--formation", rigid_formation_file, "--dim", "3"])
        assert code == 0
        out = capsys.readouterr().out
        assert "parallel rigid in R^3: yes" in out

    def test_non_rigid_exit_three_with_components(self, bowtie_formation_file, capsys):
        code = main(["rigidity", "--formation", bowtie_formation_file, "--dim", "2"])
        assert code == 3
        out = capsys.readouterr().out
        assert "parallel rigid in R^2: no" in out
        assert "components: 2" in out

    def test_oracle_flag(self, bowtie_formation_file, capsys):
        code = main(["rigidity", "--formation", bowtie_formation_file,
                     "--dim", "2", "--oracle"])
        assert code == 3
        assert "combinatorial oracle" in capsys.readouterr().out

    def test_missing_formation_is_spec_error(self):
        assert main(["rigidity"]) == 2

    def test_oracle_size_limit_is_spec_error(self, tmp_path):
        loc = random_locations(12, 2, seed=1)
        f = exact_directions(loc, complete(12))
        path = tmp_path / "big.txt"
        save_formation(path, f)
        assert main(["rigidity", "--formation", str(path), "--dim", "2", "--oracle"]) == 2


class TestSolveCommand:
    def test_solve_writes_locations_and_trace(self, rigid_formation_file, tmp_path, capsys):
        out = tmp_path / "est.txt"
        trace = tmp_path / "trace.csv"
        code = main(["solve", "--formation", rigid_formation_file, "--method", "lud",
                     "--out", str(out), "--trace", str(trace)])
        assert code == 0
        est = load_locations(out)
        assert est.n == 12 and est.dimension == 3
        lines = trace.read_text().splitlines()
        header = [l for l in lines if not l.startswith("#")][0]
        assert header == "iter,objective,regularized_objective,max_weight,min_dij"
        assert "method=lud" in capsys.readouterr().out

    def test_all_methods_run(self, rigid_formation_file, tmp_path):
        for method in ("lud", "cls", "ls"):
            out = tmp_path / f"{method}.txt"
            assert main(["solve", "--formation", rigid_formation_file,
                         "--method", method, "--out", str(out)]) == 0
            assert out.exists()

    def test_dim_mismatch_is_spec_error(self, rigid_formation_file):
        assert main(["solve", "--formation", rigid_formation_file, "--dim", "2"]) == 2

    def test_disconnected_formation_numerical_failure(self, tmp_path):
        g = Graph(4, np.array([[0, 1], [2, 3]]))
        f = Formation(g, np.array([[1.0, 0.0], [0.0, 1.0]]))
        path = tmp_path / "disc.txt"
        save_formation(path, f)
        assert main(["solve", "--formation", str(path), "--method", "lud"]) == 4

    def test_unknown_method_is_spec_error(self, rigid_formation_file):
        assert main(["solve", "--formation", rigid_formation_file, "--method", "sdp"]) == 2


class TestExperimentCommands:
    def test_phase_grid_cli(self, tmp_path, capsys):
        out = tmp_path / "grid.csv"
        code = main(["phase-grid", "--n", "14", "--q-values", "1.0",
                     "--p-values", "0.0", "--trials", "2", "--master-seed", "5",
                     "--out", str(out)])
        assert code == 0
        text = out.read_text()
        assert text.startswith("# kind=phase-grid")
        assert "q,p,trials_recorded,mean_nrmse,log10_mean_nrmse,status" in text

    def test_compare_cli_with_spec_file(self, tmp_path):
        spec = {"kind": "compare", "n": 14, "q_values": [0.8], "p_values": [0.0],
                "sigma_values": [0.0], "trials": 1, "master_seed": 2,
                "solvers": ["lud", "ls"]}
        spec_path = tmp_path / "spec.json"
        spec_path.write_text(json.dumps(spec))
        out = tmp_path / "cmp.csv"
        code = main(["compare", "--spec", str(spec_path), "--out", str(out)])
        assert code == 0
        body = [l for l in out.read_text().splitlines() if not l.startswith("#")]
        assert body[0].startswith("q,p,sigma,trial,instance_seed,solver")
        assert len(body) == 3  # header + 2 solver rows

    def test_directions_cli_single_method_columns(self, tmp_path):
        out = tmp_path / "dirs.csv"
        code = main(["directions", "--scene-seed", "9", "--cameras", "6",
                     "--points", "50", "--rot-noise", "0.0", "--outlier-frac", "0.0",
                     "--pairs", "8", "--method", "robust", "--out", str(out)])
        assert code == 0
        body = [l for l in out.read_text().splitlines() if not l.startswith("#")]
        assert body[0] == ("i,j,gamma_x,gamma_y,gamma_z,"
                           "angular_error_to_truth_rad,condition_flag")
        assert (tmp_path / "dirs_summary.csv").exists()
        assert (tmp_path / "dirs_hist.csv").exists()

    def test_directions_cli_both_methods(self, tmp_path):
        out = tmp_path / "dirs.csv"
        code = main(["directions", "--master-seed", "9", "--cameras", "6",
                     "--points", "50", "--pairs", "6", "--out", str(out)])
        assert code == 0
        body = [l for l in out.read_text().splitlines() if not l.startswith("#")]
        assert body[0].startswith("method,scene,i,j,")

    def test_bad_spec_json_exit_two(self, tmp_path):
        bad = tmp_path / "bad.json"
        bad.write_text("{not json")
        assert main(["compare", "--spec", str(bad), "--out", "x.csv"]) == 2

    def test_missing_out_exit_two(self):
        assert main(["phase-grid", "--n", "10"]) == 2

    def test_cli_flag_overrides_spec_file(self, tmp_path):
        spec = {"kind": "phase-grid", "n": 14, "q_values": [1.0], "p_values": [0.0],
                "trials": 1, "master_seed": 2}
        spec_path = tmp_path / "spec.json"
        spec_path.write_text(json.dumps(spec))
        out = tmp_path / "grid.csv"
        code = main(["phase-grid", "--spec", str(spec_path), "--trials", "2",
                     "--out", str(out)])
        assert code == 0
        assert "# trials=2" in out.read_text()
