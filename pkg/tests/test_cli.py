import json

import numpy as np
import pytest

from lqgame import SolverConfig, TimeGrid, example_problem, solve_riccati
from lqgame.cli import (
    ProblemFormatError, load_problem, load_solution, main, save_plot_data,
    save_problem, save_solution,
)


@pytest.fixture()
def ex4_5_file(tmp_path, ex4_5):
    path = tmp_path / "ex4_5.json"
    save_problem(ex4_5, str(path))
    return str(path)


@pytest.fixture()
def rand_file(tmp_path, rand_problem):
    path = tmp_path / "rand.json"
    save_problem(rand_problem, str(path))
    return str(path)


class TestProblemFiles:
    def test_round_trip_constant(self, ex4_5_file):
        p = load_problem(ex4_5_file)
        assert (p.n, p.m1, p.m2) == (1, 1, 1)
        assert p.cost.G[0, 0] == -2.0
        assert p.cost.R22.values[0, 0] == -2.0 / 3.0

    def test_round_trip_sampled(self, tmp_path, ex5_2):
        path = tmp_path / "p.json"
        save_problem(ex5_2, str(path))
        p = load_problem(str(path))
        assert np.array_equal(p.cost.R11.values, ex5_2.cost.R11.values)
        assert p.cost.R11.span == 1.0

    def test_R21_mismatch_names_field(self, tmp_path, ex4_5):
        path = tmp_path / "bad.json"
        save_problem(ex4_5, str(path))
        doc = json.loads(path.read_text())
        doc["cost"]["R21"] = {"constant": [[0.125]]}
        path.write_text(json.dumps(doc))
        with pytest.raises(ProblemFormatError, match="cost.R21"):
            load_problem(str(path))

    def test_empty_file_is_parse_error(self, tmp_path):
        path = tmp_path / "empty.json"
        path.write_text("")
        with pytest.raises(ProblemFormatError, match="JSON"):
            load_problem(str(path))

    def test_missing_coefficient_named(self, tmp_path, ex4_5):
        path = tmp_path / "bad.json"
        save_problem(ex4_5, str(path))
        doc = json.loads(path.read_text())
        del doc["dynamics"]["B2"]
        path.write_text(json.dumps(doc))
        with pytest.raises(ProblemFormatError, match="dynamics.B2"):
            load_problem(str(path))

    def test_dims_mismatch_rejected(self, tmp_path, ex4_5):
        path = tmp_path / "bad.json"
        save_problem(ex4_5, str(path))
        doc = json.loads(path.read_text())
        doc["dims"]["n"] = 2
        path.write_text(json.dumps(doc))
        with pytest.raises(ProblemFormatError, match="dims"):
            load_problem(str(path))

    def test_non_uniform_times_rejected(self, tmp_path, ex4_5):
        path = tmp_path / "bad.json"
        save_problem(ex4_5, str(path))
        doc = json.loads(path.read_text())
        doc["cost"]["Q"] = {"samples": {"times": [0.0, 0.3, 1.0],
                                        "values": [[[0.0]]] * 3}}
        path.write_text(json.dumps(doc))
        with pytest.raises(ProblemFormatError, match="cost.Q"):
            load_problem(str(path))


class TestSolutionFiles:
    def test_bit_exact_round_trip(self, tmp_path, ex4_5):
        sol = solve_riccati(ex4_5, SolverConfig(n_steps=50), "game")
        path = tmp_path / "sol.json"
        save_solution(str(path), sol.grid, sol.P_nodes, sol.margin1_nodes,
                      sol.margin2_nodes, config=SolverConfig(n_steps=50),
                      seed=0)
        doc = load_solution(str(path))
        assert np.array_equal(doc["P_nodes"], sol.P_nodes)
        assert np.array_equal(doc["margins"]["margin1"], sol.margin1_nodes)
        assert doc["meta"]["config"]["n_steps"] == 50
        assert doc["meta"]["seed"] == 0
        assert doc["meta"]["version"].startswith("lqgame-")

    def test_plot_data_columns(self, tmp_path, rand_problem):
        sol = solve_riccati(rand_problem, SolverConfig(n_steps=20), "game")
        path = tmp_path / "sol.csv"
        save_plot_data(str(path), sol.grid, sol.P_nodes, sol.margin1_nodes,
                       sol.margin2_nodes)
        lines = path.read_text().splitlines()
        header = lines[0].split(",")
        n = rand_problem.n
        assert header[0] == "t"
        assert header[-2:] == ["margin1", "margin2"]
        assert len(header) == 1 + n * n + 2
        assert len(lines) == 22
        # float cells round-trip exactly
        row = lines[1].split(",")
        assert float(row[1]) == sol.P_nodes[0].ravel()[0]


class TestCommands:
    def test_certify_exit_codes(self, ex4_5_file, rand_file):
        assert main(["certify", "--problem", ex4_5_file, "--steps", "400"]) == 2
        assert main(["certify", "--problem", rand_file, "--steps", "400"]) == 0

    def test_solve_writes_artifacts(self, tmp_path, rand_file):
        out = tmp_path / "out"
        out.mkdir()
        code = main(["solve", "--problem", rand_file, "--steps", "200",
                     "--out", str(out)])
        assert code == 0
        assert (out / "solution.json").exists()
        assert (out / "solution.csv").exists()

    def test_solve_lambda_family(self, capsys, ex4_5_file):
        code = main(["solve", "--problem", ex4_5_file, "--steps", "200",
                     "--lambda", "1.0,0.5"])
        assert code == 0
        outp = capsys.readouterr().out
        assert "lambda=1" in outp and "lambda=0.5" in outp

    def test_pipeline_certified_passes(self, tmp_path, rand_file):
        out = tmp_path / "out"
        out.mkdir()
        code = main(["pipeline", "--problem", rand_file, "--steps", "400",
                     "--paths", "2000", "--out", str(out)])
        assert code == 0
        doc = load_solution(str(out / "solution.json"))
        assert doc["theta_nodes"] is not None

    def test_pipeline_ex4_5_not_certified_still_writes(self, tmp_path,
                                                       ex4_5_file):
        out = tmp_path / "out"
        out.mkdir()
        code = main(["pipeline", "--problem", ex4_5_file, "--steps", "400",
                     "--out", str(out)])
        assert code == 2
        assert (out / "solution.json").exists()

    def test_pipeline_ex5_2_regularity_exit(self, tmp_path, ex5_2):
        path = tmp_path / "ex5_2.json"
        save_problem(ex5_2, str(path))
        assert main(["pipeline", "--problem", str(path),
                     "--steps", "400"]) == 3

    def test_det_rep_command(self, tmp_path, rand_det_problem):
        path = tmp_path / "det.json"
        save_problem(rand_det_problem, str(path))
        assert main(["det-rep", "--problem", str(path), "--steps", "400"]) == 0

    def test_simulate_and_verify(self, capsys, rand_file):
        assert main(["simulate", "--problem", rand_file, "--steps", "300",
                     "--paths", "500", "--seed", "3"]) == 0
        assert main(["verify", "--problem", rand_file, "--steps", "300",
                     "--paths", "2000", "--seed", "3"]) == 0
        assert "verdict: PASS" in capsys.readouterr().out

    def test_reproducibility_header(self, capsys, rand_file):
        main(["certify", "--problem", rand_file, "--steps", "200",
              "--seed", "9"])
        head = capsys.readouterr().out.splitlines()[0]
        assert head.startswith("# lqgame-")
        assert "seed=9" in head and "n_steps=200" in head

    def test_seeded_runs_identical(self, capsys, rand_file):
        main(["simulate", "--problem", rand_file, "--steps", "200",
              "--paths", "300", "--seed", "5"])
        first = capsys.readouterr().out
        main(["simulate", "--problem", rand_file, "--steps", "200",
              "--paths", "300", "--seed", "5"])
        assert capsys.readouterr().out == first

    def test_bad_x_vector(self, rand_file):
        assert main(["solve", "--problem", rand_file, "--steps", "100",
                     "--x", "1,2,3,4,5,6,7"]) == 0  # solve ignores --x
        assert main(["simulate", "--problem", rand_file, "--steps", "100",
                     "--x", "1"]) == 2

    def test_missing_problem_flag(self):
        assert main(["certify"]) == 2


class TestExamples:
    def test_ex4_5(self, capsys):
        assert main(["example", "ex4_5", "--steps", "1000"]) == 0
        out = capsys.readouterr().out
        assert "NOT_CERTIFIED" in out
        assert "-1.0000000000" in out

    def test_ex5_2(self, capsys):
        assert main(["example", "ex5_2", "--steps", "400"]) == 0
        out = capsys.readouterr().out
        assert "regularity failure at t=1" in out
        assert "= x^2" in out

    def test_ex3_4(self, capsys):
        assert main(["example", "ex3_4", "--steps", "200",
                     "--paths", "200"]) == 0
        out = capsys.readouterr().out
        assert "decreasing" in out and "NOT decreasing" not in out

    def test_ex3_2(self, capsys):
        assert main(["example", "ex3_2", "--steps", "200",
                     "--paths", "2000"]) == 0
        assert "consistent" in capsys.readouterr().out

    def test_unknown_name(self):
        with pytest.raises(SystemExit):
            main(["example", "ex9_9"])
