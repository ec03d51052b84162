import json

import pytest

from peg.cli import main
from peg.graph import generate_grid, to_json


@pytest.fixture()
def grid_file(tmp_path):
    path = tmp_path / "grid.json"
    path.write_text(to_json(generate_grid(5, 5)))
    return str(path)


@pytest.fixture()
def tiny_file(tmp_path):
    path = tmp_path / "tiny.json"
    path.write_text(to_json(generate_grid(2, 3)))
    return str(path)


def run_cli(capsys, *argv):
    code = main(list(argv))
    captured = capsys.readouterr()
    return code, captured.out, captured.err


class TestGen:
    def test_grid_to_stdout(self, capsys):
        code, out, _ = run_cli(capsys, "gen", "grid", "--rows", "2", "--cols", "2")
        assert code == 0
        obj = json.loads(out)
        assert obj["nodes"] == [0, 1, 2, 3]

    def test_geometric_to_file(self, capsys, tmp_path):
        out_path = tmp_path / "geo.json"
        code, out, _ = run_cli(capsys, "gen", "geometric", "--n", "30",
                               "--radius", "0.3", "--seed", "4",
                               "--out", str(out_path))
        assert code == 0
        assert out_path.exists()
        assert "n=30" in out


class TestSolve:
    def test_solve_writes_table(self, capsys, grid_file, tmp_path):
        out_path = tmp_path / "grid.pegd"
        code, out, _ = run_cli(capsys, "solve", "--graph", grid_file,
                               "--m", "2", "--capture", "adjacent",
                               "--out", str(out_path))
        assert code == 0
        assert "max finite D" in out
        assert out_path.stat().st_size == 22 + 2 * 25**3

    def test_solve_json_reports_counts(self, capsys, grid_file):
        code, out, _ = run_cli(capsys, "solve", "--graph", grid_file,
                               "--m", "2", "--json")
        obj = json.loads(out)
        assert obj["states"] == 25**3
        assert obj["infinite_states"] == 0
        assert obj["max_finite_d"] > 0


class TestVerify:
    def test_zero_differences(self, capsys, tiny_file):
        code, out, _ = run_cli(capsys, "verify", "--graph", tiny_file, "--m", "1")
        assert code == 0
        assert out.startswith("0 differences")

    def test_verify_json(self, capsys, tiny_file):
        code, out, _ = run_cli(capsys, "verify", "--graph", tiny_file,
                               "--m", "2", "--json")
        assert code == 0
        assert json.loads(out)["difference_count"] == 0


class TestEval:
    def test_eval_json_deterministic(self, capsys, grid_file, tmp_path):
        table = tmp_path / "t.pegd"
        run_cli(capsys, "solve", "--graph", grid_file, "--m", "2",
                "--out", str(table))
        argv = ("eval", "--graph", grid_file, "--table", str(table),
                "--pursuer", "dp-belief", "--evader", "dp-async-evader",
                "--range", "2", "--episodes", "12", "--seed", "1", "--json")
        code_a, out_a, _ = run_cli(capsys, *argv)
        code_b, out_b, _ = run_cli(capsys, *argv)
        assert code_a == code_b == 0
        assert out_a == out_b
        obj = json.loads(out_a)
        assert obj["episodes"] == 12
        assert 0.0 <= obj["success_rate"] <= 1.0

    def test_eval_solves_when_no_table(self, capsys, tiny_file):
        code, out, _ = run_cli(capsys, "eval", "--graph", tiny_file,
                               "--m", "1", "--pursuer", "shortest-path",
                               "--evader", "random", "--range", "0",
                               "--episodes", "5", "--json")
        assert code == 0
        assert json.loads(out)["episodes"] == 5


class TestPlay:
    def test_trace_lines_parse(self, capsys, tiny_file):
        code, out, _ = run_cli(capsys, "play", "--graph", tiny_file,
                               "--m", "1", "--pursuer", "shortest-path",
                               "--evader", "stay", "--range", "0",
                               "--seed", "2", "--trace", "--json")
        assert code == 0
        lines = out.strip().splitlines()
        trace = [json.loads(line) for line in lines[:-1]]
        summary = json.loads(lines[-1])
        assert summary["captured"] is True
        assert len(trace) == summary["steps"] + 1
        assert {"pursuers", "evader", "pos", "belief", "observed"} <= set(trace[0])


class TestErrors:
    def test_missing_graph_file(self, capsys):
        with pytest.raises(FileNotFoundError):
            run_cli(capsys, "solve", "--graph", "/does/not/exist.json")

    def test_structured_error_on_bad_table(self, capsys, grid_file, tiny_file,
                                           tmp_path):
        table = tmp_path / "t.pegd"
        run_cli(capsys, "solve", "--graph", grid_file, "--m", "1",
                "--out", str(table))
        code, _, err = run_cli(capsys, "eval", "--graph", tiny_file,
                               "--table", str(table), "--pursuer", "dp-minimax",
                               "--evader", "stay", "--episodes", "1")
        assert code == 1
        assert json.loads(err)["error"] == "HashMismatch"
