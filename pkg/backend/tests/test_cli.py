"""End-to-end runs of the command-line entry point"""
import json
import math

import pytest

from cutofflab.cli import run
from cutofflab.core.config import settings
from cutofflab.schemas.run_config import Command, RunConfig
from cutofflab.services.artifacts import read_table


def test_detflow_n1(out_dir, capsys):
    assert run(["--out", str(out_dir), "detflow", "--n", "1"]) == 0
    path = out_dir / "detflow.csv"
    assert path.read_text(encoding="utf-8").startswith("# {")
    meta, frame = read_table(path)
    assert meta["config"]["n"] == 1
    assert frame["T"].iloc[0] == pytest.approx(math.log(3.0), abs=1e-8)
    assert "model=exact" in capsys.readouterr().out


@pytest.mark.parametrize("argv", [[], ["detflow"], ["nonsense"], ["sde", "--n", "0"]])
def test_usage_errors_exit_1(argv, out_dir):
    assert run(["--out", str(out_dir), *argv]) == 1


def test_missing_config_file_is_a_usage_error(tmp_path):
    assert run(["--config", str(tmp_path / "absent.json")]) == 1


def test_sde_files_do_not_depend_on_threads(tmp_path, monkeypatch):
    argv = ["sde", "--n", "100", "--paths", "10", "--seed", "7"]
    outputs = []
    for threads, name in ((1, "one"), (3, "three")):
        monkeypatch.setattr(settings, "THREADS", threads)
        out = tmp_path / name
        assert run(["--out", str(out), *argv]) == 0
        outputs.append((out / "sde_n100_direct_seed7.csv").read_bytes())
    assert outputs[0] == outputs[1]


def test_config_file_round_trip(tmp_path):
    config = RunConfig(command=Command.DETFLOW, n_list=[1, 10])
    path = tmp_path / "run.json"
    config.dump(path)
    assert RunConfig.load(path) == config
    assert run(["--out", str(tmp_path), "--config", str(path)]) == 0
    meta, frame = read_table(tmp_path / "detflow.csv")
    assert frame["n"].tolist() == [1, 10]
    assert meta["config"]["n_list"] == [1, 10]


def test_step_budget_exits_2(out_dir):
    argv = ["--out", str(out_dir), "sde", "--n", "50", "--paths", "4", "--max-steps", "3"]
    assert run(argv) == 2


def test_stats_summary_reads_sde_output(out_dir, capsys):
    assert run(["--out", str(out_dir), "sde", "--n", "20", "--paths", "8", "--seed", "3"]) == 0
    sample = out_dir / "sde_n20_direct_seed3.csv"
    assert run(["--out", str(out_dir), "stats", str(sample)]) == 0
    meta, frame = read_table(out_dir / "stats.csv")
    assert meta["test"] == "summary"
    assert frame["n"].iloc[0] == 20
    assert frame["size"].iloc[0] == 8
    assert frame["lo"].iloc[0] < frame["mean"].iloc[0] < frame["hi"].iloc[0]


def test_stats_missing_input_exits_1(out_dir):
    assert run(["--out", str(out_dir), "stats", str(out_dir / "absent.csv")]) == 1


def test_avatar_small_n_uses_trivial_bounds(out_dir):
    assert run(["--out", str(out_dir), "avatar", "--n", "50"]) == 0
    payload = json.loads((out_dir / "avatar.json").read_text(encoding="utf-8"))
    assert payload["family"] == "trivial"
    assert payload["lb"] <= payload["ub"]
    assert 1.0 < payload["a_chi"] < 2.0


def test_reproduce_prop18(out_dir, capsys):
    assert run(["--out", str(out_dir), "reproduce", "prop18", "--n-list", "100,1000"]) == 0
    printed = capsys.readouterr().out
    assert "PASS prop18/a_chi_bracket" in printed
    assert "PASS prop18/left_convex_n100" in printed
    summary = json.loads((out_dir / "prop18.json").read_text(encoding="utf-8"))
    assert summary["recipe"] == "prop18"
    assert (out_dir / "prop18.csv").exists()


def test_reproduce_theorem2(out_dir, capsys):
    argv = ["--out", str(out_dir), "reproduce", "theorem2", "--n-list", "100,1000,10000"]
    assert run(argv) == 0
    assert "PASS theorem2/ratio_decreasing" in capsys.readouterr().out


def test_reproduce_corollary1_rejects_small_samples(out_dir):
    argv = ["--out", str(out_dir), "reproduce", "corollary1", "--n", "30", "--paths", "100"]
    assert run(argv) == 1


@pytest.mark.slow
def test_reproduce_corollary1(out_dir, capsys):
    argv = ["--out", str(out_dir), "reproduce", "corollary1", "--n", "30", "--paths", "500"]
    assert run(argv) == 0
    printed = capsys.readouterr().out
    for name in ("ks_direct_full", "ks_direct_reflection", "ks_full_reflection", "rho_radial_law"):
        assert f"corollary1/{name}" in printed
    summary = json.loads((out_dir / "corollary1.json").read_text(encoding="utf-8"))
    assert set(summary["summary"]["means"]) == {"direct", "full", "reflection"}


@pytest.mark.slow
def test_reproduce_theorem1_uses_avatar_bounds(out_dir, capsys):
    argv = ["--out", str(out_dir), "reproduce", "theorem1", "--n-list", "50,1000", "--paths", "300"]
    assert run(argv) == 0
    printed = capsys.readouterr().out
    assert "theorem1/bracket_n50" in printed
    assert "theorem1/bracket_n1000" in printed
    rows = json.loads((out_dir / "theorem1.json").read_text(encoding="utf-8"))["summary"]["rows"]
    families = {row["n"]: row["family"] for row in rows}
    assert families[50] == "trivial"
    assert families[1000] != "trivial"
