import json

import pytest

from sharpopt.cli import main

RUN_TOML = "\n".join(
    [
        "[problem]",
        'kind = "logistic-blobs"',
        "train_per_class = 60",
        "test_per_class = 20",
        "[optimizers.sgd]",
        "[optimizers.samar]",
        "rho = 0.05",
        "[schedule]",
        'kind = "constant"',
        "eta0 = 0.5",
        "[run]",
        "epochs = 12",
        "batch_size = 64",
        "seeds = [1, 2]",
    ]
)

DIVERGENT_TOML = "\n".join(
    [
        "[problem]",
        'kind = "quadratic"',
        "dim = 5",
        "steps_per_epoch = 10",
        "[optimizers.sgd]",
        "[schedule]",
        'kind = "constant"',
        "eta0 = 10.0",
        "[run]",
        "epochs = 1",
        "batch_size = 8",
        "seeds = [1]",
    ]
)

BOUNDS_TOML = "\n".join(
    [
        "[problem]",
        "dim = 5",
        "[bounds]",
        "ks = [100]",
        "seeds = 3",
        "slack = 0.5",
    ]
)


def test_run_writes_reports_and_exits_zero(tmp_path, capsys):
    cfg = tmp_path / "exp.toml"
    cfg.write_text(RUN_TOML)
    out = tmp_path / "out"
    assert main(["run", str(cfg), "--out", str(out)]) == 0
    assert (out / "comparison.csv").exists()
    assert (out / "curves.csv").exists()
    assert (out / "summary.txt").exists()
    # one persisted run per (cell, seed)
    assert len(list(out.glob("*/seed*/meta.json"))) == 4
    assert "4 runs" in capsys.readouterr().out


def test_run_preset_with_seed_override(tmp_path):
    out = tmp_path / "out"
    code = main(
        ["run", "--preset", "toy-blobs-logistic", "--seeds", "1", "--out", str(out)]
    )
    assert code == 0
    assert len(list(out.glob("*/seed1/meta.json"))) == 2


def test_run_missing_config_exits_one(tmp_path, capsys):
    assert main(["run", str(tmp_path / "nope.toml")]) == 1
    assert "error:" in capsys.readouterr().err


def test_run_bad_config_exits_one(tmp_path, capsys):
    cfg = tmp_path / "exp.toml"
    cfg.write_text("[bogus]\nx = 1\n")
    assert main(["run", str(cfg)]) == 1


def test_run_divergence_exits_two(tmp_path, capsys):
    cfg = tmp_path / "exp.toml"
    cfg.write_text(DIVERGENT_TOML)
    assert main(["run", str(cfg), "--out", str(tmp_path / "out")]) == 2
    assert "DIVERGED" in capsys.readouterr().err


def test_gradcheck_quadratic(capsys):
    assert main(["gradcheck", "quadratic"]) == 0
    assert "PASS" in capsys.readouterr().out


def test_gradcheck_all(capsys):
    assert main(["gradcheck", "all"]) == 0
    out = capsys.readouterr().out
    assert out.count("PASS") == 4


def test_bounds_exit_zero_and_report(tmp_path, capsys):
    cfg = tmp_path / "bounds.toml"
    cfg.write_text(BOUNDS_TOML)
    out = tmp_path / "bounds-out"
    assert main(["bounds", str(cfg), "--out", str(out)]) == 0
    payload = json.loads((out / "bounds.json").read_text())
    assert payload["cells"][0]["steps"] == 100
    assert "pass" in capsys.readouterr().out


def test_bounds_flag_exits_three(tmp_path, capsys):
    # a slack below -1 makes the threshold negative, which no run can meet;
    # only the flag path is under test here
    cfg = tmp_path / "bounds.toml"
    cfg.write_text(BOUNDS_TOML.replace("slack = 0.5", "slack = -1.5"))
    assert main(["bounds", str(cfg), "--out", str(tmp_path / "o")]) == 3
    assert "FAIL" in capsys.readouterr().out


def test_bounds_bad_config_exits_one(tmp_path):
    cfg = tmp_path / "bounds.toml"
    cfg.write_text("[bounds]\nbogus = 1\n")
    assert main(["bounds", str(cfg)]) == 1


def test_report_rebuilds_tables(tmp_path, capsys):
    cfg = tmp_path / "exp.toml"
    cfg.write_text(RUN_TOML)
    run_dir = tmp_path / "out"
    assert main(["run", str(cfg), "--out", str(run_dir)]) == 0
    capsys.readouterr()
    rebuilt = tmp_path / "rebuilt"
    assert main(["report", str(run_dir), "--out", str(rebuilt)]) == 0
    lines = (rebuilt / "comparison.csv").read_text().splitlines()
    assert len(lines) == 3  # header + sgd + samar
    assert "2 table rows" in capsys.readouterr().out


def test_report_missing_dir_exits_one(tmp_path):
    assert main(["report", str(tmp_path / "empty")]) == 1
