import json

import pytest

from navp.cli import main


@pytest.fixture
def fast_config(tmp_path):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({
        "resolution": [320, 180],
        "scene_cycle": 4,
        "num_shapes": 6,
    }), encoding="utf-8")
    return cfg


def test_scenarios_lists_all_presets(capsys):
    assert main(["scenarios"]) == 0
    out = capsys.readouterr().out
    for name in ("extreme-4g", "congested-4g", "hybrid-4g5g", "good-5g", "ultra-5g"):
        assert name in out
    assert "800" in out and "100" in out  # ultra downlink, 4g base RTT


def test_run_writes_csv_and_summary(tmp_path, fast_config, capsys):
    out = tmp_path / "r.csv"
    code = main([
        "run", "--scenario", "ultra-5g", "--mode", "static", "--frames", "10",
        "--seed", "42", "--out", str(out), "--codec", "quant",
        "--config", str(fast_config),
    ])
    assert code == 0
    assert out.exists()
    summary_path = tmp_path / "r.csv.summary.json"
    assert summary_path.exists()
    summary = json.loads(summary_path.read_text(encoding="utf-8"))
    assert summary["frames"] == 10
    assert summary["scenario"] == "ultra-5g"
    assert "median" in capsys.readouterr().out


def test_unknown_scenario_is_usage_error(tmp_path, capsys):
    code = main(["run", "--scenario", "nosuch", "--mode", "static",
                 "--out", str(tmp_path / "x.csv")])
    assert code == 2
    assert "unknown scenario" in capsys.readouterr().err


def test_unknown_flag_is_usage_error(capsys):
    assert main(["run", "--bogus"]) == 2
    assert "usage" in capsys.readouterr().err


def test_missing_subcommand_is_usage_error():
    assert main([]) == 2


def test_compare_outputs_deltas(tmp_path, fast_config, capsys):
    a_csv, b_csv = tmp_path / "a.csv", tmp_path / "b.csv"
    for path, mode in ((a_csv, "static"), (b_csv, "adaptive")):
        assert main([
            "run", "--scenario", "extreme-4g", "--mode", mode, "--frames", "30",
            "--seed", "1", "--out", str(path), "--codec", "quant",
            "--config", str(fast_config),
        ]) == 0
    capsys.readouterr()
    code = main([
        "compare",
        "--a", str(tmp_path / "a.csv.summary.json"),
        "--b", str(tmp_path / "b.csv.summary.json"),
        "--out", str(tmp_path / "cmp"),
    ])
    assert code == 0
    out = capsys.readouterr().out
    assert "rtt_median_reduction_pct" in out
    report = json.loads((tmp_path / "cmp.json").read_text(encoding="utf-8"))
    assert report["rtt_median_reduction_pct"] > 0
    assert (tmp_path / "cmp.frames.csv").exists()


def test_compare_mismatch_is_runtime_error(tmp_path, fast_config, capsys):
    a_csv, b_csv = tmp_path / "a.csv", tmp_path / "b.csv"
    for path, scen in ((a_csv, "ultra-5g"), (b_csv, "good-5g")):
        assert main([
            "run", "--scenario", scen, "--mode", "static", "--frames", "5",
            "--seed", "1", "--out", str(path), "--codec", "quant",
            "--config", str(fast_config),
        ]) == 0
    code = main([
        "compare",
        "--a", str(tmp_path / "a.csv.summary.json"),
        "--b", str(tmp_path / "b.csv.summary.json"),
    ])
    assert code == 1
    assert "mismatched" in capsys.readouterr().err
