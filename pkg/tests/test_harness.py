import subprocess
import sys
from pathlib import Path

import pytest

from aoimdp.config import parse_config
from aoimdp.harness import run_command

GOLDEN = Path(__file__).parent / "golden"
FAST = ["--set", "train.epochs=3", "--set", "train.steps=15", "--set", "train.eval_episodes=2"]
EXP = ["--set", "delay.kind=exponential", "--set", "delay.rate=1"]


def header(path):
    return path.read_text(encoding="utf-8").splitlines()[0]


def golden(name):
    return (GOLDEN / name).read_text(encoding="utf-8").strip()


def test_train_writes_documented_artifacts(tmp_path):
    out = tmp_path / "t"
    assert run_command(["train", "--out", str(out), *FAST, *EXP, "--set", "train.log_episodes=true"]) == 0
    assert header(out / "metrics.csv") == golden("metrics.csv")
    assert header(out / "episode_log.csv") == golden("episode_log.csv")
    assert len((out / "metrics.csv").read_text().splitlines()) == 1 + 3
    for j in range(2):
        assert (out / f"policy_agent{j}.aoimdp").read_text().startswith("AOIMDP1\n")
    assert parse_config(out / "resolved.cfg") == parse_config(
        overrides=[*FAST[1::2], *EXP[1::2], "train.log_episodes=true", f"report.dir={out}"]
    )


def test_train_reruns_are_byte_identical(tmp_path):
    files = {}
    for run in ("a", "b"):
        out = tmp_path / run
        assert run_command(["train", "--out", str(out), *FAST, *EXP, "--set", "train.seed=1",
                            "--set", "train.log_episodes=true"]) == 0
        files[run] = {p.name: p.read_bytes() for p in out.iterdir() if p.name != "resolved.cfg"}
    assert files["a"] == files["b"]
    assert set(files["a"]) == {"metrics.csv", "episode_log.csv", "policy_agent0.aoimdp", "policy_agent1.aoimdp"}


def test_eval_of_trained_and_scripted_policies(tmp_path):
    trained = tmp_path / "t"
    run_command(["train", "--out", str(trained), *FAST, *EXP])
    out = tmp_path / "e"
    assert run_command(["eval", "--out", str(out), "--policy-dir", str(trained), *FAST, *EXP]) == 0
    assert header(out / "summary.csv") == golden("summary.csv")
    rows = (out / "summary.csv").read_text().splitlines()[1:]
    assert [r.split(",")[0] for r in rows] == [
        "mean_time_avg_aoi_s", "energy_j", "sum_data_rate_bps", "cumulative_reward"
    ]
    assert "±" in rows[0]
    out2 = tmp_path / "z"
    assert run_command(["eval", "--out", str(out2), *FAST, *EXP, "--set", "agent.kind=zero_wait"]) == 0
    assert header(out2 / "episode_log.csv") == golden("episode_log.csv")


def test_eval_of_untrained_learner_is_refused(tmp_path, capsys):
    assert run_command(["eval", "--out", str(tmp_path), *FAST, *EXP]) == 1
    assert "policy-dir" in capsys.readouterr().err


def test_sweep_delay_table_shape_and_seed_stability(tmp_path):
    tables = []
    for run in ("a", "b"):
        out = tmp_path / run
        args = ["sweep-delay", "--out", str(out), "--seeds", "2", "--set", "train.epochs=2",
                "--set", "train.steps=10", "--set", "train.eval_episodes=1"]
        assert run_command(args) == 0
        tables.append((out / "delay_sweep.csv").read_bytes())
        assert header(out / "delay_sweep_runs.csv") == golden("delay_sweep_runs.csv")
    assert tables[0] == tables[1]
    lines = tables[0].decode("utf-8").splitlines()
    assert lines[0] == golden("delay_sweep.csv")
    assert [ln.split(",")[0] for ln in lines[1:]] == ["ssp", "poisson", "exponential", "geometric"]
    for ln in lines[1:]:
        assert all("±" in cell for cell in ln.split(",")[1:])


def test_compare_mdp_writes_twin_curves(tmp_path):
    out = tmp_path / "c"
    assert run_command(["compare-mdp", "--out", str(out), *FAST, *EXP]) == 0
    a = out / "metrics_aoi_mdp.csv"
    b = out / "metrics_standard_mdp.csv"
    assert header(a) == header(b) == golden("metrics.csv")
    assert len(a.read_text().splitlines()) == len(b.read_text().splitlines()) == 4


def test_ssp_selftest(tmp_path):
    out = tmp_path / "s"
    assert run_command(["ssp-selftest", "--out", str(out), "--trials", "20"]) == 0
    lines = (out / "ssp_selftest.csv").read_text().splitlines()
    assert lines[0] == golden("ssp_selftest.csv")
    assert [float(ln.split(",")[0]) for ln in lines[1:]] == [0.0, 5.0, 10.0, 20.0]


def test_unknown_subcommand_exits_2():
    with pytest.raises(SystemExit) as exc:
        run_command(["frobnicate"])
    assert exc.value.code == 2


def test_config_errors_give_one_line_diagnostic(tmp_path, capsys):
    assert run_command(["train", "--out", str(tmp_path), "--set", "delay.kind=exponential"]) == 1
    err = capsys.readouterr().err.strip()
    assert "\n" not in err and "delay.rate" in err
    assert run_command(["train", "--config", str(tmp_path / "missing.cfg")]) == 1


def test_module_entry_point(tmp_path):
    res = subprocess.run(
        [sys.executable, "-m", "aoimdp", "ssp-selftest", "--trials", "5", "--out", str(tmp_path)],
        capture_output=True, text=True,
    )
    assert res.returncode == 0, res.stderr
    assert (tmp_path / "ssp_selftest.csv").exists()
