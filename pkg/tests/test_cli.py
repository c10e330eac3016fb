import json

import pytest

from mecsched.cli import DEFAULT_CONFIG, OUTPUT_DIR_ENV, run_cli, scenario_from_config
from mecsched.experiment import Scenario
from mecsched.ga import GaParams, run_ga
from mecsched.milp import build_model, export_lp
from mecsched.model import ObjectiveWeights, evaluate_objective
from mecsched.workload import WorkloadConfig, generate_workload, read_taskset, write_taskset

from oracles import I1


@pytest.fixture
def i1_csv(tmp_path):
    p = tmp_path / "i1.csv"
    write_taskset(I1, p)
    return p


def small_config(tmp_path, **extra):
    cfg = {"users": [4, 6], "tasks_per_user": [1, 2], "n_runs": 2,
           "ga": {"population": 10, "generations": 4}, "milp": {"node_limit": 2000}}
    cfg.update(extra)
    p = tmp_path / "c.json"
    p.write_text(json.dumps(cfg))
    return p


def parse_metrics(text):
    return {k: v for k, v in (line.split(" ", 1) for line in text.strip().splitlines())}


def test_schedule_stf_i1(i1_csv, capsys):
    assert run_cli(["schedule", "--algo", "stf", "--instance", str(i1_csv), "--lambda", "0.5", "--cpus", "1"]) == 0
    out = parse_metrics(capsys.readouterr().out)
    assert float(out["mean_delay"]) == pytest.approx(1.667, abs=5e-4)
    assert float(out["dropped_ratio"]) == 0
    assert float(out["objective"]) == pytest.approx(0.48333, abs=5e-6)


def test_schedule_fcfs_and_milp_json(i1_csv, capsys):
    assert run_cli(["schedule", "--algo", "fcfs", "--instance", str(i1_csv), "--cpus", "1", "--json"]) == 0
    doc = json.loads(capsys.readouterr().out)
    assert doc["mean_delay"] == 2.0 and doc["dropped_ratio"] == pytest.approx(1 / 3)
    assert run_cli(["schedule", "--algo", "milp", "--instance", str(i1_csv), "--cpus", "1", "--json"]) == 0
    doc = json.loads(capsys.readouterr().out)
    assert doc["objective"] == 0.25 and doc["status"] == "optimal"


def test_unknown_flag_exit_2(capsys):
    assert run_cli(["schedule", "--bogus"]) == 2
    assert "usage" in capsys.readouterr().err
    assert run_cli([]) == 2


def test_bad_lambda_and_missing_instance(tmp_path, i1_csv, capsys):
    assert run_cli(["schedule", "--algo", "stf", "--instance", str(i1_csv), "--lambda", "2"]) == 2
    assert run_cli(["schedule", "--algo", "stf", "--instance", str(tmp_path / "nope.csv")]) == 2


def test_config_rejects_unknown_keys(tmp_path, capsys):
    p = tmp_path / "bad.json"
    p.write_text(json.dumps({"users": [5], "colour": "red"}))
    assert run_cli(["experiment", "--config", str(p), "--out", str(tmp_path / "o")]) == 2
    assert "colour" in capsys.readouterr().err
    p.write_text(json.dumps({"ga": {"population": "many"}}))
    assert run_cli(["experiment", "--config", str(p), "--out", str(tmp_path / "o")]) == 2
    p.write_text("{not json")
    assert run_cli(["experiment", "--config", str(p)]) == 2
    assert not (tmp_path / "o").exists()


def test_defaults_are_the_desk_scenario():
    assert scenario_from_config(json.loads(json.dumps(DEFAULT_CONFIG))) == Scenario()
    assert DEFAULT_CONFIG["lambda"] == 0.5 and DEFAULT_CONFIG["n_runs"] == 10 and DEFAULT_CONFIG["m_cpus"] == 2
    assert GaParams(**DEFAULT_CONFIG["ga"]) == GaParams()


def test_default_config_command(capsys):
    assert run_cli(["default-config"]) == 0
    assert json.loads(capsys.readouterr().out) == DEFAULT_CONFIG


def test_experiment_byte_identical(tmp_path):
    cfg = small_config(tmp_path)
    assert run_cli(["experiment", "--config", str(cfg), "--out", str(tmp_path / "a")]) == 0
    assert run_cli(["experiment", "--config", str(cfg), "--out", str(tmp_path / "b"), "--workers", "2"]) == 0
    names = sorted(p.name for p in (tmp_path / "a").iterdir())
    assert names == sorted(p.name for p in (tmp_path / "b").iterdir())
    assert "results.csv" in names and "plot_mean_delay_tpu2.csv" in names and "timings.csv" not in names
    for n in names:
        assert (tmp_path / "a" / n).read_bytes() == (tmp_path / "b" / n).read_bytes()


def test_experiment_env_output_dir(tmp_path, monkeypatch):
    monkeypatch.setenv(OUTPUT_DIR_ENV, str(tmp_path / "env_out"))
    assert run_cli(["experiment", "--config", str(small_config(tmp_path)), "--timings"]) == 0
    assert (tmp_path / "env_out" / "results.json").exists()
    assert (tmp_path / "env_out" / "timings.csv").exists()


def test_generate_then_schedule_roundtrip(tmp_path, capsys):
    out = tmp_path / "w.csv"
    assert run_cli(["generate", "--users", "6", "--tasks-per-user", "3", "--seed", "11", "-o", str(out)]) == 0
    ts = generate_workload(WorkloadConfig(n_users=6, tasks_per_user=3, seed=11))
    assert read_taskset(out).tasks == ts.tasks
    hist = tmp_path / "h.csv"
    assert run_cli(["schedule", "--algo", "ga", "--instance", str(out), "--seed", "4", "--population", "16",
                    "--generations", "8", "--history", str(hist), "--json"]) == 0
    doc = json.loads(capsys.readouterr().out)
    res = run_ga(ts, 2, ObjectiveWeights(0.5), GaParams(population=16, generations=8, seed=4))
    assert doc["objective"] == evaluate_objective(res.schedule, ts, ObjectiveWeights(0.5))
    assert len(hist.read_text().splitlines()) == 10


def test_generate_to_stdout(capsys):
    assert run_cli(["generate", "--users", "2", "--tasks-per-user", "2"]) == 0
    lines = capsys.readouterr().out.splitlines()
    assert lines[0] == "task_id,user_id,arrival_ms,proc_ms,deadline_ms" and len(lines) == 5


def test_export_lp(tmp_path, i1_csv, capsys):
    target = tmp_path / "m.lp"
    assert run_cli(["export-lp", "--instance", str(i1_csv), "--cpus", "1", "-o", str(target)]) == 0
    assert target.read_text() == export_lp(build_model(I1, 1, ObjectiveWeights(0.5)))
    hook = tmp_path / "hook.lp"
    assert run_cli(["schedule", "--algo", "milp", "--instance", str(i1_csv), "--cpus", "1",
                    "--export-lp", str(hook)]) == 0
    assert hook.read_text() == target.read_text()


def test_require_optimal_budget(tmp_path, capsys):
    p = tmp_path / "big.csv"
    write_taskset(generate_workload(WorkloadConfig()), p)
    args = ["schedule", "--algo", "milp", "--instance", str(p), "--node-limit", "50"]
    assert run_cli(args) == 0
    assert "budget-exhausted" in capsys.readouterr().out
    assert run_cli(args + ["--require-optimal"]) == 1


def test_schedule_output_file(tmp_path, i1_csv):
    out = tmp_path / "s.csv"
    assert run_cli(["schedule", "--algo", "fcfs", "--instance", str(i1_csv), "--cpus", "1",
                    "--schedule-out", str(out)]) == 0
    assert out.read_text().splitlines() == ["task_id,cpu_id,start_ms,waiting_ms", "1,1,0,0", "3,1,5,4", "2,0,,"]


def test_bench_reports_reference_values(capsys):
    assert run_cli(["bench", "--sizes", "10", "--runs", "1"]) == 0
    out = capsys.readouterr().out
    assert "10,MILP," in out and ",42.2" in out and ",62.5" in out
    assert "qualitative" in out
    assert run_cli(["bench", "--sizes", "ten"]) == 2


def test_plot_data_command(tmp_path, capsys):
    cfg = small_config(tmp_path)
    assert run_cli(["experiment", "--config", str(cfg), "--out", str(tmp_path / "r")]) == 0
    capsys.readouterr()
    assert run_cli(["plot-data", "--results", str(tmp_path / "r" / "results.json"), "--metric", "objective",
                    "--out", str(tmp_path / "p")]) == 0
    assert sorted(p.name for p in (tmp_path / "p").iterdir()) == ["plot_objective_tpu1.csv",
                                                                  "plot_objective_tpu2.csv"]
