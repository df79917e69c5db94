import os
from pathlib import Path

import pytest

import hyperq as hq
from hyperq.harness import (
    ConfigError,
    ExperimentConfig,
    cmd_check,
    cmd_eval,
    cmd_oracle,
    cmd_train,
    main,
    read_artifacts,
)


def write_micro_config(tmp_path, out_name="out", xi=15, reps=2):
    cfg = tmp_path / "micro.ini"
    formulas = hq.bundled("formulas")
    cfg.write_text(
        f"""
[experiment]
formula = {formulas}/rescue.hltl
repetitions = {reps}
base_seed = 3
output_dir = {tmp_path / out_name}

[environment]
kind = wildfire
beta = 4

[hyperparams]
xi = {xi}
learning_rate = 1.0
epsilon_decay_episodes = 10
""")
    return cfg


def test_config_load_bundled():
    cfg = ExperimentConfig.load(hq.bundled("configs/wildfire.ini"))
    assert cfg.repetitions == 10
    assert cfg.seeds == list(range(1, 11))
    assert cfg.environment["kind"] == "wildfire"
    assert cfg.hyperparams.gamma == 0.99


def test_config_missing_file():
    with pytest.raises(ConfigError):
        ExperimentConfig.load("/nonexistent/experiment.ini")


def test_config_requires_formula(tmp_path):
    p = tmp_path / "bad.ini"
    p.write_text("[experiment]\nformula = missing.hltl\n[environment]\nkind = wildfire\n")
    with pytest.raises(ConfigError):
        ExperimentConfig.load(p)


def test_config_rejects_unknown_hyperparameter(tmp_path):
    p = tmp_path / "bad.ini"
    formulas = hq.bundled("formulas")
    p.write_text(
        f"[experiment]\nformula = {formulas}/rescue.hltl\n"
        "[environment]\nkind = wildfire\n[hyperparams]\nlearning_speed = 9\n")
    with pytest.raises(ConfigError):
        ExperimentConfig.load(p)


def test_config_seed_list_must_match_repetitions(tmp_path):
    p = tmp_path / "bad.ini"
    formulas = hq.bundled("formulas")
    p.write_text(
        f"[experiment]\nformula = {formulas}/rescue.hltl\nrepetitions = 3\nseeds = 1 2\n"
        "[environment]\nkind = wildfire\n")
    with pytest.raises(ConfigError):
        ExperimentConfig.load(p)


def test_cmd_check_valid_formula(capsys):
    assert cmd_check(hq.bundled("formulas/rescue.hltl")) == 0
    out = capsys.readouterr().out
    assert "exists f2(t1)." in out
    assert "forall t1." in out


def test_cmd_check_universal_formula_notes_unchanged_body(capsys):
    assert cmd_check(hq.bundled("formulas/fairness.hltl")) == 0
    assert "body unchanged" in capsys.readouterr().out


def test_cmd_check_reports_unbound_variable(tmp_path, capsys):
    p = tmp_path / "bad.hltl"
    p.write_text("forall t1. F p@t2\n")
    assert cmd_check(p) == 1


def test_cmd_check_missing_file():
    assert cmd_check("/nonexistent.hltl") == 2


def test_cmd_train_writes_expected_outputs(tmp_path, capsys):
    cfg = write_micro_config(tmp_path)
    assert cmd_train(cfg) == 0
    out_dir = tmp_path / "out"
    for seed in (3, 4):
        csv = (out_dir / f"run_{seed}.csv").read_text()
        assert csv.splitlines()[0] == "episode,rho"
        assert len(csv.splitlines()) == 16
        assert (out_dir / f"artifacts_{seed}.txt").exists()
    agg = (out_dir / "aggregate.csv").read_text().splitlines()
    assert agg[0] == "episode,rho"
    stdout = capsys.readouterr().out
    assert "satisfaction_rate" in stdout


def test_cmd_train_aggregate_is_mean_of_runs(tmp_path):
    cfg = write_micro_config(tmp_path, out_name="agg")
    cmd_train(cfg)
    out_dir = tmp_path / "agg"

    def read_rows(name):
        lines = (out_dir / name).read_text().splitlines()
        return [[float(x) for x in line.split(",")] for line in lines[1:]]

    runs = [read_rows("run_3.csv"), read_rows("run_4.csv")]
    agg = read_rows("aggregate.csv")
    for i, row in enumerate(agg):
        for j in range(1, len(row)):
            assert row[j] == pytest.approx((runs[0][i][j] + runs[1][i][j]) / 2)


def test_cmd_train_determinism_byte_identical(tmp_path):
    cfg = write_micro_config(tmp_path, out_name="a")
    cmd_train(cfg)
    first = {p.name: p.read_bytes() for p in sorted((tmp_path / "a").iterdir())}
    cfg2 = write_micro_config(tmp_path, out_name="b")
    cmd_train(cfg2)
    second = {p.name: p.read_bytes() for p in sorted((tmp_path / "b").iterdir())}
    assert first == second


def test_cmd_train_output_dir_env_override(tmp_path, monkeypatch):
    cfg = write_micro_config(tmp_path, xi=5, reps=1)
    monkeypatch.setenv("HYPERQ_OUT", str(tmp_path / "envdir"))
    cmd_train(cfg)
    assert (tmp_path / "envdir" / "run_3.csv").exists()


def test_cmd_train_bad_config_exit_code(tmp_path):
    p = tmp_path / "broken.ini"
    p.write_text("[experiment]\n")
    assert cmd_train(p) == 2


def test_artifacts_round_trip(tmp_path):
    cfg = write_micro_config(tmp_path, out_name="rt", xi=10, reps=1)
    cmd_train(cfg)
    policies, witnesses = read_artifacts(tmp_path / "rt" / "artifacts_3.txt")
    assert set(policies.policies) == {1, 2}
    assert len(witnesses) == 1
    assert witnesses[0].exist_index == 2 and witnesses[0].deps == (1,)
    assert witnesses[0].entries


def test_cmd_eval_runs_policy(tmp_path, capsys):
    cfg = write_micro_config(tmp_path, out_name="ev", xi=10, reps=1)
    cmd_train(cfg)
    capsys.readouterr()
    code = cmd_eval(tmp_path / "ev" / "artifacts_3.txt", cfg)
    out = capsys.readouterr().out
    assert "verdict:" in out
    assert "witness_consistent: true" in out
    assert code in (0, 1)
    assert ("verdict: satisfied" in out) == (code == 0)


def test_cmd_eval_missing_artifact(tmp_path):
    cfg = write_micro_config(tmp_path, xi=5, reps=1)
    assert cmd_eval(tmp_path / "nothing.txt", cfg) == 2


def test_cmd_oracle_pcp(capsys):
    code = cmd_oracle("pcp", dominoes=hq.bundled("dominoes/k3_solvable.dom"), max_len=6)
    assert code == 0
    assert capsys.readouterr().out.strip() == "solution: 2 1 3"
    code = cmd_oracle("pcp", dominoes=hq.bundled("dominoes/k3_unsolvable.dom"), max_len=6)
    assert code == 0
    assert capsys.readouterr().out.strip() == "none within bound"
    assert cmd_oracle("pcp", dominoes=hq.bundled("dominoes/k3_solvable.dom"), max_len=50) == 2


def test_cmd_oracle_boolean_sat(tmp_path, capsys):
    formula = tmp_path / "f.hltl"
    formula.write_text("exists t1. F p@t1\n")
    traces = tmp_path / "traces.txt"
    traces.write_text("p |\n\nq |\n")
    assert cmd_oracle("boolean-sat", formula=formula, traces=traces) == 0
    assert capsys.readouterr().out.strip() == "true"


def test_main_dispatches(capsys, tmp_path):
    assert main(["check", str(hq.bundled("formulas/safe_rl.hltl"))]) == 0
    capsys.readouterr()
    assert main(["oracle", "pcp", "--dominoes", str(hq.bundled("dominoes/k3_solvable.dom")),
                 "--max-len", "6"]) == 0
    with pytest.raises(SystemExit) as exc:
        main(["no-such-command"])
    assert exc.value.code == 2
