"""Command-line front-end: formula checking, training runs, policy evaluation,
and the exhaustive oracles.

Experiments are described by INI files with three flat sections::

    [experiment]
    formula = ../formulas/rescue.hltl
    repetitions = 10
    base_seed = 1            ; or  seeds = 3 17 42
    output_dir = results/wildfire

    [environment]
    kind = wildfire          ; grid | wildfire | pcp | resource
    beta = 8

    [hyperparams]
    xi = 3000
    gamma = 0.99

Relative paths resolve against the config file's directory.  Exit codes:
0 success/satisfied, 1 violation, 2 usage or configuration error.
"""

from __future__ import annotations

import argparse
import configparser
import os
import sys
import time
from dataclasses import dataclass, field
from pathlib import Path

from .env import Environment
from .formula import Formula, FormulaError, load_formula, unparse, validate
from .learner import (
    Hyperparams,
    PolicySet,
    TrainResult,
    greedy_rollout,
    state_key,
    train,
)
from .robustness import RobustnessConfig, Trace, Verdict, boolean_sat, sat_verdict
from .skolem import WitnessTable, check_consistency, format_skolemized, skolemize
from .worlds import BoundTooLargeError, build_env, load_domino_file, pcp_oracle


OUTPUT_DIR_ENV = "HYPERQ_OUT"


class ConfigError(ValueError):
    pass


class ArtifactMissingError(FileNotFoundError):
    pass


@dataclass
class ExperimentConfig:
    formula_path: Path
    environment: dict
    hyperparams: Hyperparams
    repetitions: int
    seeds: list
    output_dir: Path
    base_dir: Path

    @staticmethod
    def load(path) -> "ExperimentConfig":
        path = Path(path)
        if not path.exists():
            raise ConfigError(f"config file {path} does not exist")
        parser = configparser.ConfigParser(inline_comment_prefixes=(";",))
        parser.read(path)
        for section in ("experiment", "environment"):
            if section not in parser:
                raise ConfigError(f"config is missing the [{section}] section")
        exp = parser["experiment"]
        base = path.parent

        formula_path = base / exp.get("formula", "")
        if not exp.get("formula") or not formula_path.exists():
            raise ConfigError(f"formula file {formula_path} does not exist")

        reps = exp.getint("repetitions", 1)
        if reps < 1:
            raise ConfigError("repetitions must be >= 1")
        if exp.get("seeds"):
            seeds = [int(s) for s in exp["seeds"].split()]
            if len(seeds) != reps:
                raise ConfigError(f"{len(seeds)} seeds given for {reps} repetitions")
        else:
            base_seed = exp.getint("base_seed", 1)
            seeds = [base_seed + i for i in range(reps)]

        hp_section = dict(parser["hyperparams"]) if "hyperparams" in parser else {}
        hyperparams = _parse_hyperparams(hp_section)

        out = Path(exp.get("output_dir", f"results/{path.stem}"))
        if not out.is_absolute():
            out = base / out
        return ExperimentConfig(
            formula_path=formula_path,
            environment=dict(parser["environment"]),
            hyperparams=hyperparams,
            repetitions=reps,
            seeds=seeds,
            output_dir=out,
            base_dir=base,
        )

    def make_env(self) -> Environment:
        return build_env(self.environment, self.base_dir)

    def load_formula(self) -> Formula:
        return load_formula(self.formula_path)


_HP_INTS = {"epsilon_decay_episodes", "beta", "xi", "mlp_layers", "mlp_width",
            "replay_capacity", "batch_size"}
_HP_FLOATS = {"gamma", "learning_rate", "epsilon_start", "epsilon_end", "rho_max"}
_HP_STRS = {"reward_mode", "approximator"}


def _parse_hyperparams(section: dict) -> Hyperparams:
    kwargs = {}
    for key, raw in section.items():
        if key in _HP_INTS:
            kwargs[key] = int(raw)
        elif key in _HP_FLOATS:
            kwargs[key] = float(raw)
        elif key in _HP_STRS:
            kwargs[key] = raw.strip()
        else:
            raise ConfigError(f"unknown hyperparameter {key!r}")
    try:
        return Hyperparams(**kwargs)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc


@dataclass
class RunSummary:
    verdicts: list = field(default_factory=list)     # (seed, Verdict, terminal rho)
    wall_clock_seconds: float = 0.0

    @property
    def satisfaction_rate(self) -> float:
        if not self.verdicts:
            return 0.0
        return sum(1 for _, v, _ in self.verdicts if v is Verdict.SATISFIED) / len(self.verdicts)

    @property
    def mean_terminal_rho(self) -> float:
        if not self.verdicts:
            return 0.0
        return sum(r for _, _, r in self.verdicts) / len(self.verdicts)


# ---------------------------------------------------------------------------
# Artifact files

def _escape(text: str) -> str:
    return text.replace("\n", ";")


def _unescape(text: str) -> str:
    return text.replace(";", "\n")


def write_artifacts(path: Path, result: TrainResult):
    """Policies and witness tables in one line-oriented text file."""
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for index in sorted(result.policies.policies):
            fh.write(f"policy {index}\n")
            for key, action in sorted(result.policies.policies[index].items()):
                fh.write(f"{key}\t{action}\n")
        for table in result.witnesses:
            deps = ",".join(str(d) for d in table.deps)
            fh.write(f"witness {table.exist_index} deps={deps}\n")
            for key, (trace, actions) in sorted(table.entries.items()):
                joined_key = " || ".join(_escape(k) for k in key)
                fh.write(f"{joined_key}\t{_escape(trace.to_text())}\t{' '.join(actions)}\n")


def read_artifacts(path) -> tuple:
    path = Path(path)
    if not path.exists():
        raise ArtifactMissingError(str(path))
    policies = PolicySet({})
    witnesses = []
    current_policy = None
    current_witness = None
    for line in path.read_text(encoding="utf-8").splitlines():
        if line.startswith("policy "):
            current_policy = int(line.split()[1])
            current_witness = None
            policies.policies[current_policy] = {}
        elif line.startswith("witness "):
            head, deps_part = line.split(" deps=")
            deps = tuple(int(d) for d in deps_part.split(",") if d)
            current_witness = WitnessTable(int(head.split()[1]), deps)
            witnesses.append(current_witness)
            current_policy = None
        elif current_policy is not None and line:
            key, _, action = line.rpartition("\t")
            policies.policies[current_policy][key] = action
        elif current_witness is not None and line:
            joined_key, trace_text, actions = line.split("\t")
            key = tuple(_unescape(k) for k in joined_key.split(" || ")) if joined_key else ()
            current_witness.record(key, Trace.from_text(_unescape(trace_text)),
                                   tuple(actions.split()))
    return policies, witnesses


# ---------------------------------------------------------------------------
# Commands

def cmd_check(formula_path, quiet: bool = False) -> int:
    try:
        f = load_formula(formula_path)
    except FileNotFoundError:
        print(f"error: formula file {formula_path} does not exist", file=sys.stderr)
        return 2
    except FormulaError as exc:
        print(f"syntax error: {exc}", file=sys.stderr)
        return 1
    diagnostics = validate(f)
    for d in diagnostics:
        print(f"{d.code}: {d.message}")
    if diagnostics:
        return 1
    sk = skolemize(f)
    if not quiet:
        print(f"formula: {unparse(f)}")
        if sk.decls:
            print(f"skolemized: {format_skolemized(sk, unparse(Formula((), sk.body)))}")
        else:
            print("skolemized: no existential quantifiers; body unchanged")
    return 0


def cmd_skolemize(formula_path) -> int:
    return cmd_check(formula_path, quiet=False)


def _aggregate_rows(all_metrics) -> list:
    columns = all_metrics[0].columns
    rows = []
    for i in range(len(all_metrics[0].rows)):
        row = {"episode": all_metrics[0].rows[i]["episode"]}
        for c in columns:
            if c == "episode":
                continue
            row[c] = sum(m.rows[i][c] for m in all_metrics) / len(all_metrics)
        rows.append(row)
    return rows


def cmd_train(config_path, out=None, reps=None, seed=None) -> int:
    try:
        cfg = ExperimentConfig.load(config_path)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    if reps is not None:
        cfg.repetitions = reps
        base = seed if seed is not None else cfg.seeds[0]
        cfg.seeds = [base + i for i in range(reps)]
    elif seed is not None:
        cfg.seeds = [seed + i for i in range(cfg.repetitions)]
    out_dir = Path(out or os.environ.get(OUTPUT_DIR_ENV) or cfg.output_dir)
    out_dir.mkdir(parents=True, exist_ok=True)

    f = cfg.load_formula()
    diagnostics = validate(f)
    if diagnostics:
        for d in diagnostics:
            print(f"{d.code}: {d.message}", file=sys.stderr)
        return 2
    rob_cfg = cfg.hyperparams.config()
    summary = RunSummary()
    started = time.perf_counter()
    all_metrics = []
    for rep_seed in cfg.seeds:
        env = cfg.make_env()
        result = train(env, f, cfg.hyperparams, rep_seed)
        all_metrics.append(result.metrics)
        with open(out_dir / f"run_{rep_seed}.csv", "w", encoding="utf-8", newline="\n") as fh:
            result.metrics.write_csv(fh)
        write_artifacts(out_dir / f"artifacts_{rep_seed}.txt", result)
        verdict = sat_verdict(result.final_record.terminal_rho, rob_cfg)
        summary.verdicts.append((rep_seed, verdict, result.final_record.terminal_rho))
    summary.wall_clock_seconds = time.perf_counter() - started

    with open(out_dir / "aggregate.csv", "w", encoding="utf-8", newline="\n") as fh:
        fh.write(",".join(all_metrics[0].columns) + "\n")
        for row in _aggregate_rows(all_metrics):
            from .learner import _format_cell
            fh.write(",".join(_format_cell(row[c]) for c in all_metrics[0].columns) + "\n")

    for rep_seed, verdict, rho in summary.verdicts:
        print(f"seed {rep_seed}: {verdict.value} (terminal rho {rho})")
    print(f"repetitions: {cfg.repetitions}")
    print(f"satisfaction_rate: {summary.satisfaction_rate}")
    print(f"mean_terminal_rho: {summary.mean_terminal_rho}")
    print(f"wall_clock_seconds: {summary.wall_clock_seconds:.2f}")
    print(f"outputs: {out_dir}")
    return 0


def cmd_eval(policy_path, config_path) -> int:
    try:
        cfg = ExperimentConfig.load(config_path)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    try:
        policies, witnesses = read_artifacts(policy_path)
    except ArtifactMissingError as exc:
        print(f"error: artifact file {exc} does not exist", file=sys.stderr)
        return 2
    f = cfg.load_formula()
    sk = skolemize(f)
    env = cfg.make_env()
    rob_cfg = cfg.hyperparams.config()
    record = greedy_rollout(policies, env, sk, rob_cfg, seed=cfg.seeds[0])
    for t, rho in enumerate(record.rhos):
        print(f"step {t + 1}: rho {rho}")
    verdict = sat_verdict(record.terminal_rho, rob_cfg)
    print(f"verdict: {verdict.value}")
    if witnesses:
        assignment = {q.var: trace for q, trace in zip(f.prefix, record.traces)}
        try:
            ok = check_consistency(assignment, witnesses)
        except KeyError:
            ok = False
        print(f"witness_consistent: {str(ok).lower()}")
    return 0 if verdict is Verdict.SATISFIED else 1


def cmd_oracle(subject: str, **kwargs) -> int:
    if subject == "pcp":
        dominoes = load_domino_file(kwargs["dominoes"])
        try:
            solution = pcp_oracle(dominoes, kwargs.get("max_len", 8))
        except BoundTooLargeError as exc:
            print(f"error: {exc}", file=sys.stderr)
            return 2
        if solution is None:
            print("none within bound")
        else:
            print("solution: " + " ".join(str(i) for i in solution))
        return 0
    if subject == "boolean-sat":
        f = load_formula(kwargs["formula"])
        text = Path(kwargs["traces"]).read_text(encoding="utf-8")
        traces = [Trace.from_text(chunk) for chunk in text.split("\n\n") if chunk.strip()]
        result = boolean_sat(traces, f)
        print(str(result).lower())
        return 0
    print(f"unknown oracle subject {subject!r}", file=sys.stderr)
    return 2


# ---------------------------------------------------------------------------
# Argument parsing

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="hyperq",
        description="Check trace-quantified specifications, train policies against "
                    "their robustness, and evaluate the results.")
    sub = parser.add_subparsers(dest="command", required=True)

    p_check = sub.add_parser("check", help="parse, validate, and print the skolemized form")
    p_check.add_argument("formula")

    p_skolem = sub.add_parser("skolemize", help="print the skolemized form of a formula")
    p_skolem.add_argument("formula")

    p_train = sub.add_parser("train", help="run a training experiment from a config file")
    p_train.add_argument("--config", required=True)
    p_train.add_argument("--out", help=f"output directory (overrides ${OUTPUT_DIR_ENV} and config)")
    p_train.add_argument("--reps", type=int)
    p_train.add_argument("--seed", type=int)

    p_eval = sub.add_parser("eval", help="greedy rollout of trained artifacts")
    p_eval.add_argument("--policy", required=True, help="artifacts file written by train")
    p_eval.add_argument("--config", required=True)

    p_oracle = sub.add_parser("oracle", help="exhaustive reference procedures")
    oracle_sub = p_oracle.add_subparsers(dest="subject", required=True)
    p_pcp = oracle_sub.add_parser("pcp", help="shortest domino match by exhaustive search")
    p_pcp.add_argument("--dominoes", required=True)
    p_pcp.add_argument("--max-len", type=int, default=8)
    p_bool = oracle_sub.add_parser("boolean-sat", help="explicit quantifier enumeration")
    p_bool.add_argument("--formula", required=True)
    p_bool.add_argument("--traces", required=True)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.command == "check":
        return cmd_check(args.formula)
    if args.command == "skolemize":
        return cmd_skolemize(args.formula)
    if args.command == "train":
        return cmd_train(args.config, out=args.out, reps=args.reps, seed=args.seed)
    if args.command == "eval":
        return cmd_eval(args.policy, args.config)
    if args.command == "oracle":
        if args.subject == "pcp":
            return cmd_oracle("pcp", dominoes=args.dominoes, max_len=args.max_len)
        return cmd_oracle("boolean-sat", formula=args.formula, traces=args.traces)
    return 2


if __name__ == "__main__":
    sys.exit(main())
