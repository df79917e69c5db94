"""Joint Q-learning driven by specification robustness.

One action-value function is learned over the joint state/action space of all
trace slots; the per-step reward is the robustness of the episode prefix
evaluated against the skolemized body, so no hand-written reward function is
involved.  Per-slot greedy policies and witness tables for existential
quantifiers are projected out of the trained function.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field

import numpy as np

from .env import ArityMismatchError, Environment, EpisodeRecord, JointAction, JointState
from .formula import Formula
from .robustness import RobustnessConfig, Trace, eval_hyper, sat_verdict
from .skolem import SkolemizedFormula, WitnessTable, skolemize, witness_key
from . import worlds


REWARD_MODES = ("prefix", "differential", "baseline_saferl", "baseline_pcp")


@dataclass
class Hyperparams:
    gamma: float = 0.99
    learning_rate: float = 0.1
    epsilon_start: float = 1.0
    epsilon_end: float = 0.05
    epsilon_decay_episodes: int | None = None  # default: first 80% of the episodes
    beta: int = 0                              # 0: use the environment's bound
    xi: int = 1000
    reward_mode: str = "prefix"
    approximator: str = "tabular"              # "tabular" | "mlp"
    mlp_layers: int = 2
    mlp_width: int = 64
    replay_capacity: int = 10000
    batch_size: int = 32
    rho_max: float = 100.0

    def __post_init__(self):
        if not 0.0 <= self.gamma <= 1.0:
            raise ValueError("gamma must lie in [0, 1]")
        if not self.epsilon_end <= self.epsilon_start <= 1.0:
            raise ValueError("need epsilon_end <= epsilon_start <= 1")
        if self.xi < 1 or self.beta < 0:
            raise ValueError("xi must be >= 1 and beta >= 0")
        if self.reward_mode not in REWARD_MODES:
            raise ValueError(f"unknown reward mode {self.reward_mode!r}")
        if self.approximator not in ("tabular", "mlp"):
            raise ValueError(f"unknown approximator {self.approximator!r}")

    def epsilon(self, episode: int) -> float:
        horizon = self.epsilon_decay_episodes or max(1, int(0.8 * self.xi))
        frac = min(1.0, episode / horizon)
        return self.epsilon_start + (self.epsilon_end - self.epsilon_start) * frac

    def config(self) -> RobustnessConfig:
        return RobustnessConfig(self.rho_max)


class TabularQ:
    """Action values keyed on encoded joint states, default-initialized to 0.

    Entries start as None internally so extraction can tell updated values
    from the optimistic default; lookups still see 0 for untouched entries.
    """

    def __init__(self, n_actions: int):
        self.n_actions = n_actions
        self.table: dict = {}

    def values(self, key) -> list:
        row = self.table.get(key)
        if row is None:
            return [0.0] * self.n_actions
        return [0.0 if v is None else v for v in row]

    def row(self, key) -> list:
        row = self.table.get(key)
        if row is None:
            row = [None] * self.n_actions
            self.table[key] = row
        return row

    def best(self, key, prefer_tried: bool = False) -> int:
        """Greedy action index, lowest index winning ties.

        With prefer_tried, actions that have received at least one update are
        ranked ahead of the optimistic default; rollouts of the final policy
        use this so one never-explored action cannot outrank a learned path.
        """
        row = self.table.get(key)
        if row is None:
            return 0
        best = None
        best_val = 0.0
        if prefer_tried and any(v is not None for v in row):
            for i, v in enumerate(row):
                if v is not None and (best is None or v > best_val):
                    best, best_val = i, v
            return best
        for i, v in enumerate(row):
            v = 0.0 if v is None else v
            if best is None or v > best_val:
                best, best_val = i, v
        return best


class MlpQ:
    """Small fully connected action-value network with rectified-linear units.

    Trained by plain gradient steps on the squared one-step temporal
    difference; quality is secondary to having a faithful function
    approximation mode, so there is no target network.
    """

    def __init__(self, n_features: int, n_actions: int, layers: int, width: int,
                 lr: float, rng: np.random.Generator):
        self.n_actions = n_actions
        self.lr = lr
        self.replay: list = []
        sizes = [n_features] + [width] * layers + [n_actions]
        self.weights = []
        self.biases = []
        for fan_in, fan_out in zip(sizes, sizes[1:]):
            scale = np.sqrt(2.0 / fan_in)
            self.weights.append(rng.normal(0.0, scale, size=(fan_in, fan_out)))
            self.biases.append(np.zeros(fan_out))

    def forward(self, x: np.ndarray):
        activations = [x]
        for i, (w, b) in enumerate(zip(self.weights, self.biases)):
            x = x @ w + b
            if i < len(self.weights) - 1:
                x = np.maximum(x, 0.0)
            activations.append(x)
        return activations

    def values(self, feats: np.ndarray) -> list:
        return list(self.forward(feats[None, :])[-1][0])

    def best(self, feats: np.ndarray) -> int:
        return int(np.argmax(self.values(feats)))

    def update_batch(self, feats: np.ndarray, action_idx: np.ndarray, targets: np.ndarray):
        activations = self.forward(feats)
        out = activations[-1]
        grad = np.zeros_like(out)
        rows = np.arange(len(action_idx))
        grad[rows, action_idx] = (out[rows, action_idx] - targets) * (2.0 / len(targets))
        for i in range(len(self.weights) - 1, -1, -1):
            a = activations[i]
            gw = a.T @ grad
            gb = grad.sum(axis=0)
            if i > 0:
                grad = (grad @ self.weights[i].T) * (activations[i] > 0)
            self.weights[i] -= self.lr * gw
            self.biases[i] -= self.lr * gb


def _canon(value):
    """Literal-eval-safe form of a slot state (frozensets become tagged tuples)."""
    if isinstance(value, frozenset):
        return ("frozenset", tuple(sorted(_canon(v) for v in value)))
    if isinstance(value, tuple):
        return tuple(_canon(v) for v in value)
    return value


def state_key(slot_state) -> str:
    """Canonical text key for one slot's observed state."""
    return repr(_canon(slot_state))


@dataclass
class PolicySet:
    """Per-quantifier greedy policies: observed slot state -> action name."""

    policies: dict = field(default_factory=dict)  # quantifier index -> {state key: action}

    def action_for(self, index: int, slot_state, default: str) -> str:
        return self.policies.get(index, {}).get(state_key(slot_state), default)


@dataclass
class TrainMetrics:
    columns: list
    rows: list = field(default_factory=list)

    def write_csv(self, fh):
        fh.write(",".join(self.columns) + "\n")
        for row in self.rows:
            fh.write(",".join(_format_cell(row[c]) for c in self.columns) + "\n")


def _format_cell(v) -> str:
    if isinstance(v, float):
        return str(int(v)) if v.is_integer() else repr(v)
    return str(v)


@dataclass
class TrainResult:
    q: object
    policies: PolicySet
    witnesses: list
    metrics: TrainMetrics
    final_record: EpisodeRecord


def immediate_reward(traces, sk: SkolemizedFormula, cfg: RobustnessConfig) -> float:
    """Robustness of the zipped episode prefix; the minimum for empty prefixes."""
    traces = list(traces)
    if any(len(t) == 0 for t in traces):
        return cfg.rho_min
    return eval_hyper(traces, sk, cfg)


def q_update(q, s_key, action_idx: int, reward: float, s_next_key, h: Hyperparams,
             done: bool = False):
    """One Bellman backup toward reward + gamma * max value of the next state."""
    if isinstance(q, TabularQ):
        bootstrap = 0.0 if done else h.gamma * max(q.values(s_next_key))
        row = q.row(s_key)
        old = 0.0 if row[action_idx] is None else row[action_idx]
        row[action_idx] = old + h.learning_rate * (reward + bootstrap - old)
        return q
    raise TypeError("q_update applies to TabularQ; MlpQ updates in batches")


def _joint_actions(env: Environment) -> list:
    return list(itertools.product(env.actions, repeat=env.arity))


class _EpisodeTracker:
    """Accumulates per-slot traces for one episode (per-step labels unless the
    environment derives traces itself, as the domino game does)."""

    def __init__(self, env: Environment, state: JointState):
        self.env = env
        self.hooked = env.trace_prefix(state) is not None
        self.labels = [list(env.label_of(state))] if not self.hooked else None
        self.state = state

    def advance(self, state: JointState):
        self.state = state
        if not self.hooked:
            self.labels.append(list(self.env.label_of(state)))

    def traces(self) -> list:
        if self.hooked:
            return list(self.env.trace_prefix(self.state))
        return [Trace(tuple(row[i] for row in self.labels)) for i in range(self.env.arity)]


def _q_key(env, state, rho):
    return env.encode(state)


def _run_episode(env, sk, h, cfg, q, joint_actions, rng, eps, seed, learn=True):
    """One episode of acting (and optionally learning); returns its record."""
    record = EpisodeRecord(seed=seed)
    state = env.reset(seed)
    record.states.append(state)
    tracker = _EpisodeTracker(env, state)
    baseline_kind = h.reward_mode.split("_", 1)[1] if h.reward_mode.startswith("baseline") else None
    rho_prev = immediate_reward(tracker.traces(), sk, cfg)
    beta = min(h.beta, env.beta) if h.beta else env.beta

    for _ in range(beta):
        key = _q_key(env, state, rho_prev) if isinstance(q, TabularQ) else env.features(state)
        if learn and rng.random() < eps:
            a_idx = int(rng.integers(len(joint_actions)))
        elif isinstance(q, TabularQ):
            a_idx = q.best(key, prefer_tried=not learn)
        else:
            a_idx = q.best(key)
        action = JointAction(joint_actions[a_idx])
        nxt = env.step(state, action)
        tracker.advance(nxt)
        done = nxt.step_count >= beta

        rho = immediate_reward(tracker.traces(), sk, cfg)
        if baseline_kind is not None:
            reward = worlds.baseline_reward(baseline_kind, env, state, action, nxt)
        else:
            reward = rho if h.reward_mode == "prefix" else rho - rho_prev

        if learn:
            if isinstance(q, TabularQ):
                q_update(q, key, a_idx, reward, _q_key(env, nxt, rho), h, done=done)
            else:
                _mlp_step(q, h, rng, key, a_idx, reward, env.features(nxt), done)

        rho_prev = rho
        record.states.append(nxt)
        record.actions.append(action.per_trace)
        record.rhos.append(rho)
        state = nxt

    record.traces = tracker.traces()
    record.terminal_rho = record.rhos[-1] if record.rhos else rho_prev
    return record


def _mlp_step(q: MlpQ, h: Hyperparams, rng, feats, a_idx, reward, nxt_feats, done):
    q.replay.append((feats, a_idx, reward, nxt_feats, done))
    if len(q.replay) > h.replay_capacity:
        q.replay.pop(0)
    if len(q.replay) < h.batch_size:
        return
    idx = rng.integers(len(q.replay), size=h.batch_size)
    batch = [q.replay[int(i)] for i in idx]
    feat_batch = np.stack([b[0] for b in batch])
    acts = np.asarray([b[1] for b in batch])
    nxt_batch = np.stack([b[3] for b in batch])
    nxt_best = q.forward(nxt_batch)[-1].max(axis=1)
    dones = np.asarray([b[4] for b in batch])
    targets = np.asarray([b[2] for b in batch]) + h.gamma * nxt_best * (~dones)
    q.update_batch(feat_batch, acts, targets)


def _metric_columns(env: Environment) -> list:
    if env.kind == "grid":
        return ["episode", "total_done", "total_col", "rho"]
    if env.kind == "pcp":
        return ["episode", "tot_done", "rho"]
    if env.kind == "resource":
        return ["episode", "min", "max", "avg", "rho"]
    return ["episode", "rho"]


def _metric_row(env, episode, record, cumulative) -> dict:
    stats = worlds.episode_stats(env, record)
    row = {"episode": episode, "rho": record.terminal_rho}
    if env.kind == "grid":
        cumulative["done"] = cumulative.get("done", 0) + stats["done"]
        row["total_done"] = cumulative["done"]
        row["total_col"] = stats["collisions"]
    elif env.kind == "pcp":
        cumulative["match"] = cumulative.get("match", 0) + stats["match"]
        row["tot_done"] = cumulative["match"]
    elif env.kind == "resource":
        row.update({k: stats[k] for k in ("min", "max", "avg")})
    return row


def train(env: Environment, f: Formula, h: Hyperparams, seed: int) -> TrainResult:
    """Run xi episodes of epsilon-greedy learning and extract the artifacts.

    Deterministic: a fixed (environment, formula, hyperparameters, seed)
    reproduces the metrics exactly.
    """
    sk = skolemize(f)
    if sk.arity != env.arity:
        raise ArityMismatchError(
            f"formula quantifies {sk.arity} traces, environment has {env.arity} slots")
    cfg = h.config()
    rng = np.random.default_rng(seed)
    joint_actions = _joint_actions(env)
    if h.approximator == "tabular":
        q = TabularQ(len(joint_actions))
    else:
        q = MlpQ(len(env.features(env.reset(seed))), len(joint_actions),
                 h.mlp_layers, h.mlp_width, h.learning_rate, rng)

    metrics = TrainMetrics(_metric_columns(env))
    cumulative: dict = {}
    for episode in range(h.xi):
        # per-episode stream: episode e explores identically whatever xi is
        ep_rng = np.random.default_rng((seed, episode))
        record = _run_episode(env, sk, h, cfg, q, joint_actions, ep_rng,
                              h.epsilon(episode), seed, learn=True)
        metrics.rows.append(_metric_row(env, episode, record, cumulative))

    final = _run_episode(env, sk, h, cfg, q, joint_actions, rng, 0.0, seed, learn=False)
    policies, witnesses = extract_policies(q, env, sk, [final])
    return TrainResult(q, policies, witnesses, metrics, final)


def extract_policies(q, env: Environment, sk: SkolemizedFormula, episodes: list):
    """Project per-slot policies and witness tables out of greedy episodes.

    The policy of slot i maps the slot's observed state to the i-th component
    of the joint action taken there.  Witness tables record, for every step t,
    the dependency traces' prefixes mapped to the existential trace prefix and
    the actions that produced it.
    """
    policies = PolicySet({i + 1: {} for i in range(env.arity)})
    witnesses = [WitnessTable(d.exist_index, d.deps) for d in sk.decls]
    for record in episodes:
        for t, action in enumerate(record.actions):
            state = record.states[t]
            for i in range(env.arity):
                policies.policies[i + 1][state_key(state.per_trace[i])] = action[i]
        prefixes = _prefixes_per_step(env, record)
        for table in witnesses:
            e = table.exist_index - 1
            for t, step_traces in enumerate(prefixes):
                key = witness_key(tuple(step_traces[j - 1] for j in table.deps))
                actions = tuple(a[e] for a in record.actions[:t])
                table.record(key, step_traces[e], actions)
    return policies, witnesses


def _prefixes_per_step(env: Environment, record: EpisodeRecord) -> list:
    """Per-slot trace prefixes after 0..steps steps."""
    out = []
    if env.trace_prefix(record.states[0]) is not None:
        for s in record.states:
            out.append(list(env.trace_prefix(s)))
    else:
        labels = [list(env.label_of(s)) for s in record.states]
        for t in range(len(record.states)):
            out.append([Trace(tuple(labels[p][i] for p in range(t + 1)))
                        for i in range(env.arity)])
    return out


def greedy_rollout(policies: PolicySet, env: Environment, sk: SkolemizedFormula,
                   cfg: RobustnessConfig, seed: int = 0) -> EpisodeRecord:
    """Deterministic episode under the extracted per-slot policies.

    States never seen during extraction fall back to the first action.
    """
    record = EpisodeRecord(seed=seed)
    state = env.reset(seed)
    record.states.append(state)
    tracker = _EpisodeTracker(env, state)
    default = env.actions[0]
    for _ in range(env.beta):
        action = JointAction(tuple(
            policies.action_for(i + 1, state.per_trace[i], default)
            for i in range(env.arity)))
        nxt = env.step(state, action)
        tracker.advance(nxt)
        record.states.append(nxt)
        record.actions.append(action.per_trace)
        record.rhos.append(immediate_reward(tracker.traces(), sk, cfg))
        state = nxt
    record.traces = tracker.traces()
    record.terminal_rho = record.rhos[-1] if record.rhos else cfg.rho_min
    return record


def rollout_verdict(record: EpisodeRecord, cfg: RobustnessConfig):
    return sat_verdict(record.terminal_rho, cfg)
