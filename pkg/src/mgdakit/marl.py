"""Tabular multi-agent policy-gradient training.

Each agent holds a softmax policy over global states; a shared multi-head
value table provides one return baseline per agent.  Every agent computes
one clipped-surrogate gradient per reward head; the trainers differ only in
how those per-head gradients are combined into an update direction:

* ``independent`` - own head only,
* ``mgpo`` - min-norm combination over all heads,
* ``mgpo_pp`` - min-norm over heads whose gradient norm exceeds a threshold.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import csv
import json

import numpy as np

from .min_norm import min_norm_element
from .gridworld import MatrixGameEnv

__all__ = [
    "PolicyTable",
    "MultiHeadValueTable",
    "Episode",
    "RolloutBatch",
    "TrainConfig",
    "EvalRecord",
    "TrainingTrace",
    "TrainResult",
    "ALGOS",
    "collect",
    "advantages",
    "surrogate_gradient",
    "entropy_gradient",
    "flatten_gradient",
    "train",
    "evaluate",
    "matrix_game_exact_gradients",
    "zero_gradient_diagnostic",
]

ALGOS = ("independent", "mgpo", "mgpo_pp")


class PolicyTable:
    """Softmax policy over states, stored as per-state logit rows."""

    def __init__(self, n_actions: int):
        self.n_actions = n_actions
        self.logits: Dict[object, np.ndarray] = {}
        self._probs_cache: Dict[object, np.ndarray] = {}

    def row(self, state) -> np.ndarray:
        row = self.logits.get(state)
        if row is None:
            row = np.zeros(self.n_actions)
            self.logits[state] = row
        return row

    def probs(self, state) -> np.ndarray:
        p = self._probs_cache.get(state)
        if p is None:
            z = self.row(state)
            e = np.exp(z - z.max())
            p = e / e.sum()
            self._probs_cache[state] = p
        return p

    def sample(self, state, rng: np.random.Generator) -> int:
        p = self.probs(state)
        return int(np.searchsorted(np.cumsum(p), rng.random()))

    def greedy(self, state) -> int:
        return int(np.argmax(self.row(state)))

    def apply_update(self, delta: Dict[object, np.ndarray]) -> None:
        for state, d in delta.items():
            self.row(state)
            self.logits[state] = self.logits[state] + d
        self._probs_cache.clear()

    def sharpened(self, scale: float = 20.0) -> "PolicyTable":
        """Near-deterministic copy: all logit mass on each state's greedy action.

        Useful for studying a learner against an already-converged partner,
        whose sampled trajectories then carry essentially no advantage noise.
        """
        out = PolicyTable(self.n_actions)
        for state, logits in self.logits.items():
            row = np.zeros_like(logits)
            row[int(np.argmax(logits))] = scale
            out.logits[state] = row
        return out


class MultiHeadValueTable:
    """Per-state vector of return baselines, one head per agent."""

    def __init__(self, n_heads: int):
        self.n_heads = n_heads
        self.values: Dict[object, np.ndarray] = {}

    def row(self, state) -> np.ndarray:
        row = self.values.get(state)
        if row is None:
            row = np.zeros(self.n_heads)
            self.values[state] = row
        return row


@dataclass
class Episode:
    states: List[object]
    actions: np.ndarray  # (T, N) int
    rewards: np.ndarray  # (T, N)
    old_probs: np.ndarray  # (T, N) prob of the chosen action at collection time

    def __len__(self) -> int:
        return len(self.states)


@dataclass
class RolloutBatch:
    episodes: List[Episode]
    env_steps: int


def collect(env, policies: Sequence[PolicyTable], episodes: int, rng) -> RolloutBatch:
    """On-policy rollouts; deterministic given the generator state."""
    if episodes <= 0:
        raise ValueError("episode count must be positive")
    if isinstance(rng, int):
        rng = np.random.default_rng(rng)
    out: List[Episode] = []
    steps = 0
    for _ in range(episodes):
        s = env.reset()
        states, acts, rews, olds = [], [], [], []
        done = False
        while not done:
            actions = [pi.sample(s, rng) for pi in policies]
            probs = [policies[i].probs(s)[actions[i]] for i in range(len(policies))]
            s_next, rewards, done = env.step(actions)
            states.append(s)
            acts.append(actions)
            rews.append(rewards)
            olds.append(probs)
            s = s_next
        steps += len(states)
        out.append(
            Episode(
                states=states,
                actions=np.array(acts, dtype=int),
                rewards=np.array(rews),
                old_probs=np.array(olds),
            )
        )
    return RolloutBatch(episodes=out, env_steps=steps)


def advantages(
    batch: RolloutBatch,
    values: MultiHeadValueTable,
    gamma: float,
    lam_gae: float,
    value_lr: float = 0.0,
) -> List[np.ndarray]:
    """GAE(gamma, lambda) per head, computed against the current baselines.

    Episodes bootstrap zero past their last transition.  When value_lr > 0
    the table is then regressed toward the empirical discounted returns
    (advantage + baseline), averaged per state.
    """
    advs: List[np.ndarray] = []
    targets: Dict[object, List[np.ndarray]] = {}
    for ep in batch.episodes:
        T = len(ep)
        V = np.array([values.row(s) for s in ep.states])  # (T, N)
        nxt = np.vstack([V[1:], np.zeros((1, values.n_heads))])
        deltas = ep.rewards + gamma * nxt - V
        adv = np.zeros_like(deltas)
        acc = np.zeros(values.n_heads)
        for t in range(T - 1, -1, -1):
            acc = deltas[t] + gamma * lam_gae * acc
            adv[t] = acc
        advs.append(adv)
        if value_lr > 0:
            ret = adv + V
            for t, s in enumerate(ep.states):
                targets.setdefault(s, []).append(ret[t])
    if value_lr > 0:
        for s, rows in targets.items():
            target = np.mean(rows, axis=0)
            values.values[s] = values.row(s) + value_lr * (target - values.row(s))
    return advs


def surrogate_gradient(
    i: int,
    j: int,
    batch: RolloutBatch,
    policies: Sequence[PolicyTable],
    clip_eps: float,
    advs: List[np.ndarray],
) -> Dict[object, np.ndarray]:
    """Gradient over agent i's logits of the head-j clipped surrogate.

    Maximization convention: the returned direction increases return j.
    Ratios compare the current policy against the collection-time snapshot;
    transitions riding the clipped branch contribute zero.
    """
    pi = policies[i]
    grad: Dict[object, np.ndarray] = {}
    total = 0
    for ep, adv in zip(batch.episodes, advs):
        total += len(ep)
        for t, s in enumerate(ep.states):
            a = int(ep.actions[t, i])
            old = float(ep.old_probs[t, i])
            p = pi.probs(s)
            ratio = p[a] / old
            A = float(adv[t, j])
            unclipped = ratio * A
            clipped = float(np.clip(ratio, 1.0 - clip_eps, 1.0 + clip_eps)) * A
            if unclipped > clipped:
                continue  # min() selects the clipped, constant branch
            g = grad.get(s)
            if g is None:
                g = np.zeros(pi.n_actions)
                grad[s] = g
            # d ratio / d logits = (p[a]/old) * (e_a - p)
            coeff = A * ratio
            g -= coeff * p
            g[a] += coeff
    for g in grad.values():
        g /= total
    return grad


def entropy_gradient(policy: PolicyTable, state_counts: Dict[object, int]) -> Dict[object, np.ndarray]:
    """Gradient of the visitation-weighted mean policy entropy."""
    total = sum(state_counts.values())
    out: Dict[object, np.ndarray] = {}
    for s, cnt in state_counts.items():
        p = policy.probs(s)
        logp = np.log(np.maximum(p, 1e-300))
        h = -float(p @ logp)
        out[s] = (cnt / total) * (-p * (logp + h))
    return out


def flatten_gradient(grad: Dict[object, np.ndarray], state_order: List[object], n_actions: int) -> np.ndarray:
    vec = np.zeros(len(state_order) * n_actions)
    for k, s in enumerate(state_order):
        g = grad.get(s)
        if g is not None:
            vec[k * n_actions : (k + 1) * n_actions] = g
    return vec


@dataclass
class TrainConfig:
    total_steps: int = 100_000
    batch_episodes: int = 4
    lr: float = 0.5
    lr_decay: bool = True  # anneal lr linearly to 0 over total_steps
    value_lr: float = 0.3
    clip_eps: float = 0.2
    gamma: float = 0.99
    lam_gae: float = 0.95
    entropy_coef: float = 0.01
    filter_eps: float = 0.05  # gradient-norm threshold of the filtered trainer
    solver_tol: float = 1e-8
    eval_interval: int = 5_000
    eval_episodes: int = 16
    seed: int = 0

    def __post_init__(self) -> None:
        if self.total_steps <= 0 or self.batch_episodes <= 0:
            raise ValueError("total_steps and batch_episodes must be positive")
        if self.filter_eps <= 0:
            raise ValueError("filter_eps must be positive")


@dataclass
class EvalRecord:
    step: int
    mean_return: np.ndarray  # (N,)
    std_return: np.ndarray  # (N,)


@dataclass
class TrainingTrace:
    records: List[EvalRecord] = field(default_factory=list)

    @property
    def final_returns(self) -> np.ndarray:
        return self.records[-1].mean_return

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(["step", "agent", "mean_return", "std_return"])
            for rec in self.records:
                for i, (m, s) in enumerate(zip(rec.mean_return, rec.std_return)):
                    writer.writerow([rec.step, i + 1, f"{m:.17g}", f"{s:.17g}"])

    def summary(self) -> dict:
        final = self.records[-1]
        return {
            "final_step": final.step,
            "agents": [
                {"agent": i + 1, "mean_return": float(m), "std_return": float(s)}
                for i, (m, s) in enumerate(zip(final.mean_return, final.std_return))
            ],
        }

    def write_summary(self, path) -> None:
        with open(path, "w") as fh:
            json.dump(self.summary(), fh, indent=2, sort_keys=True)
            fh.write("\n")


@dataclass
class TrainResult:
    trace: TrainingTrace
    policies: List[PolicyTable]
    values: MultiHeadValueTable


def evaluate(env, policies: Sequence[PolicyTable], episodes: int) -> Tuple[np.ndarray, np.ndarray]:
    """Greedy-policy episode returns: (mean, std) per agent."""
    totals = []
    for _ in range(episodes):
        s = env.reset()
        done = False
        total = np.zeros(len(policies))
        while not done:
            actions = [pi.greedy(s) for pi in policies]
            s, rewards, done = env.step(actions)
            total += rewards
        totals.append(total)
    totals = np.array(totals)
    return totals.mean(axis=0), totals.std(axis=0)


def _update_direction(
    algo: str,
    agent: int,
    head_vecs: List[np.ndarray],
    config: TrainConfig,
) -> np.ndarray:
    if algo == "independent":
        return head_vecs[agent]
    if algo == "mgpo":
        sol = min_norm_element(np.stack(head_vecs), tol=config.solver_tol)
        return sol.direction
    active = [v for v in head_vecs if np.linalg.norm(v) > config.filter_eps]
    if not active:
        return np.zeros_like(head_vecs[0])
    sol = min_norm_element(np.stack(active), tol=config.solver_tol)
    return sol.direction


def train(
    env,
    algo: str,
    config: TrainConfig,
    policies: Optional[List[PolicyTable]] = None,
    values: Optional[MultiHeadValueTable] = None,
) -> TrainResult:
    """Run one tabular training job and record greedy evaluations.

    Pre-initialized policy and value tables may be passed in; they are
    updated in place, which allows warm-starting a run from the tables of
    an earlier one.  Evaluation happens every ``eval_interval`` collected
    env steps and once more at the end.
    """
    if algo not in ALGOS:
        raise ValueError(f"unknown algorithm {algo!r}; choose from {ALGOS}")
    n = env.n_agents
    rng = np.random.default_rng(config.seed)
    if policies is None:
        policies = [PolicyTable(env.n_actions) for _ in range(n)]
    if values is None:
        values = MultiHeadValueTable(n)
    trace = TrainingTrace()
    steps = 0
    next_eval = 0
    while steps < config.total_steps:
        if steps >= next_eval:
            mean, std = evaluate(env, policies, config.eval_episodes)
            trace.records.append(EvalRecord(steps, mean, std))
            next_eval += config.eval_interval
        batch = collect(env, policies, config.batch_episodes, rng)
        steps += batch.env_steps
        advs = advantages(batch, values, config.gamma, config.lam_gae, config.value_lr)
        state_counts: Dict[object, int] = {}
        for ep in batch.episodes:
            for s in ep.states:
                state_counts[s] = state_counts.get(s, 0) + 1
        state_order = sorted(state_counts)
        deltas = []
        for i in range(n):
            head_vecs = [
                flatten_gradient(
                    surrogate_gradient(i, j, batch, policies, config.clip_eps, advs),
                    state_order,
                    env.n_actions,
                )
                for j in range(n)
            ]
            direction = _update_direction(algo, i, head_vecs, config)
            if config.entropy_coef > 0:
                direction = direction + config.entropy_coef * flatten_gradient(
                    entropy_gradient(policies[i], state_counts), state_order, env.n_actions
                )
            lr = config.lr
            if config.lr_decay:
                lr *= max(1.0 - steps / config.total_steps, 0.0)
            delta = {
                s: lr * direction[k * env.n_actions : (k + 1) * env.n_actions]
                for k, s in enumerate(state_order)
            }
            deltas.append(delta)
        # All ratios in this batch were taken against the collection-time
        # snapshot; apply the per-agent updates only after every agent's
        # gradients are computed.
        for pi, delta in zip(policies, deltas):
            pi.apply_update(delta)
    mean, std = evaluate(env, policies, config.eval_episodes)
    trace.records.append(EvalRecord(steps, mean, std))
    return TrainResult(trace=trace, policies=policies, values=values)


def matrix_game_exact_gradients(p1, p2, env: Optional[MatrixGameEnv] = None) -> np.ndarray:
    """Exact return gradients for the one-shot 2x2 game.

    Returns an array g[i, j] of gradient vectors (over agent i's two logits)
    of agent j's expected reward; no sampling involved.
    """
    env = env or MatrixGameEnv()
    p = [np.asarray(p1, dtype=float), np.asarray(p2, dtype=float)]
    out = np.zeros((2, 2, 2))
    for i in range(2):
        other = p[1 - i]
        for j in range(2):
            R = env.payoffs[j]
            # Expected head-j reward given agent i's action.
            q = R @ other if i == 0 else R.T @ other
            # Softmax chain rule written as a pairwise difference so a
            # constant q yields an exactly zero gradient.
            for a in range(2):
                out[i, j, a] = p[i][a] * sum(p[i][b] * (q[a] - q[b]) for b in range(2))
    return out


def zero_gradient_diagnostic(p1, p2) -> np.ndarray:
    """Norm of each agent's own-reward policy gradient in the matrix game.

    Both norms are exactly zero for any policy pair: neither agent's reward
    depends on its own action, so the advantage is constant in the action.
    """
    g = matrix_game_exact_gradients(p1, p2)
    return np.array([np.linalg.norm(g[0, 0]), np.linalg.norm(g[1, 1])])
