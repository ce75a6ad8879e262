"""Tabular trainer tests: rollouts, advantages, surrogate gradients, updates."""

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from mgdakit.gridworld import GridworldEnv, MatrixGameEnv, load_layout, matrix_game
from mgdakit.marl import (
    ALGOS,
    MultiHeadValueTable,
    PolicyTable,
    RolloutBatch,
    TrainConfig,
    advantages,
    collect,
    entropy_gradient,
    flatten_gradient,
    matrix_game_exact_gradients,
    surrogate_gradient,
    train,
    zero_gradient_diagnostic,
)
from mgdakit.min_norm import min_norm_element


TINY_MAP = """
# # # # #
# 1 . G1 #
# 2 . G2 #
# # # # #
"""


def uniform_policies(env, n=None):
    n = n if n is not None else env.n_agents
    return [PolicyTable(env.n_actions) for _ in range(n)]


def greedy_at(env, logits):
    pols = uniform_policies(env)
    for p in pols:
        p.logits[("s0",)] = np.array(logits, dtype=float)
    return pols


class TestPolicyTable:
    def test_rows_default_uniform(self):
        p = PolicyTable(5)
        np.testing.assert_allclose(p.probs("s"), np.full(5, 0.2))

    def test_softmax_normalized_after_updates(self):
        p = PolicyTable(3)
        rng = np.random.default_rng(0)
        for _ in range(50):
            p.apply_update({"s": rng.normal(size=3)})
            assert p.probs("s").sum() == pytest.approx(1.0, abs=1e-9)

    def test_sample_respects_distribution(self):
        p = PolicyTable(2)
        p.logits["s"] = np.array([3.0, 0.0])
        rng = np.random.default_rng(1)
        draws = [p.sample("s", rng) for _ in range(2000)]
        assert np.mean(draws) == pytest.approx(p.probs("s")[1], abs=0.03)

    def test_sharpened_copy_is_near_deterministic(self):
        p = PolicyTable(3)
        p.logits["s"] = np.array([0.1, 0.9, 0.2])
        q = p.sharpened()
        assert q.greedy("s") == p.greedy("s")
        assert q.probs("s")[1] > 0.999
        # the source table is untouched
        assert p.probs("s")[1] < 0.6


class TestCollect:
    def test_deterministic_given_seed(self):
        env = matrix_game()
        pols = uniform_policies(env)
        b1 = collect(env, pols, 8, np.random.default_rng(42))
        b2 = collect(env, pols, 8, np.random.default_rng(42))
        for e1, e2 in zip(b1.episodes, b2.episodes):
            np.testing.assert_array_equal(e1.actions, e2.actions)
            np.testing.assert_array_equal(e1.rewards, e2.rewards)

    def test_greedy_pair_always_scores(self):
        env = matrix_game()
        pols = greedy_at(env, [10.0, 0.0])
        batch = collect(env, pols, 16, np.random.default_rng(0))
        for ep in batch.episodes:
            np.testing.assert_allclose(ep.rewards, [[1.0, 2.0]])

    def test_rejects_empty_batch(self):
        with pytest.raises(ValueError):
            collect(matrix_game(), uniform_policies(matrix_game()), 0, 0)

    def test_counts_env_steps(self):
        env = GridworldEnv(load_layout(TINY_MAP, horizon=8))
        batch = collect(env, uniform_policies(env), 3, np.random.default_rng(0))
        assert batch.env_steps == sum(len(ep) for ep in batch.episodes)
        assert all(len(ep) <= 8 for ep in batch.episodes)


class TestAdvantages:
    def test_single_terminal_transition(self):
        env = matrix_game()
        values = MultiHeadValueTable(2)
        batch = collect(env, greedy_at(env, [10.0, 0.0]), 1, np.random.default_rng(0))
        adv = advantages(batch, values, gamma=0.99, lam_gae=0.95)
        np.testing.assert_allclose(adv[0][0], [1.0, 2.0])

    def test_converged_baseline_zeroes_advantages(self):
        env = matrix_game()
        values = MultiHeadValueTable(2)
        pols = greedy_at(env, [10.0, 0.0])
        batch = collect(env, pols, 4, np.random.default_rng(0))
        for _ in range(300):
            advantages(batch, values, gamma=0.99, lam_gae=0.95, value_lr=0.3)
        adv = advantages(batch, values, gamma=0.99, lam_gae=0.95)
        assert np.max(np.abs(np.vstack(adv))) < 1e-6

    def test_lambda_one_is_monte_carlo(self):
        env = GridworldEnv(load_layout(TINY_MAP, horizon=6))
        values = MultiHeadValueTable(2)
        rng = np.random.default_rng(3)
        for s in [("a",), ("b",), ("c",)]:
            values.values[s] = rng.normal(size=2)
        batch = collect(env, uniform_policies(env), 4, np.random.default_rng(1))
        gamma = 0.99
        adv = advantages(batch, values, gamma=gamma, lam_gae=1.0)
        for ep, a in zip(batch.episodes, adv):
            T = len(ep)
            for t in range(T):
                ret = sum(gamma ** (k - t) * ep.rewards[k] for k in range(t, T))
                np.testing.assert_allclose(a[t], ret - values.row(ep.states[t]), atol=1e-9)


class TestSurrogateGradient:
    def _matrix_batch(self, episodes=256, seed=0):
        env = matrix_game()
        pols = uniform_policies(env)
        batch = collect(env, pols, episodes, np.random.default_rng(seed))
        values = MultiHeadValueTable(2)
        advs = advantages(batch, values, gamma=0.99, lam_gae=0.95)
        return env, pols, batch, advs

    def test_own_head_gradient_vanishes_in_expectation(self):
        # Agent 1's reward ignores its own action; the sampled gradient only
        # carries baseline noise.
        _, pols, batch, advs = self._matrix_batch(episodes=4096)
        g = surrogate_gradient(0, 0, batch, pols, 0.2, advs)
        assert np.linalg.norm(g[("s0",)]) < 0.05

    def test_cross_head_gradient_favours_the_paying_action(self):
        _, pols, batch, advs = self._matrix_batch(episodes=4096)
        g = surrogate_gradient(1, 0, batch, pols, 0.2, advs)
        row = g[("s0",)]
        assert row[0] > row[1]  # action A raises agent 1's reward

    def test_matches_exact_gradient_at_large_batch(self):
        # sampled vanilla gradient vs the closed-form expectation; assembled
        # over a fixed seed schedule at 10^4 episodes
        env = matrix_game()
        pols = greedy_at(env, [0.4, -0.4])
        exact = matrix_game_exact_gradients(pols[0].probs(("s0",)), pols[1].probs(("s0",)))
        rows = []
        for seed in range(4):
            batch = collect(env, pols, 2500, np.random.default_rng(seed))
            advs = advantages(batch, MultiHeadValueTable(2), gamma=0.99, lam_gae=0.95)
            g = surrogate_gradient(1, 0, batch, pols, np.inf, advs)
            rows.append(g[("s0",)])
        sampled = np.mean(rows, axis=0)
        assert np.linalg.norm(sampled - exact[1, 0]) / np.linalg.norm(exact[1, 0]) < 0.1

    def test_clip_inactive_at_unchanged_policy(self):
        # at ratio 1 the clipped and unclipped branches coincide, so a huge
        # clip range changes nothing
        _, pols, batch, advs = self._matrix_batch()
        g_tight = surrogate_gradient(1, 0, batch, pols, 0.2, advs)
        g_loose = surrogate_gradient(1, 0, batch, pols, np.inf, advs)
        np.testing.assert_allclose(g_tight[("s0",)], g_loose[("s0",)])

    def test_clipping_silences_over_updated_states(self):
        env = matrix_game()
        pols = uniform_policies(env)
        batch = collect(env, pols, 64, np.random.default_rng(0))
        advs = advantages(batch, MultiHeadValueTable(2), gamma=0.99, lam_gae=0.95)
        # push the policy far from the collection snapshot
        pols[1].apply_update({("s0",): np.array([8.0, -8.0])})
        g = surrogate_gradient(1, 0, batch, pols, 0.2, advs)
        # transitions with positive advantage on the saturated action ride
        # the clipped constant branch and contribute nothing
        assert np.linalg.norm(g.get(("s0",), np.zeros(2))) < 0.2


class TestExactMatrixGradients:
    def test_own_gradients_exactly_zero(self):
        rng = np.random.default_rng(0)
        for _ in range(100):
            g = zero_gradient_diagnostic(rng.dirichlet([1, 1]), rng.dirichlet([1, 1]))
            assert g[0] == 0.0 and g[1] == 0.0

    def test_cross_gradients_positive_for_interior_policies(self):
        g = matrix_game_exact_gradients([0.5, 0.5], [0.3, 0.7])
        assert np.linalg.norm(g[0, 1]) > 0
        assert np.linalg.norm(g[1, 0]) > 0

    def test_vertex_policy_cross_gradient(self):
        # deterministic partner: agent 2's cross gradient follows agent 1's
        # payoff column difference scaled by the softmax factor p(1-p) = 0
        g = matrix_game_exact_gradients([1.0, 0.0], [0.5, 0.5])
        np.testing.assert_allclose(g[0, 1], 0.0)
        g = matrix_game_exact_gradients([0.75, 0.25], [0.5, 0.5])
        assert g[0, 1][0] > 0  # mass toward A raises agent 2's reward


class TestTrain:
    def test_rejects_unknown_algorithm(self):
        with pytest.raises(ValueError, match="unknown algorithm"):
            train(matrix_game(), "ppo", TrainConfig(total_steps=10))

    def test_rejects_bad_config(self):
        with pytest.raises(ValueError):
            TrainConfig(total_steps=0)
        with pytest.raises(ValueError):
            TrainConfig(filter_eps=0.0)

    def test_softmax_rows_stay_normalized(self):
        res = train(matrix_game(), "mgpo_pp", TrainConfig(total_steps=2_000))
        for p in res.policies:
            for s in p.logits:
                assert p.probs(s).sum() == pytest.approx(1.0, abs=1e-9)

    def test_independent_is_a_no_op_on_the_matrix_game(self):
        pols = greedy_at(matrix_game(), [0.0, 2.0])
        res = train(
            matrix_game(),
            "independent",
            TrainConfig(total_steps=20_000, entropy_coef=0.0, seed=0),
            policies=pols,
        )
        assert res.policies[0].greedy(("s0",)) == 1
        assert res.policies[1].greedy(("s0",)) == 1

    def test_filtered_trainer_solves_the_matrix_game(self):
        res = train(matrix_game(), "mgpo_pp", TrainConfig(total_steps=20_000, seed=0))
        np.testing.assert_allclose(res.trace.final_returns, [1.0, 2.0], atol=0.05)

    def test_update_directions_satisfy_min_norm_inequality(self):
        # one manual update step mirroring the trainer's combination rule
        env = matrix_game()
        pols = uniform_policies(env)
        batch = collect(env, pols, 64, np.random.default_rng(7))
        values = MultiHeadValueTable(2)
        advs = advantages(batch, values, gamma=0.99, lam_gae=0.95, value_lr=0.3)
        state_order = [("s0",)]
        for i in range(2):
            vecs = [
                flatten_gradient(
                    surrogate_gradient(i, j, batch, pols, 0.2, advs), state_order, 2
                )
                for j in range(2)
            ]
            active = [v for v in vecs if np.linalg.norm(v) > 0.05]
            if not active:
                continue
            sol = min_norm_element(np.stack(active), tol=1e-8)
            for v in active:
                assert v @ sol.direction >= sol.squared_norm - 1e-7

    def test_trace_csv_and_summary(self, tmp_path):
        res = train(matrix_game(), "mgpo_pp", TrainConfig(total_steps=2_000))
        csv_path = tmp_path / "trace.csv"
        res.trace.to_csv(csv_path)
        lines = csv_path.read_text().splitlines()
        assert lines[0] == "step,agent,mean_return,std_return"
        assert len(lines) == 1 + 2 * len(res.trace.records)
        res.trace.write_summary(tmp_path / "summary.json")
        import json

        data = json.loads((tmp_path / "summary.json").read_text())
        assert [a["agent"] for a in data["agents"]] == [1, 2]
        np.testing.assert_allclose(
            [a["mean_return"] for a in data["agents"]], res.trace.final_returns
        )

    def test_warm_start_tables_are_reused(self):
        env = matrix_game()
        pre = train(env, "mgpo_pp", TrainConfig(total_steps=2_000, seed=0))
        res = train(
            env,
            "mgpo_pp",
            TrainConfig(total_steps=2_000, seed=1),
            policies=pre.policies,
            values=pre.values,
        )
        assert res.policies is pre.policies


class TestEntropyGradient:
    def test_points_toward_uniformity(self):
        p = PolicyTable(2)
        p.logits["s"] = np.array([2.0, 0.0])
        g = entropy_gradient(p, {"s": 4})["s"]
        assert g[0] < 0 < g[1]

    def test_zero_at_uniform_policy(self):
        p = PolicyTable(3)
        g = entropy_gradient(p, {"s": 1})["s"]
        np.testing.assert_allclose(g, 0.0, atol=1e-12)

    @given(st.lists(st.floats(-5, 5, allow_nan=False), min_size=3, max_size=3))
    @settings(max_examples=200)
    def test_matches_finite_differences(self, logits):
        p = PolicyTable(3)
        p.logits["s"] = np.array(logits)
        g = entropy_gradient(p, {"s": 1})["s"]

        def entropy(z):
            e = np.exp(z - np.max(z))
            q = e / e.sum()
            return -float(q @ np.log(np.maximum(q, 1e-300)))

        h = 1e-6
        for k in range(3):
            e = np.zeros(3)
            e[k] = h
            fd = (entropy(np.array(logits) + e) - entropy(np.array(logits) - e)) / (2 * h)
            assert g[k] == pytest.approx(fd, abs=1e-5)


class TestFlattenGradient:
    def test_layout_and_missing_states(self):
        grad = {"b": np.array([1.0, 2.0])}
        vec = flatten_gradient(grad, ["a", "b"], 2)
        np.testing.assert_allclose(vec, [0.0, 0.0, 1.0, 2.0])
