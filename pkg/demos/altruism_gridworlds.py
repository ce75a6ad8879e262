"""Cooperative gridworlds where selfish learners strand their partner.

The door scenario is the smallest example: agent 1's goal is behind a door
whose key cell lies in agent 2's room, and agent 2 gains nothing by standing
on it.  An independent learner never opens the door; the filtered min-norm
trainer lets agent 2's update direction follow agent 1's reward head once
its own head has converged to (near) zero gradient.

Runs a reduced-budget training pass per scenario so the demo finishes in a
few minutes; the acceptance tests run the full budget.
"""

import numpy as np

from mgdakit.gridworld import GridworldEnv, make_scenario
from mgdakit.marl import TrainConfig, train


def show(label, returns):
    agents = ", ".join(f"agent {i + 1}: {r:+.1f}" for i, r in enumerate(returns))
    print(f"  {label:<12} {agents}")


def door_demo(total_steps=60_000):
    print("=== door: one agent must hold a key it gains nothing from ===")
    env = GridworldEnv(make_scenario("door"))
    for algo in ("independent", "mgpo_pp"):
        res = train(env, algo, TrainConfig(total_steps=total_steps, seed=0))
        show(algo, res.trace.final_returns)
    print()


def dead_end_demo(total_steps=60_000):
    print("=== dead end: three agents whose goals are unreachable ===")
    print("  (they should learn to sit still, not thrash against walls)")
    env = GridworldEnv(make_scenario("dead_end"))
    config = TrainConfig(
        total_steps=total_steps,
        seed=0,
        filter_eps=0.1,
        batch_episodes=1,
        value_lr=0.05,
        lam_gae=0.5,
    )
    res = train(env, "mgpo_pp", config)
    show("mgpo_pp", res.trace.final_returns)
    print()


def matrix_game_demo():
    print("=== one-shot game where every own-reward gradient is zero ===")
    from mgdakit.gridworld import matrix_game
    from mgdakit.marl import zero_gradient_diagnostic

    rng = np.random.default_rng(0)
    g = zero_gradient_diagnostic(rng.dirichlet([1, 1]), rng.dirichlet([1, 1]))
    print(f"  own-reward gradient norms at a random policy pair: {tuple(map(float, g))}")
    for algo in ("independent", "mgpo_pp"):
        res = train(matrix_game(), algo, TrainConfig(total_steps=20_000, seed=0))
        show(algo, res.trace.final_returns)
    print("  (the payoff-optimal joint action is worth (1, 2))")


if __name__ == "__main__":
    matrix_game_demo()
    print()
    door_demo()
    dead_end_demo()
