"""Deterministic multi-agent grid environments with per-agent reward vectors.

Maps are whitespace-separated token grids: ``#`` wall, ``.`` floor, digits
1-4 agent spawns, ``G1``..``G4`` per-agent goals, ``Dc`` a door of color c,
``Kc`` a key cell of color c.  A door is passable during a step iff some
agent occupied a matching key cell at the start of that step.  Moves are
simultaneous; rejected moves (walls, closed doors, agent conflicts) cost
-0.1 and leave the agent in place.  Reaching the own goal pays +10 once per
episode; a finished agent is parked on its goal cell, where it still blocks
other agents but takes no further actions, rewards, or penalties.
"""

from __future__ import annotations

from dataclasses import dataclass
from importlib import resources
from typing import Dict, FrozenSet, Tuple

import numpy as np

__all__ = [
    "ACTIONS",
    "GridLayout",
    "EnvState",
    "JointStep",
    "make_scenario",
    "load_layout",
    "reset",
    "step",
    "open_colors",
    "reachable_cells",
    "GridworldEnv",
    "MatrixGameEnv",
    "matrix_game",
    "SCENARIOS",
]

# "stay" first so that an untrained argmax policy idles instead of walking
# into a wall.
ACTIONS = ("stay", "up", "down", "left", "right")
_DELTAS = {"up": (-1, 0), "down": (1, 0), "left": (0, -1), "right": (0, 1), "stay": (0, 0)}

GOAL_REWARD = 10.0
COLLISION_PENALTY = -0.1

SCENARIOS = ("door", "dead_end", "two_corridors", "two_rooms")

Cell = Tuple[int, int]


@dataclass(frozen=True)
class GridLayout:
    width: int
    height: int
    walls: FrozenSet[Cell]
    doors: Dict[Cell, str]
    keys: Dict[Cell, str]
    goals: Dict[int, Cell]
    spawns: Dict[int, Cell]
    n_agents: int
    horizon: int = 64
    discount: float = 0.99

    def __post_init__(self) -> None:
        cells = (
            set(self.walls)
            | set(self.doors)
            | set(self.keys)
            | set(self.goals.values())
            | set(self.spawns.values())
        )
        for (r, c) in cells:
            if not (0 <= r < self.height and 0 <= c < self.width):
                raise ValueError(f"cell {(r, c)} out of bounds")
        if len(set(self.spawns.values())) != self.n_agents:
            raise ValueError("spawns must be distinct, one per agent")
        if sorted(self.spawns) != list(range(self.n_agents)):
            raise ValueError("spawns must cover agents 0..N-1")
        if sorted(self.goals) != list(range(self.n_agents)):
            raise ValueError("exactly one goal per agent required")
        key_colors = set(self.keys.values())
        for cell, color in self.doors.items():
            if color not in key_colors:
                raise ValueError(f"door {cell} color {color!r} has no key cell")

    def is_free(self, cell: Cell, open_cols: FrozenSet[str]) -> bool:
        r, c = cell
        if not (0 <= r < self.height and 0 <= c < self.width):
            return False
        if cell in self.walls:
            return False
        if cell in self.doors and self.doors[cell] not in open_cols:
            return False
        return True


@dataclass(frozen=True)
class EnvState:
    positions: Tuple[Cell, ...]
    reached: Tuple[bool, ...]
    t: int


@dataclass(frozen=True)
class JointStep:
    actions: Tuple[str, ...]
    rewards: np.ndarray
    done: bool


def load_layout(text: str, horizon: int = 64) -> GridLayout:
    """Parse a token-grid map and validate its invariants."""
    rows = [line.split() for line in text.strip().splitlines()]
    if not rows:
        raise ValueError("empty map")
    width = len(rows[0])
    if any(len(r) != width for r in rows):
        raise ValueError("ragged map rows")
    walls, doors, keys, goals, spawns = set(), {}, {}, {}, {}
    for r, row in enumerate(rows):
        for c, tok in enumerate(row):
            cell = (r, c)
            if tok == "#":
                walls.add(cell)
            elif tok == ".":
                pass
            elif tok.isdigit():
                spawns[int(tok) - 1] = cell
            elif tok.startswith("G") and tok[1:].isdigit():
                goals[int(tok[1:]) - 1] = cell
            elif len(tok) == 2 and tok[0] == "D":
                doors[cell] = tok[1]
            elif len(tok) == 2 and tok[0] == "K":
                keys[cell] = tok[1]
            else:
                raise ValueError(f"unknown map token {tok!r} at {cell}")
    return GridLayout(
        width=width,
        height=len(rows),
        walls=frozenset(walls),
        doors=doors,
        keys=keys,
        goals=goals,
        spawns=spawns,
        n_agents=len(spawns),
        horizon=horizon,
    )


def make_scenario(name: str, horizon: int = 64) -> GridLayout:
    """Load one of the four fixed scenario layouts."""
    if name not in SCENARIOS:
        raise ValueError(f"unknown scenario {name!r}; choose from {SCENARIOS}")
    text = resources.files("mgdakit.maps").joinpath(f"{name}.map").read_text()
    return load_layout(text, horizon=horizon)


def open_colors(layout: GridLayout, positions: Tuple[Cell, ...]) -> FrozenSet[str]:
    """Door colors held open by the given agent positions."""
    return frozenset(layout.keys[p] for p in positions if p in layout.keys)


def reset(layout: GridLayout, seed: int | None = None) -> EnvState:
    """Agents at spawns, flags cleared.  Deterministic; seed is reserved."""
    positions = tuple(layout.spawns[i] for i in range(layout.n_agents))
    return EnvState(positions=positions, reached=(False,) * layout.n_agents, t=0)


def step(state: EnvState, layout: GridLayout, joint_action) -> Tuple[EnvState, JointStep]:
    """Advance one step with simultaneous, order-free move resolution.

    Any move into a wall, closed door, or out of bounds is rejected.  Among
    the remaining movers: a target occupied by a non-moving agent, a target
    claimed by two or more movers, and a pairwise position swap all reject
    every involved move.  Each rejection costs -0.1.
    """
    n = layout.n_agents
    actions = tuple(joint_action)
    if len(actions) != n:
        raise ValueError("joint action length mismatch")
    for a in actions:
        if a not in ACTIONS:
            raise ValueError(f"unknown action {a!r}")
    open_cols = open_colors(layout, state.positions)
    rewards = np.zeros(n)
    pos = list(state.positions)
    moving = [False] * n
    targets = list(pos)
    for i, act in enumerate(actions):
        if state.reached[i] or act == "stay":
            # Agents that reached their goal are parked there: they keep
            # blocking their cell but take no actions and no penalties.
            continue
        dr, dc = _DELTAS[act]
        cand = (pos[i][0] + dr, pos[i][1] + dc)
        if not layout.is_free(cand, open_cols):
            rewards[i] += COLLISION_PENALTY
        else:
            targets[i] = cand
            moving[i] = True

    def reject(i: int) -> None:
        moving[i] = False
        targets[i] = pos[i]
        rewards[i] += COLLISION_PENALTY

    changed = True
    while changed:
        changed = False
        stationary = {pos[i] for i in range(n) if not moving[i]}
        claims: Dict[Cell, list] = {}
        for i in range(n):
            if moving[i]:
                claims.setdefault(targets[i], []).append(i)
        for i in range(n):
            if not moving[i]:
                continue
            if targets[i] in stationary:
                reject(i)
                changed = True
            elif len(claims[targets[i]]) > 1:
                for j in claims[targets[i]]:
                    if moving[j]:
                        reject(j)
                changed = True
            else:
                for j in range(n):
                    if j != i and moving[j] and targets[j] == pos[i] and targets[i] == pos[j]:
                        reject(i)
                        reject(j)
                        changed = True
                        break
            if changed:
                break

    new_pos = tuple(targets)
    reached = list(state.reached)
    for i in range(n):
        if not reached[i] and new_pos[i] == layout.goals[i]:
            reached[i] = True
            rewards[i] += GOAL_REWARD
    t = state.t + 1
    done = all(reached) or t >= layout.horizon
    new_state = EnvState(positions=new_pos, reached=tuple(reached), t=t)
    return new_state, JointStep(actions=actions, rewards=rewards, done=done)


def reachable_cells(layout: GridLayout, start: Cell, open_cols=frozenset()) -> FrozenSet[Cell]:
    """BFS over free cells treating doors outside open_cols as walls."""
    open_cols = frozenset(open_cols)
    seen = {start}
    frontier = [start]
    while frontier:
        r, c = frontier.pop()
        for dr, dc in ((-1, 0), (1, 0), (0, -1), (0, 1)):
            nxt = (r + dr, c + dc)
            if nxt not in seen and layout.is_free(nxt, open_cols):
                seen.add(nxt)
                frontier.append(nxt)
    return frozenset(seen)


class GridworldEnv:
    """Stateful wrapper exposing the tabular-training protocol.

    State keys are (positions, goal flags, open-door colors) tuples; the
    door flags are derivable from positions but kept in the key so the
    tabular state matches what the agents condition on.
    """

    def __init__(self, layout: GridLayout):
        self.layout = layout
        self.n_agents = layout.n_agents
        self.n_actions = len(ACTIONS)
        self._state: EnvState | None = None

    def _key(self, state: EnvState):
        return (
            state.positions,
            state.reached,
            tuple(sorted(open_colors(self.layout, state.positions))),
        )

    def reset(self):
        self._state = reset(self.layout)
        return self._key(self._state)

    def step(self, action_indices):
        actions = tuple(ACTIONS[a] for a in action_indices)
        self._state, outcome = step(self._state, self.layout, actions)
        return self._key(self._state), outcome.rewards, outcome.done


class MatrixGameEnv:
    """One-shot 2x2 game where each agent's reward depends only on the other.

    Action 0 is "A", action 1 is "B".  Payoffs: (A,A) -> (1,2),
    (A,B) -> (0,2), (B,A) -> (1,0), (B,B) -> (0,0); agent 1 is paid when
    agent 2 plays A, agent 2 is paid double when agent 1 plays A.
    """

    n_agents = 2
    n_actions = 2
    # payoffs[i][a1, a2] = reward of agent i
    payoffs = (
        np.array([[1.0, 0.0], [1.0, 0.0]]),
        np.array([[2.0, 2.0], [0.0, 0.0]]),
    )

    def reset(self):
        return ("s0",)

    def step(self, action_indices):
        a1, a2 = action_indices
        rewards = np.array([self.payoffs[0][a1, a2], self.payoffs[1][a1, a2]])
        return ("terminal",), rewards, True


def matrix_game() -> MatrixGameEnv:
    return MatrixGameEnv()
