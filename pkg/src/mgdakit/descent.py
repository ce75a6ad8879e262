"""Multi-gradient descent loops: plain MGDA and the epsilon-filtered variant.

The filtered variant drops every gradient whose norm is at or below a
threshold epsilon before solving the min-norm subproblem, so objectives that
have already converged cannot pin the common direction to zero.  The
adaptive step rule guarantees the sum of objectives is non-increasing on
convex L-smooth problems.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Tuple

import numpy as np

from .min_norm import MinNormSolution, min_norm_element

__all__ = [
    "MGDA",
    "MGDA_PP",
    "ALL_GRADIENTS_SMALL",
    "STATIONARY_DIRECTION",
    "MAX_ITERS",
    "DescentConfig",
    "IterateRecord",
    "DescentTrace",
    "filter_active",
    "theorem1_step",
    "epsilon_for",
    "mgda_step",
    "mgda_pp_step",
    "run",
]

MGDA = "mgda"
MGDA_PP = "mgda_pp"

ALL_GRADIENTS_SMALL = "AllGradientsSmall"
STATIONARY_DIRECTION = "StationaryDirection"
MAX_ITERS = "MaxIters"


@dataclass
class DescentConfig:
    algorithm: str = MGDA_PP
    step_rule: str = "theorem1"  # or "constant"
    step_size: Optional[float] = None  # constant rule; defaults to 1/L
    epsilon: float = 0.01  # gradient-norm filter (filtered variant only)
    max_iters: int = 10_000
    stall_tol: float = 1e-9
    solver_tol: float = 1e-10
    normalize_gradients: bool = False  # unfiltered baseline only

    def __post_init__(self) -> None:
        if self.algorithm not in (MGDA, MGDA_PP):
            raise ValueError(f"unknown algorithm {self.algorithm!r}")
        if self.step_rule not in ("constant", "theorem1"):
            raise ValueError(f"unknown step rule {self.step_rule!r}")
        if self.epsilon <= 0:
            raise ValueError("epsilon must be positive")
        if self.normalize_gradients and self.algorithm != MGDA:
            raise ValueError("gradient normalization applies to the unfiltered baseline only")


@dataclass(frozen=True)
class IterateRecord:
    x: np.ndarray
    objectives: np.ndarray
    active: Tuple[int, ...]
    step: float
    direction_norm: float


@dataclass
class DescentTrace:
    iterates: List[IterateRecord] = field(default_factory=list)
    termination: str = MAX_ITERS

    @property
    def final_x(self) -> np.ndarray:
        return self.iterates[-1].x

    def to_csv(self, path) -> None:
        """One row per iterate: iter, x, F, active-set bitmask, t, d_norm."""
        m = len(self.iterates[0].x)
        n = len(self.iterates[0].objectives)
        header = (
            ["iter"]
            + [f"x{j}" for j in range(m)]
            + [f"f{i}" for i in range(n)]
            + ["active_mask", "t", "d_norm"]
        )
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(header)
            for k, rec in enumerate(self.iterates):
                mask = sum(1 << i for i in rec.active)
                row = (
                    [k]
                    + [f"{v:.17g}" for v in rec.x]
                    + [f"{v:.17g}" for v in rec.objectives]
                    + [mask, f"{rec.step:.17g}", f"{rec.direction_norm:.17g}"]
                )
                writer.writerow(row)


def filter_active(grads, eps: float) -> Tuple[int, ...]:
    """Indices whose gradient norm is strictly greater than eps."""
    G = np.atleast_2d(np.asarray(grads, dtype=float))
    norms = np.linalg.norm(G, axis=1)
    return tuple(int(i) for i in np.nonzero(norms > eps)[0])


def theorem1_step(d, dropped_grads, active_count: int, n: int, L: float) -> float:
    """Adaptive step size making the sum of objectives non-increasing.

    t = max((|S| ||d||^2 + <sum of dropped gradients, d>) / (n L ||d||^2), 0),
    and 0 when d = 0.  With no dropped gradients this reduces to 1/L.
    """
    if L <= 0:
        raise ValueError("L must be positive")
    d = np.asarray(d, dtype=float)
    dsq = float(d @ d)
    if dsq == 0.0:
        return 0.0
    dropped = np.atleast_2d(np.asarray(dropped_grads, dtype=float)) if len(dropped_grads) else None
    inner = float(dropped.sum(axis=0) @ d) if dropped is not None else 0.0
    denom = n * L * dsq
    if denom == 0.0:  # ||d||^2 can underflow to a denormal for tiny d
        return 0.0
    return max((active_count * dsq + inner) / denom, 0.0)


def epsilon_for(varepsilon: float, L: float) -> float:
    """Largest gradient-norm threshold certifying varepsilon-optimality.

    Any point where all gradient norms fall below sqrt(2 L varepsilon) has
    every objective within varepsilon of its minimum (convex L-smooth case).
    """
    if varepsilon <= 0 or L <= 0:
        raise ValueError("varepsilon and L must be positive")
    return float(np.sqrt(2.0 * L * varepsilon))


def _normalized(G: np.ndarray) -> np.ndarray:
    norms = np.linalg.norm(G, axis=1, keepdims=True)
    safe = np.where(norms > 0, norms, 1.0)
    return G / safe


def _solve_direction(
    x: np.ndarray, prob, config: DescentConfig
) -> Tuple[np.ndarray, Tuple[int, ...], Optional[MinNormSolution]]:
    """Gradients at x, the active index set, and the min-norm solution."""
    G = np.asarray(prob.grad(x), dtype=float)
    if not np.all(np.isfinite(G)):
        raise ValueError("non-finite gradient encountered")
    if config.algorithm == MGDA_PP:
        active = filter_active(G, config.epsilon)
        if not active:
            return G, active, None
        sol = min_norm_element(G[list(active)], tol=config.solver_tol)
    else:
        active = tuple(range(G.shape[0]))
        Gin = _normalized(G) if config.normalize_gradients else G
        sol = min_norm_element(Gin, tol=config.solver_tol)
    return G, active, sol


def _step_size(G, active, sol, prob, config: DescentConfig) -> float:
    if config.step_rule == "constant":
        return config.step_size if config.step_size is not None else 1.0 / prob.smoothness
    dropped = [G[i] for i in range(G.shape[0]) if i not in active]
    return theorem1_step(sol.direction, dropped, len(active), prob.n, prob.smoothness)


def mgda_step(x, prob, config: Optional[DescentConfig] = None):
    """One unfiltered step: x' = x - t d over all gradients.

    Returns (x', stationary) where stationary flags ||d|| <= stall_tol; the
    point is returned unchanged in that case.
    """
    config = config or DescentConfig(algorithm=MGDA, step_rule="constant")
    if config.algorithm != MGDA:
        raise ValueError("mgda_step requires the unfiltered configuration")
    x = np.asarray(x, dtype=float)
    G, active, sol = _solve_direction(x, prob, config)
    if sol.norm <= config.stall_tol:
        return x, True
    t = _step_size(G, active, sol, prob, config)
    return x - t * sol.direction, False


def mgda_pp_step(x, prob, config: Optional[DescentConfig] = None):
    """One filtered step.

    Returns (x', reason) where reason is None while descending,
    ALL_GRADIENTS_SMALL when every gradient norm is <= epsilon, and
    STATIONARY_DIRECTION when the active min-norm direction vanishes.
    """
    config = config or DescentConfig(algorithm=MGDA_PP)
    if config.algorithm != MGDA_PP:
        raise ValueError("mgda_pp_step requires the filtered configuration")
    x = np.asarray(x, dtype=float)
    G, active, sol = _solve_direction(x, prob, config)
    if sol is None:
        return x, ALL_GRADIENTS_SMALL
    if sol.norm <= config.stall_tol:
        return x, STATIONARY_DIRECTION
    t = _step_size(G, active, sol, prob, config)
    return x - t * sol.direction, None


def run(prob, x0, config: DescentConfig) -> DescentTrace:
    """Iterate until termination, recording every visited point.

    Termination is one of: all gradients filtered out (filtered variant
    only), a vanishing common direction, or the iteration budget.
    """
    x = np.asarray(x0, dtype=float)
    trace = DescentTrace()
    for _ in range(config.max_iters):
        G, active, sol = _solve_direction(x, prob, config)
        F = prob.eval(x)
        if sol is None:
            trace.iterates.append(IterateRecord(x, F, active, 0.0, 0.0))
            trace.termination = ALL_GRADIENTS_SMALL
            return trace
        if sol.norm <= config.stall_tol:
            trace.iterates.append(IterateRecord(x, F, active, 0.0, sol.norm))
            trace.termination = STATIONARY_DIRECTION
            return trace
        t = _step_size(G, active, sol, prob, config)
        trace.iterates.append(IterateRecord(x, F, active, t, sol.norm))
        x = x - t * sol.direction
    G, active, sol = _solve_direction(x, prob, config)
    trace.iterates.append(
        IterateRecord(x, prob.eval(x), active, 0.0, sol.norm if sol is not None else 0.0)
    )
    trace.termination = MAX_ITERS
    return trace
