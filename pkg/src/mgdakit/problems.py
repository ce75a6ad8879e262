"""Synthetic convex benchmark problems with analytic gradients.

Each problem is a vector-valued objective F: R^m -> R^n together with its
Jacobian and an L-smoothness constant.  The two landscapes here are the
clamped-norm problem (flat zero-gradient plateaus that stall plain
multi-gradient descent) and the quadratic pair whose Pareto set is the
segment between -1 and +1.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

__all__ = [
    "SyntheticProblem",
    "clamped_norm_landscape",
    "quadratic_pair",
    "with_dummy_objective",
    "finite_diff_check",
]


@dataclass(frozen=True)
class SyntheticProblem:
    """Vector objective with analytic gradients and smoothness constant."""

    n: int
    m: int
    smoothness: float
    name: str
    _eval_many: Callable[[np.ndarray], np.ndarray]
    _grad: Callable[[np.ndarray], np.ndarray]
    declared_convex: bool = True
    # Known per-objective minima F_i*, when available analytically.
    objective_minima: Optional[np.ndarray] = None
    # Predicate x -> bool describing the declared (strong) Pareto set.
    pareto_set: Optional[Callable[[np.ndarray], bool]] = field(default=None, repr=False)

    def eval(self, x) -> np.ndarray:
        """Objective vector F(x), shape (n,)."""
        x = np.asarray(x, dtype=float)
        return self._eval_many(x[None, :])[0]

    def eval_many(self, X) -> np.ndarray:
        """Vectorized evaluation: (N, m) -> (N, n)."""
        return self._eval_many(np.asarray(X, dtype=float))

    def grad(self, x) -> np.ndarray:
        """Jacobian rows grad F_i(x), shape (n, m)."""
        x = np.asarray(x, dtype=float)
        if not np.all(np.isfinite(x)):
            raise ValueError("point contains non-finite entries")
        return self._grad(x)


def quadratic_pair(m: int) -> SyntheticProblem:
    """F_1(x) = ||x - 1||^2, F_2(x) = ||x + 1||^2 (1 the all-ones vector).

    The Pareto set is the segment {alpha * 1 : alpha in [-1, 1]}; both
    objectives are 2-smooth with minima 0.
    """
    if m < 1:
        raise ValueError("dimension must be >= 1")
    ones = np.ones(m)

    def eval_many(X: np.ndarray) -> np.ndarray:
        f1 = np.sum((X - ones) ** 2, axis=1)
        f2 = np.sum((X + ones) ** 2, axis=1)
        return np.stack([f1, f2], axis=1)

    def grad(x: np.ndarray) -> np.ndarray:
        return np.stack([2.0 * (x - ones), 2.0 * (x + ones)])

    def on_segment(x: np.ndarray, atol: float = 1e-6) -> bool:
        alpha = float(np.mean(x))
        return bool(np.max(np.abs(x - alpha)) <= atol and -1.0 - atol <= alpha <= 1.0 + atol)

    return SyntheticProblem(
        n=2,
        m=m,
        smoothness=2.0,
        name=f"quadratic_pair_m{m}",
        _eval_many=eval_many,
        _grad=grad,
        objective_minima=np.zeros(2),
        pareto_set=on_segment,
    )


def clamped_norm_landscape(m: int = 2, n: int = 2) -> SyntheticProblem:
    """Squared norm with the i-th coordinate clamped to zero on |x^i| <= 5.

    F_i(x) = sum_{j != i} (x^j)^2 + max(0, |x^i| - 5)^2.  The clamp creates a
    zero-gradient plateau per objective; the gradient at the kink |x^i| = 5
    is 0 (the function is differentiable there).  L = 2.
    """
    if n > m:
        raise ValueError("objective count must not exceed dimension")

    def eval_many(X: np.ndarray) -> np.ndarray:
        sq = X**2
        total = np.sum(sq, axis=1)
        clamped = np.maximum(0.0, np.abs(X[:, :n]) - 5.0) ** 2
        return total[:, None] - sq[:, :n] + clamped

    def grad(x: np.ndarray) -> np.ndarray:
        J = np.tile(2.0 * x, (n, 1))
        for i in range(n):
            J[i, i] = 2.0 * np.sign(x[i]) * max(0.0, abs(x[i]) - 5.0)
        return J

    return SyntheticProblem(
        n=n,
        m=m,
        smoothness=2.0,
        name=f"clamped_norm_m{m}_n{n}",
        _eval_many=eval_many,
        _grad=grad,
        objective_minima=np.zeros(n),
    )


def with_dummy_objective(p: SyntheticProblem, c: float) -> SyntheticProblem:
    """Append a constant objective F_{n+1}(x) = c with an all-zero gradient.

    Every point of the augmented problem is weak Pareto optimal, which makes
    unfiltered multi-gradient descent stall everywhere.
    """

    def eval_many(X: np.ndarray) -> np.ndarray:
        base = p.eval_many(X)
        return np.concatenate([base, np.full((base.shape[0], 1), float(c))], axis=1)

    def grad(x: np.ndarray) -> np.ndarray:
        return np.concatenate([p.grad(x), np.zeros((1, p.m))])

    minima = None
    if p.objective_minima is not None:
        minima = np.concatenate([p.objective_minima, [float(c)]])

    return SyntheticProblem(
        n=p.n + 1,
        m=p.m,
        smoothness=p.smoothness,
        name=f"{p.name}_dummy",
        _eval_many=eval_many,
        _grad=grad,
        declared_convex=p.declared_convex,
        objective_minima=minima,
        pareto_set=p.pareto_set,
    )


def finite_diff_check(p, x, h: float = 1e-6) -> float:
    """Max relative error between central differences and analytic gradients.

    The denominator is max(1, |analytic|) so that near-zero entries are
    compared absolutely.
    """
    if h <= 0:
        raise ValueError("step must be positive")
    x = np.asarray(x, dtype=float)
    J = np.asarray(p.grad(x))
    worst = 0.0
    for j in range(p.m):
        e = np.zeros(p.m)
        e[j] = h
        diff = (np.asarray(p.eval(x + e)) - np.asarray(p.eval(x - e))) / (2.0 * h)
        err = np.abs(diff - J[:, j]) / np.maximum(1.0, np.abs(J[:, j]))
        worst = max(worst, float(err.max()))
    return worst
