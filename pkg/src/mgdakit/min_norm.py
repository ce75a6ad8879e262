"""Minimum-norm element of the convex hull of a set of gradient vectors.

The solution pair (lambda, d) with d = sum_i lambda_i g_i is the building
block of every multi-gradient descent step in this package: -d is the common
descent direction, and d = 0 certifies that no such direction exists.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = [
    "MinNormSolution",
    "min_norm_element",
    "min_norm_pair",
    "steepest_direction",
]


@dataclass(frozen=True)
class MinNormSolution:
    """Weights on the simplex and the hull point they select."""

    weights: np.ndarray
    direction: np.ndarray
    squared_norm: float

    @property
    def norm(self) -> float:
        return float(np.sqrt(self.squared_norm))


def _as_matrix(vectors) -> np.ndarray:
    G = np.atleast_2d(np.asarray(vectors, dtype=float))
    if G.size == 0:
        raise ValueError("gradient set must be non-empty")
    if G.ndim != 2:
        raise ValueError("gradient set must be a list of equal-length vectors")
    if not np.all(np.isfinite(G)):
        raise ValueError("gradient set contains non-finite entries")
    return G


def _solution(G: np.ndarray, lam: np.ndarray) -> MinNormSolution:
    d = G.T @ lam
    return MinNormSolution(weights=lam, direction=d, squared_norm=float(d @ d))


def min_norm_pair(g1, g2) -> MinNormSolution:
    """Closed-form min-norm point of the segment [g1, g2].

    lambda* on g1 is clip(<g2 - g1, g2> / ||g1 - g2||^2, 0, 1); identical
    vectors get uniform weights (any lambda is optimal there).
    """
    g1 = np.asarray(g1, dtype=float)
    g2 = np.asarray(g2, dtype=float)
    if g1.shape != g2.shape:
        raise ValueError(f"dimension mismatch: {g1.shape} vs {g2.shape}")
    if not (np.all(np.isfinite(g1)) and np.all(np.isfinite(g2))):
        raise ValueError("gradient set contains non-finite entries")
    diff = g1 - g2
    denom = float(diff @ diff)
    if denom == 0.0:
        lam1 = 0.5
    else:
        lam1 = float(np.clip((g2 - g1) @ g2 / denom, 0.0, 1.0))
    lam = np.array([lam1, 1.0 - lam1])
    return _solution(np.stack([g1, g2]), lam)


def _support_polish(M: np.ndarray, lam: np.ndarray) -> np.ndarray:
    """Exact refinement of a Frank-Wolfe iterate.

    Frank-Wolfe converges only sublinearly near faces of the simplex, so the
    iterate is used to seed an exact search: for every support set (k is
    small), solve the KKT system M_S x = c 1, keep feasible candidates, and
    return the best.  Falls back to the input for large k.
    """
    k = M.shape[0]
    if k > 12:
        return lam
    best = lam
    best_val = float(lam @ M @ lam)
    for mask in range(1, 1 << k):
        idx = [i for i in range(k) if mask >> i & 1]
        s = len(idx)
        sub = M[np.ix_(idx, idx)]
        # Bordered system for min x'.M_S.x subject to 1'x = 1.
        kkt = np.zeros((s + 1, s + 1))
        kkt[:s, :s] = 2.0 * sub
        kkt[:s, s] = 1.0
        kkt[s, :s] = 1.0
        rhs = np.zeros(s + 1)
        rhs[s] = 1.0
        sol, *_ = np.linalg.lstsq(kkt, rhs, rcond=None)
        if not np.allclose(kkt @ sol, rhs, atol=1e-9):
            continue  # no stationary point on this face
        x = sol[:s]
        if np.any(x < -1e-12):
            continue
        x = np.clip(x, 0.0, None)
        x /= x.sum()
        val = float(x @ sub @ x)
        if val < best_val - 1e-15:
            cand = np.zeros(k)
            cand[idx] = x
            best, best_val = cand, val
    return best


def min_norm_element(grads, tol: float = 1e-10, max_iter: int = 500) -> MinNormSolution:
    """Min of ||sum_i lambda_i g_i||^2 over the probability simplex.

    Frank-Wolfe with the exact two-point line search, warm-started from
    uniform weights; stops once the duality gap drops below ``tol`` or after
    ``max_iter`` iterations, then the support is polished exactly.  Ties in
    the linear subproblem break to the lowest index.
    """
    G = _as_matrix(grads)
    k = G.shape[0]
    if tol <= 0:
        raise ValueError("tol must be positive")
    if k == 1:
        return _solution(G, np.array([1.0]))
    if np.all(G == G[0]):
        # Degenerate hull: every weight vector is optimal, return uniform.
        return _solution(G, np.full(k, 1.0 / k))

    M = G @ G.T
    lam = np.full(k, 1.0 / k)
    for _ in range(max_iter):
        q = M @ lam
        f = float(lam @ q)
        i = int(np.argmin(q))
        gap = 2.0 * (f - q[i])
        if gap < tol:
            break
        # Exact line search from lam toward the vertex e_i.
        denom = M[i, i] - 2.0 * q[i] + f
        if denom <= 0.0:
            gamma = 1.0
        else:
            gamma = float(np.clip((f - q[i]) / denom, 0.0, 1.0))
        lam = (1.0 - gamma) * lam
        lam[i] += gamma
    lam = np.clip(lam, 0.0, None)
    lam /= lam.sum()
    lam = _support_polish(M, lam)
    return _solution(G, lam)


def steepest_direction(grads, tol: float = 1e-10) -> np.ndarray:
    """Common steepest-descent direction: the negated min-norm hull point."""
    return -min_norm_element(grads, tol=tol).direction
