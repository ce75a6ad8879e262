"""Brute-force Pareto classification on dense grids.

Dominance scans over a finite grid give an independent check of what the
descent loops claim: weak/strong Pareto verdicts per point, a stationarity
residual from the min-norm subproblem, and the sufficient-condition
certificate for strong optimality (a vanishing convex combination of
non-zero gradients).
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np

from .min_norm import min_norm_element

__all__ = [
    "GridSpec",
    "ParetoVerdict",
    "GridOracle",
    "classify",
    "stationarity_residual",
    "lemma2_certificate",
    "DOMINANCE_SLACK",
]

# Componentwise slack absorbing float noise in grid dominance checks;
# "F(y) != F(x)" means an L-infinity difference above this.
DOMINANCE_SLACK = 1e-9

MAX_GRID_SIZE = 10**7


@dataclass(frozen=True)
class GridSpec:
    lower: Tuple[float, ...]
    upper: Tuple[float, ...]
    points_per_axis: int

    def __post_init__(self) -> None:
        if len(self.lower) != len(self.upper):
            raise ValueError("lower/upper bound dimension mismatch")
        if self.points_per_axis < 2:
            raise ValueError("points-per-axis must be >= 2")
        if not all(np.isfinite(self.lower)) or not all(np.isfinite(self.upper)):
            raise ValueError("grid bounds must be finite")
        if self.points_per_axis ** len(self.lower) > MAX_GRID_SIZE:
            raise ValueError("grid size guard exceeded")

    @property
    def dim(self) -> int:
        return len(self.lower)

    def points(self) -> np.ndarray:
        axes = [
            np.linspace(lo, hi, self.points_per_axis)
            for lo, hi in zip(self.lower, self.upper)
        ]
        mesh = np.meshgrid(*axes, indexing="ij")
        return np.stack([m.ravel() for m in mesh], axis=1)


@dataclass(frozen=True)
class ParetoVerdict:
    is_weak: bool
    is_strong: bool
    is_eps: bool
    stationarity_residual: float
    witness: Optional[np.ndarray]


def _strictly_dominates(F: np.ndarray, fx: np.ndarray) -> np.ndarray:
    return np.all(F < fx - DOMINANCE_SLACK, axis=1)


def _dominates(F: np.ndarray, fx: np.ndarray) -> np.ndarray:
    leq = np.all(F <= fx + DOMINANCE_SLACK, axis=1)
    differs = np.max(np.abs(F - fx), axis=1) > DOMINANCE_SLACK
    return leq & differs


class GridOracle:
    """Caches grid evaluations and the grid's strong-Pareto front."""

    def __init__(self, problem, grid: GridSpec):
        if grid.dim != problem.m:
            raise ValueError("grid dimension does not match the problem")
        self.problem = problem
        self.grid = grid
        self.points = grid.points()
        eval_many = getattr(problem, "eval_many", None)
        if eval_many is not None:
            self.values = np.asarray(eval_many(self.points), dtype=float)
        else:
            self.values = np.array([problem.eval(p) for p in self.points], dtype=float)
        self._front_mask: Optional[np.ndarray] = None

    def strong_front_mask(self) -> np.ndarray:
        """Boolean mask of grid points not dominated by any other grid point."""
        if self._front_mask is not None:
            return self._front_mask
        F = self.values
        if F.shape[1] == 2:
            self._front_mask = self._front_mask_2d(F)
            return self._front_mask
        order = np.argsort(F.sum(axis=1), kind="stable")
        front_rows: list[np.ndarray] = []
        front_idx: list[int] = []
        # Points are scanned in ascending objective-sum order; a point can
        # only be dominated by one already on the provisional front.
        for start in range(0, len(order), 2048):
            block = order[start : start + 2048]
            Fb = F[block]
            if front_rows:
                Ff = np.vstack(front_rows)
                leq = np.all(Ff[None, :, :] <= Fb[:, None, :] + DOMINANCE_SLACK, axis=2)
                dif = (
                    np.max(np.abs(Ff[None, :, :] - Fb[:, None, :]), axis=2)
                    > DOMINANCE_SLACK
                )
                dominated = np.any(leq & dif, axis=1)
            else:
                dominated = np.zeros(len(block), dtype=bool)
            # Resolve dominance within the block itself ([i, j]: i dominates j).
            leq = np.all(Fb[:, None, :] <= Fb[None, :, :] + DOMINANCE_SLACK, axis=2)
            dif = np.max(np.abs(Fb[:, None, :] - Fb[None, :, :]), axis=2) > DOMINANCE_SLACK
            dominated |= np.any(leq & dif, axis=0)
            for j in np.nonzero(~dominated)[0]:
                front_rows.append(Fb[j])
                front_idx.append(int(block[j]))
        mask = np.zeros(len(F), dtype=bool)
        mask[front_idx] = True
        self._front_mask = mask
        return mask

    @staticmethod
    def _front_mask_2d(F: np.ndarray) -> np.ndarray:
        # Sweep in f1 order: y dominates x iff y is componentwise within
        # +slack of x and beats it by more than slack in f1 or in f2.
        order = np.lexsort((F[:, 1], F[:, 0]))
        f1, f2 = F[order, 0], F[order, 1]
        cummin = np.minimum.accumulate(f2)
        hi = np.searchsorted(f1, f1 + DOMINANCE_SLACK, side="right") - 1
        lo = np.searchsorted(f1, f1 - DOMINANCE_SLACK, side="right") - 1
        dominated = cummin[hi] < f2 - DOMINANCE_SLACK
        has_lo = lo >= 0
        dominated[has_lo] |= cummin[lo[has_lo]] <= f2[has_lo] + DOMINANCE_SLACK
        mask = np.zeros(len(F), dtype=bool)
        mask[order[~dominated]] = True
        return mask

    def front_values(self) -> np.ndarray:
        return self.values[self.strong_front_mask()]

    def classify(self, x, varepsilon: float = 0.0) -> ParetoVerdict:
        x = np.asarray(x, dtype=float)
        fx = np.asarray(self.problem.eval(x), dtype=float)
        strict = _strictly_dominates(self.values, fx)
        dom = _dominates(self.values, fx)
        is_weak = not bool(strict.any())
        is_strong = not bool(dom.any())
        witness = None
        if not is_strong:
            bad = strict if not is_weak else dom
            witness = self.points[int(np.argmax(bad))]
        is_eps = False
        if varepsilon > 0:
            front = self.front_values()
            is_eps = bool(np.any(np.all(fx <= front + varepsilon + DOMINANCE_SLACK, axis=1)))
        return ParetoVerdict(
            is_weak=is_weak,
            is_strong=is_strong,
            is_eps=is_eps,
            stationarity_residual=stationarity_residual(x, self.problem),
            witness=witness,
        )

    def write_csv(self, path, points, varepsilon: float = 0.0) -> None:
        """Classification rows: point, F, verdict flags, residual."""
        m, n = self.problem.m, self.problem.n
        header = (
            [f"x{j}" for j in range(m)]
            + [f"f{i}" for i in range(n)]
            + ["is_weak", "is_strong", "is_eps", "residual"]
        )
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(header)
            for x in points:
                v = self.classify(x, varepsilon)
                fx = self.problem.eval(x)
                writer.writerow(
                    [f"{c:.17g}" for c in np.asarray(x, dtype=float)]
                    + [f"{c:.17g}" for c in fx]
                    + [int(v.is_weak), int(v.is_strong), int(v.is_eps),
                       f"{v.stationarity_residual:.17g}"]
                )


def classify(x, problem, grid: GridSpec, varepsilon: float = 0.0) -> ParetoVerdict:
    """One-shot classification; use GridOracle directly for batches."""
    return GridOracle(problem, grid).classify(x, varepsilon)


def stationarity_residual(x, problem) -> float:
    """Norm of the min-norm hull point of all gradients at x.

    A value <= 1e-9 certifies Pareto stationarity (no common descent
    direction); under convexity that implies weak Pareto optimality.
    """
    sol = min_norm_element(problem.grad(x))
    return sol.norm


def lemma2_certificate(grads, eps: float, tol: float = 1e-9) -> bool:
    """Sufficient strong-Pareto condition from non-zero gradients.

    True iff the gradients with norm > eps form a non-empty set whose
    min-norm hull point has norm <= tol: a vanishing convex combination of
    non-zero gradients certifies strong Pareto optimality under convexity.
    """
    G = np.atleast_2d(np.asarray(grads, dtype=float))
    norms = np.linalg.norm(G, axis=1)
    keep = norms > eps
    if not keep.any():
        return False
    sol = min_norm_element(G[keep])
    return sol.norm <= tol
