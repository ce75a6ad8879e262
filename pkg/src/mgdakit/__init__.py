"""Multi-objective gradient descent toolkit.

Min-norm common-descent directions, plain and epsilon-filtered
multi-gradient descent with a strong-Pareto convergence guarantee on convex
bi-objective problems, a brute-force Pareto oracle, and tabular multi-agent
policy-gradient trainers on cooperative gridworlds.
"""

from . import descent, gridworld, marl, min_norm, oracle, problems

__all__ = ["descent", "gridworld", "marl", "min_norm", "oracle", "problems"]
__version__ = "0.1.0"
