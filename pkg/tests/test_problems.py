"""Synthetic multi-objective test problems."""

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from mgdakit.problems import (
    SyntheticProblem,
    clamped_norm_landscape,
    finite_diff_check,
    quadratic_pair,
    with_dummy_objective,
)

points = st.lists(st.floats(-8, 8, allow_nan=False), min_size=2, max_size=2).map(np.array)


class TestQuadraticPair:
    def test_objective_values(self):
        p = quadratic_pair(2)
        x = np.array([0.0, 0.0])
        assert p.eval(x) == pytest.approx([2.0, 2.0])
        assert p.eval(np.array([1.0, 1.0])) == pytest.approx([0.0, 8.0])

    def test_gradients(self):
        p = quadratic_pair(2)
        g = p.grad(np.array([3.0, 3.0]))
        np.testing.assert_allclose(g[0], [4.0, 4.0])
        np.testing.assert_allclose(g[1], [8.0, 8.0])

    def test_smoothness_constant(self):
        assert quadratic_pair(5).smoothness == 2.0

    def test_pareto_segment_membership(self):
        p = quadratic_pair(3)
        assert p.pareto_set(np.array([0.5, 0.5, 0.5]))
        assert p.pareto_set(np.array([-1.0, -1.0, -1.0]))
        assert not p.pareto_set(np.array([1.5, 1.5, 1.5]))
        assert not p.pareto_set(np.array([1.0, 0.0, 0.0]))

    def test_minimum_values_are_zero(self):
        p = quadratic_pair(2)
        np.testing.assert_allclose(p.objective_minima, [0.0, 0.0])
        assert p.eval(np.ones(2))[0] == 0.0
        assert p.eval(-np.ones(2))[1] == 0.0


class TestClampedNorm:
    def test_values_inside_slab(self):
        p = clamped_norm_landscape()
        x = np.array([7.0, 0.0])
        assert p.eval(x) == pytest.approx([4.0, 49.0])

    def test_gradients_at_example_point(self):
        p = clamped_norm_landscape()
        g = p.grad(np.array([7.0, 0.0]))
        np.testing.assert_allclose(g[0], [4.0, 0.0])
        np.testing.assert_allclose(g[1], [14.0, 0.0])

    def test_zero_gradient_plateau(self):
        """F_1's gradient vanishes on the slab |x1| <= 5, x2 = 0."""
        p = clamped_norm_landscape()
        for x1 in np.linspace(-4.9, 4.9, 11):
            g = p.grad(np.array([x1, 0.0]))
            np.testing.assert_allclose(g[0], 0.0, atol=1e-12)

    def test_objective_zero_on_own_slab(self):
        p = clamped_norm_landscape()
        assert p.eval(np.array([3.0, 0.0]))[0] == 0.0
        assert p.eval(np.array([0.0, -2.0]))[1] == 0.0

    def test_smoothness_constant(self):
        assert clamped_norm_landscape().smoothness == 2.0

    def test_eval_many_matches_eval(self):
        p = clamped_norm_landscape()
        xs = np.random.default_rng(0).uniform(-10, 10, size=(40, 2))
        batch = p.eval_many(xs)
        single = np.array([p.eval(x) for x in xs])
        np.testing.assert_allclose(batch, single, atol=1e-12)


class TestDummyObjective:
    def test_appends_constant(self):
        p = with_dummy_objective(quadratic_pair(2), 3.5)
        x = np.array([0.2, -0.4])
        vals = p.eval(x)
        assert vals.shape == (3,)
        assert vals[2] == 3.5

    def test_dummy_gradient_is_zero(self):
        p = with_dummy_objective(quadratic_pair(2), 1.0)
        g = p.grad(np.array([2.0, 2.0]))
        assert g.shape == (3, 2)
        np.testing.assert_allclose(g[2], 0.0)

    def test_wraps_eval_many(self):
        p = with_dummy_objective(clamped_norm_landscape(), -1.0)
        xs = np.zeros((5, 2))
        vals = p.eval_many(xs)
        assert vals.shape == (5, 3)
        np.testing.assert_allclose(vals[:, 2], -1.0)


@settings(max_examples=250, deadline=None)
@given(x=points)
def test_quadratic_finite_diff(x):
    assert finite_diff_check(quadratic_pair(2), x) < 1e-5


@settings(max_examples=250, deadline=None)
@given(x=points)
def test_clamped_finite_diff(x):
    # the kink at |x_i| = 5 has one-sided derivatives; step over it
    if min(abs(abs(x) - 5.0)) < 1e-3:
        x = x + 0.01
    assert finite_diff_check(clamped_norm_landscape(), x) < 1e-5


@settings(max_examples=200, deadline=None)
@given(x=points, c=st.floats(-5, 5, allow_nan=False))
def test_dummy_finite_diff(x, c):
    p = with_dummy_objective(quadratic_pair(2), c)
    assert finite_diff_check(p, x) < 1e-5


def test_problem_shapes_are_validated():
    p = quadratic_pair(2)
    assert isinstance(p, SyntheticProblem)
    with pytest.raises(ValueError):
        p.eval(np.zeros(3))
