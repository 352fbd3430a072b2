"""Tests for the triangle and edge quadrature rules."""

import numpy as np
import pytest

from biotprecond.exceptions import InvalidArgumentError
from biotprecond.quadrature import edge_rule, triangle_rule


class TestEdgeRule:
    """Tests for edge_rule."""

    def test_two_points_by_default(self):
        points, weights = edge_rule()
        np.testing.assert_allclose(points, 0.5 + np.array([-0.5, 0.5]) / np.sqrt(3.0), atol=1e-15)
        np.testing.assert_allclose(weights, [0.5, 0.5], atol=1e-15)

    @pytest.mark.parametrize("power", [0, 1, 2, 3])
    def test_exact_for_cubics(self, power):
        points, weights = edge_rule()
        assert weights @ points**power == pytest.approx(1.0 / (power + 1), rel=1e-14)

    def test_not_exact_for_quartics(self):
        points, weights = edge_rule()
        assert abs(weights @ points**4 - 0.2) > 1e-4

    def test_more_points(self):
        points, weights = edge_rule(3)
        assert weights @ points**5 == pytest.approx(1.0 / 6.0, rel=1e-14)


class TestTriangleRule:
    """Tests for triangle_rule."""

    @pytest.mark.parametrize("degree", [2, 4])
    def test_weights_sum_to_one(self, degree):
        rule = triangle_rule(degree)
        assert rule.weights.sum() == pytest.approx(1.0, rel=1e-14)
        np.testing.assert_allclose(rule.barycentric.sum(axis=1), 1.0, atol=1e-15)

    def test_degree4_integrates_quartic(self):
        # 2 * int over the reference triangle of x^4 is 2 / 30
        rule = triangle_rule(4)
        x = rule.barycentric[:, 1]
        assert rule.weights @ x**4 == pytest.approx(1.0 / 15.0, rel=1e-12)

    def test_unknown_degree(self):
        with pytest.raises(InvalidArgumentError):
            triangle_rule(3)
