"""Tests for the discrete spaces and the BDM1 basis."""

import numpy as np
import pytest

from biotprecond.exceptions import DimensionMismatchError, InvalidArgumentError, InvalidStateError
from biotprecond.mesh import build_unit_square_mesh, classify_boundary
from biotprecond.models import BoundaryMode, SpaceKind
from biotprecond.quadrature import triangle_rule
from biotprecond.spaces import (
    bdm1_edge_moments,
    build_biot_spaces,
    build_space,
    build_stress_basis,
    evaluate_stress,
    interpolate_identity,
    local_edge_moments,
    stress_trace_moments,
)


@pytest.fixture
def clamped():
    return build_biot_spaces(build_unit_square_mesh(3), BoundaryMode.CLAMPED)


@pytest.fixture
def mixed():
    return build_biot_spaces(build_unit_square_mesh(3), BoundaryMode.MIXED)


def _cell_points(mesh, degree=4):
    rule = triangle_rule(degree)
    corners = mesh.vertices[mesh.cells]                  # (C, 3, 2)
    return np.einsum("qk,ckd->cqd", rule.barycentric, corners)


class TestDofMaps:
    """Tests for build_space and the DOF layout."""

    def test_single_square_sizes(self):
        spaces = build_biot_spaces(build_unit_square_mesh(1), "clamped")
        assert spaces.stress.ndof == 20
        assert spaces.displacement.ndof == 4
        assert spaces.rotation.ndof == 2
        assert spaces.pressure.ndof == 4
        assert spaces.stress.nfree == 20

    def test_mixed_constrains_top_edges(self):
        spaces = build_biot_spaces(build_unit_square_mesh(1), "mixed")
        assert int(spaces.stress.constrained.sum()) == 4
        assert spaces.stress.nfree == 16
        assert spaces.mode == BoundaryMode.MIXED

    def test_pressure_pin_at_origin(self):
        mesh = build_unit_square_mesh(4)
        pressure = build_space(mesh, classify_boundary(mesh, "clamped"), SpaceKind.PRESSURE)
        assert pressure.ndof == 25
        assert pressure.pinned_dof == 0

    def test_stress_dof_numbering(self, clamped):
        """DOF of (edge e, row r, moment k) is r*2E + 2e + k."""
        nedges = clamped.mesh.nedges
        e, r, k = 7, 1, 1
        assert clamped.stress.entity_dofs[e, r, k] == r * 2 * nedges + 2 * e + k

    def test_cell_dofs_cover_space(self, clamped):
        assert set(np.unique(clamped.stress.cell_dofs)) == set(range(clamped.stress.ndof))
        assert clamped.stress.cell_dofs.shape == (clamped.mesh.ncells, 12)
        assert clamped.displacement.cell_dofs.shape == (clamped.mesh.ncells, 2)


class TestStressBasis:
    """Tests for the dual BDM1 basis."""

    def test_duality(self):
        mesh = build_unit_square_mesh(4)
        moments = local_edge_moments(mesh, build_stress_basis(mesh))
        identity = np.broadcast_to(np.eye(6), moments.shape)
        np.testing.assert_allclose(moments, identity, atol=1e-12)

    def test_trace_moments_reproduce_coefficients(self, clamped):
        """Moments seen from either side of an edge equal its coefficients."""
        mesh, stress = clamped.mesh, clamped.stress
        coeffs = np.random.default_rng(3).standard_normal(stress.ndof)
        moments = stress_trace_moments(mesh, clamped.basis, stress, coeffs)
        for c in range(mesh.ncells):
            for k, e in enumerate(mesh.cell_edges[c]):
                np.testing.assert_allclose(
                    moments[c, k], coeffs[stress.entity_dofs[e]], atol=1e-12
                )

    def test_trace_moments_shape_mismatch(self, clamped):
        with pytest.raises(DimensionMismatchError):
            stress_trace_moments(clamped.mesh, clamped.basis, clamped.stress, np.zeros(3))

    def test_identity_reconstruction(self, clamped):
        w = interpolate_identity(clamped.stress, clamped.mesh)
        values = evaluate_stress(clamped.basis, clamped.stress, w, _cell_points(clamped.mesh))
        identity = np.broadcast_to(np.eye(2), values.shape)
        np.testing.assert_allclose(values, identity, atol=1e-12)

    def test_identity_rejected_under_mixed_conditions(self, mixed):
        with pytest.raises(InvalidStateError, match="mixed"):
            interpolate_identity(mixed.stress, mixed.mesh)

    def test_identity_needs_stress_space(self, clamped):
        with pytest.raises(InvalidArgumentError):
            interpolate_identity(clamped.pressure, clamped.mesh)


class TestEdgeMoments:
    """Tests for bdm1_edge_moments."""

    @staticmethod
    def _edge(mesh, a, b):
        return int(np.flatnonzero((mesh.edges == [a, b]).all(axis=1))[0])

    def test_constant_field_on_right_edge(self):
        mesh = build_unit_square_mesh(1)
        edge = self._edge(mesh, 1, 3)
        moments = bdm1_edge_moments(lambda p: np.tile([1.0, 0.0], (len(p), 1)), mesh, edge)
        np.testing.assert_allclose(moments, [1.0, 0.0], atol=1e-14)

    def test_constant_field_on_bottom_edge(self):
        mesh = build_unit_square_mesh(1)
        edge = self._edge(mesh, 0, 1)
        moments = bdm1_edge_moments(lambda p: np.tile([0.0, 1.0], (len(p), 1)), mesh, edge)
        np.testing.assert_allclose(moments, [-1.0, 0.0], atol=1e-14)

    def test_tangential_field_has_no_moments(self):
        mesh = build_unit_square_mesh(1)
        edge = self._edge(mesh, 0, 1)
        moments = bdm1_edge_moments(lambda p: np.tile([1.0, 0.0], (len(p), 1)), mesh, edge)
        np.testing.assert_allclose(moments, [0.0, 0.0], atol=1e-14)

    def test_linear_field_first_moment(self):
        """v = (0, -x) on the bottom edge has v.n = x, so the moments are 1/2 and 1/6."""
        mesh = build_unit_square_mesh(1)
        edge = self._edge(mesh, 0, 1)
        moments = bdm1_edge_moments(
            lambda p: np.column_stack([np.zeros(len(p)), -p[:, 0]]), mesh, edge
        )
        np.testing.assert_allclose(moments, [0.5, 1.0 / 6.0], atol=1e-14)

    def test_out_of_range(self):
        mesh = build_unit_square_mesh(1)
        with pytest.raises(InvalidArgumentError):
            bdm1_edge_moments(lambda p: p, mesh, -1)
