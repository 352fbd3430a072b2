"""Tests for the structured unit-square mesh."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from biotprecond.exceptions import InvalidArgumentError
from biotprecond.mesh import (
    build_unit_square_mesh,
    classify_boundary,
    edge_normal,
    format_mesh_dump,
)
from biotprecond.models import BoundaryMode


class TestBuildMesh:
    """Tests for build_unit_square_mesh."""

    def test_single_square(self):
        mesh = build_unit_square_mesh(1)
        assert mesh.nvertices == 4
        assert mesh.ncells == 2
        assert mesh.nedges == 5
        assert len(mesh.boundary_edges) == 4

    @settings(max_examples=10, deadline=None)
    @given(st.integers(min_value=1, max_value=12))
    def test_entity_counts(self, n):
        """Vertex, cell, edge and boundary counts follow the grid formulas."""
        mesh = build_unit_square_mesh(n)
        assert mesh.nvertices == (n + 1) ** 2
        assert mesh.ncells == 2 * n * n
        assert mesh.nedges == 3 * n * n + 2 * n
        assert len(mesh.boundary_edges) == 4 * n
        # Euler characteristic of a disk
        assert mesh.nvertices - mesh.nedges + mesh.ncells == 1

    def test_vertex_numbering(self):
        mesh = build_unit_square_mesh(4)
        i, j = 3, 2
        np.testing.assert_allclose(mesh.vertices[j * 5 + i], [0.75, 0.5])

    def test_cells_counter_clockwise(self):
        mesh = build_unit_square_mesh(5)
        assert np.all(mesh.signed_areas > 0.0)
        assert mesh.domain_area == pytest.approx(1.0, abs=1e-14)

    def test_edges_low_index_first(self):
        mesh = build_unit_square_mesh(3)
        assert np.all(mesh.edges[:, 0] < mesh.edges[:, 1])

    def test_interior_edges_see_opposite_signs(self):
        mesh = build_unit_square_mesh(4)
        interior = np.flatnonzero(mesh.edge_cells[:, 1] >= 0)
        for e in interior:
            signs = []
            for c in mesh.edge_cells[e]:
                k = int(np.flatnonzero(mesh.cell_edges[c] == e)[0])
                signs.append(mesh.cell_edge_signs[c, k])
            assert signs[0] == -signs[1]

    def test_sign_marks_outward_normal(self):
        """A +1 sign means the global normal points away from the cell centroid."""
        mesh = build_unit_square_mesh(3)
        for c in range(mesh.ncells):
            for k, e in enumerate(mesh.cell_edges[c]):
                midpoint = mesh.vertices[mesh.edges[e]].mean(axis=0)
                outward = np.dot(mesh.edge_normals[e], midpoint - mesh.centroids[c]) > 0
                assert (mesh.cell_edge_signs[c, k] == 1) == outward

    def test_arrays_are_read_only(self):
        mesh = build_unit_square_mesh(2)
        with pytest.raises(ValueError):
            mesh.vertices[0, 0] = 5.0

    @pytest.mark.parametrize("n", [0, -3, 1.5])
    def test_invalid_size(self, n):
        with pytest.raises(InvalidArgumentError, match="positive integer"):
            build_unit_square_mesh(n)


class TestBoundary:
    """Tests for classify_boundary."""

    def test_clamped_has_no_traction_edges(self):
        mesh = build_unit_square_mesh(4)
        tags = classify_boundary(mesh, "clamped")
        assert tags.is_clamped
        assert len(tags.gamma_t) == 0
        assert set(tags.gamma_d) == set(mesh.boundary_edges)
        assert len(tags.gamma_p) == 0
        assert set(tags.gamma_f) == set(mesh.boundary_edges)

    def test_mixed_puts_top_edges_in_traction_part(self):
        mesh = build_unit_square_mesh(4)
        tags = classify_boundary(mesh, BoundaryMode.MIXED)
        assert not tags.is_clamped
        assert len(tags.gamma_t) == 4
        assert np.allclose(mesh.vertices[mesh.edges[tags.gamma_t]][:, :, 1], 1.0)
        assert len(tags.gamma_d) == 12
        assert not set(tags.gamma_t) & set(tags.gamma_d)

    def test_unknown_mode(self):
        with pytest.raises(ValueError):
            classify_boundary(build_unit_square_mesh(1), "slippery")


class TestEdgeNormal:
    """Tests for edge_normal."""

    def test_matches_rotated_tangent(self):
        mesh = build_unit_square_mesh(2)
        for e in range(mesh.nedges):
            np.testing.assert_allclose(edge_normal(mesh, e), mesh.edge_normals[e])
            assert np.linalg.norm(edge_normal(mesh, e)) == pytest.approx(1.0)

    def test_bottom_edge_points_down(self):
        mesh = build_unit_square_mesh(1)
        e = int(np.flatnonzero((mesh.edges == [0, 1]).all(axis=1))[0])
        np.testing.assert_allclose(edge_normal(mesh, e), [0.0, -1.0])

    def test_vertical_and_diagonal_edges(self):
        mesh = build_unit_square_mesh(1)
        right = int(np.flatnonzero((mesh.edges == [1, 3]).all(axis=1))[0])
        diagonal = int(np.flatnonzero((mesh.edges == [0, 3]).all(axis=1))[0])
        np.testing.assert_allclose(edge_normal(mesh, right), [1.0, 0.0])
        np.testing.assert_allclose(edge_normal(mesh, diagonal), np.array([1.0, -1.0]) / np.sqrt(2.0))

    def test_out_of_range(self):
        mesh = build_unit_square_mesh(1)
        with pytest.raises(InvalidArgumentError, match="out of range"):
            edge_normal(mesh, mesh.nedges)


class TestMeshDump:
    """Tests for the plain-text mesh dump."""

    def test_layout(self):
        mesh = build_unit_square_mesh(1)
        lines = format_mesh_dump(mesh).splitlines()
        assert lines[0] == "# vertices 4"
        assert lines[5] == "# cells 2"
        assert lines[6] == "0 0 1 3"
        assert lines[7] == "1 0 3 2"
