"""Tests for the rank-one corrected stress preconditioner and the block preconditioners."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from biotprecond.assembly import (
    BlockVector,
    assemble_sigma_aux,
    assemble_sigma_riesz,
    assemble_system,
)
from biotprecond.exceptions import (
    DimensionMismatchError,
    InvalidStateError,
    NotPositiveDefiniteError,
)
from biotprecond.mesh import build_unit_square_mesh
from biotprecond.models import BoundaryMode, ParameterSet
from biotprecond.precond import (
    DiagonalSolver,
    FactorSolver,
    RankOneCorrectedSolver,
    apply_block_precond,
    apply_stress_precond_clamped,
    build_block_precond,
    build_rank_one,
    build_rank_one_for,
    build_stress_solver,
    condition_estimate,
    congruence_operator,
    factor_sigma_riesz,
)
from biotprecond.spaces import build_biot_spaces


@pytest.fixture(scope="module")
def clamped():
    return build_biot_spaces(build_unit_square_mesh(2), BoundaryMode.CLAMPED)


@pytest.fixture(scope="module")
def mixed():
    return build_biot_spaces(build_unit_square_mesh(2), BoundaryMode.MIXED)


def _riesz(spaces, params):
    free = spaces.stress.free_dofs
    riesz = assemble_sigma_riesz(spaces.mesh, spaces.stress, params, basis=spaces.basis)
    return riesz[free][:, free].toarray()


class TestRankOneData:
    """Tests for build_rank_one."""

    @settings(max_examples=25, deadline=None)
    @given(st.floats(min_value=0.0, max_value=1e12, allow_nan=False))
    def test_inverse(self, lam):
        """V^-1 V = I whenever m.w equals the scale s."""
        params = ParameterSet(lam=lam)
        rng = np.random.default_rng(7)
        w = rng.standard_normal(6)
        m = rng.standard_normal(6)
        m *= np.sqrt(2.0) / (m @ w)
        data = build_rank_one(params, w, m)
        x = rng.standard_normal(6)
        np.testing.assert_allclose(data.apply_v_inverse(data.apply_v(x)), x, rtol=1e-7, atol=1e-7)
        np.testing.assert_allclose(
            data.apply_v_inverse_transpose(data.apply_v_transpose(x)), x, rtol=1e-7, atol=1e-7
        )

    def test_zero_lambda_is_identity(self):
        data = build_rank_one(ParameterSet(lam=0.0), np.ones(3), np.ones(3))
        assert data.a == 0.0
        assert data.b == 0.0
        assert data.rho == 0.0

    def test_coefficients(self):
        params = ParameterSet(mu=0.5, lam=1.0)
        data = build_rank_one(params, np.ones(2), np.ones(2), domain_area=2.0)
        root = np.sqrt(1.0 - 2.0 / 3.0)
        assert data.scale == pytest.approx(2.0)
        assert data.a == pytest.approx((root - 1.0) / 2.0)
        assert data.b == pytest.approx((1.0 - root) / (root * 2.0))

    def test_shape_mismatch(self):
        with pytest.raises(DimensionMismatchError):
            build_rank_one(ParameterSet(), np.ones(3), np.ones(4))

    def test_mixed_boundary_rejected(self, mixed):
        with pytest.raises(InvalidStateError):
            build_rank_one_for(mixed, ParameterSet())


class TestCongruence:
    """V^T B V reproduces the auxiliary stress inner product."""

    @pytest.mark.parametrize("lam", [1e-4, 1.0, 1e4, 1e12])
    @pytest.mark.parametrize("size", [1, 2, 4])
    def test_dense_congruence(self, size, lam):
        spaces = build_biot_spaces(build_unit_square_mesh(size), BoundaryMode.CLAMPED)
        params = ParameterSet(lam=lam)
        data = build_rank_one_for(spaces, params)
        riesz = _riesz(spaces, params)
        v = np.eye(len(data.w)) + data.a * np.outer(data.w, data.m)
        aux = assemble_sigma_aux(spaces.mesh, spaces.stress, params, basis=spaces.basis)
        error = np.linalg.norm(v.T @ riesz @ v - aux, "fro")
        assert error <= 1e-12 * np.linalg.norm(aux, "fro")

    @pytest.mark.parametrize("lam", [1e-4, 1.0, 1e4, 1e12])
    @pytest.mark.parametrize("size", [1, 2, 4])
    def test_inverse_on_mesh_data(self, size, lam):
        """V^-1 V x = x up to 1e-12 / sqrt(1 - rho), the conditioning of V."""
        spaces = build_biot_spaces(build_unit_square_mesh(size), BoundaryMode.CLAMPED)
        params = ParameterSet(lam=lam)
        data = build_rank_one_for(spaces, params)
        rng = np.random.default_rng(size)
        for x in rng.standard_normal((100, len(data.w))):
            bound = 1e-12 / np.sqrt(params.one_minus_rho) * np.linalg.norm(x)
            assert np.linalg.norm(data.apply_v_inverse(data.apply_v(x)) - x) <= bound
            assert np.linalg.norm(data.apply_v_inverse_transpose(data.apply_v_transpose(x)) - x) <= bound

    @pytest.mark.parametrize("lam", [1.0, 1e4])
    def test_operator_matches_dense(self, clamped, lam):
        params = ParameterSet(lam=lam)
        data = build_rank_one_for(clamped, params)
        op = congruence_operator(_riesz(clamped, params), data)
        aux = assemble_sigma_aux(clamped.mesh, clamped.stress, params, basis=clamped.basis)
        x = np.random.default_rng(2).standard_normal(op.shape[0])
        np.testing.assert_allclose(op.matvec(x), aux @ x, atol=1e-9 * np.abs(aux @ x).max())

    @pytest.mark.parametrize("lam", [1e-4, 1.0, 1e4])
    def test_solver_inverts_aux(self, clamped, lam):
        params = ParameterSet(lam=lam)
        solver = build_stress_solver(clamped, params)
        assert isinstance(solver, RankOneCorrectedSolver)
        aux = assemble_sigma_aux(clamped.mesh, clamped.stress, params, basis=clamped.basis)
        x = np.random.default_rng(4).standard_normal(solver.size)
        np.testing.assert_allclose(aux @ solver.apply(x), x, rtol=1e-7, atol=1e-7)


    def test_apply_clamped_inverts_congruence(self, clamped):
        params = ParameterSet(lam=1e6)
        data = build_rank_one_for(clamped, params)
        riesz = _riesz(clamped, params)
        x = np.random.default_rng(5).standard_normal(len(data.w))
        y = apply_stress_precond_clamped(factor_sigma_riesz(clamped, params), data, x)
        np.testing.assert_allclose(congruence_operator(riesz, data).matvec(y), x, rtol=1e-7, atol=1e-7)


class TestBlockSolvers:
    """Tests for the per-block solvers."""

    def test_diagonal(self):
        solver = DiagonalSolver(np.array([2.0, 4.0]))
        assert solver.size == 2
        np.testing.assert_allclose(solver.apply(np.array([2.0, 2.0])), [1.0, 0.5])

    def test_diagonal_rejects_nonpositive(self):
        with pytest.raises(NotPositiveDefiniteError):
            DiagonalSolver(np.array([1.0, -1.0]))

    def test_mixed_stress_solver_is_plain_factor(self, mixed):
        solver = build_stress_solver(mixed, ParameterSet())
        assert type(solver) is FactorSolver
        assert solver.size == mixed.stress.nfree

    def test_rank_one_size_mismatch(self, clamped):
        factor = factor_sigma_riesz(clamped, ParameterSet())
        data = build_rank_one(ParameterSet(), np.ones(3), np.ones(3))
        with pytest.raises(DimensionMismatchError):
            RankOneCorrectedSolver(factor, data)


class TestBlockPrecond:
    """Tests for build_block_precond and apply_block_precond."""

    def test_sizes_match_system(self, clamped):
        params = ParameterSet(lam=1e2, alpha=0.1, kappa=1e-3)
        bp = build_block_precond(clamped, params)
        system = assemble_system(clamped, params)
        assert bp.sizes == system.sizes
        assert bp.labels == system.labels
        assert bp.mode == BoundaryMode.CLAMPED

    def test_elasticity_variant(self, mixed):
        bp = build_block_precond(mixed, ParameterSet(), with_pressure=False)
        assert bp.labels == ("sigma", "u", "gamma")
        assert bp.shape[0] == mixed.stress.nfree + mixed.displacement.ndof + mixed.rotation.ndof

    def test_symmetric_positive_definite(self, clamped):
        bp = build_block_precond(clamped, ParameterSet(lam=1e4))
        n = bp.shape[0]
        dense = np.column_stack([bp.matvec(e) for e in np.eye(n)])
        np.testing.assert_allclose(dense, dense.T, atol=1e-10 * np.abs(dense).max())
        assert np.linalg.eigvalsh(0.5 * (dense + dense.T)).min() > 0.0

    def test_partition_mismatch(self, clamped):
        bp = build_block_precond(clamped, ParameterSet())
        with pytest.raises(DimensionMismatchError):
            apply_block_precond(bp, BlockVector.zeros((1, 2, 3, 4)))

    def test_linear_operator(self, clamped):
        bp = build_block_precond(clamped, ParameterSet())
        op = bp.as_linear_operator()
        x = np.ones(op.shape[0])
        np.testing.assert_allclose(op.matvec(x), bp.matvec(x))


class TestConditionEstimate:
    """Tests for the Lanczos condition estimate."""

    def test_diagonal_spectrum(self):
        est = condition_estimate(np.diag(np.arange(1.0, 11.0)), None)
        assert est.condition == pytest.approx(10.0, rel=1e-8)
        assert est.definite

    def test_indefinite_spectrum(self):
        est = condition_estimate(np.diag([-2.0, -1.0, 1.0, 3.0]), None)
        assert est.condition == pytest.approx(3.0, rel=1e-8)
        assert not est.definite

    def test_exact_preconditioner(self):
        a = np.diag([1.0, 5.0, 25.0])
        est = condition_estimate(a, np.diag([1.0, 0.2, 0.04]))
        assert est.condition == pytest.approx(1.0, abs=1e-10)
        assert est.breakdown

    @pytest.mark.parametrize("lam", [1.0, 1e4, 1e12])
    def test_rank_one_preconditioner_is_exact(self, clamped, lam):
        params = ParameterSet(lam=lam)
        factor = factor_sigma_riesz(clamped, params)
        data = build_rank_one_for(clamped, params)
        op = congruence_operator(_riesz(clamped, params), data)
        solver = RankOneCorrectedSolver(factor, data)
        est = condition_estimate(op, solver.apply, iters=40)
        assert est.condition <= 1.0 + 1e-6

    def test_indefinite_preconditioner_rejected(self):
        with pytest.raises(NotPositiveDefiniteError):
            condition_estimate(np.eye(2), -np.eye(2))
