"""Tests for the dense verification checks."""

import numpy as np
import pytest

from biotprecond.config import VerifyConfig
from biotprecond.exceptions import InvalidArgumentError
from biotprecond.mesh import build_unit_square_mesh
from biotprecond.models import BoundaryMode, ParameterSet
from biotprecond.spaces import build_biot_spaces
from biotprecond.verify import (
    LOWER_BOUND_TOL,
    SpectralRow,
    SpectralTable,
    aux_preconditioner_condition,
    check_elasticity_stability,
    check_infsup,
    check_plain_norm_clamped,
    check_spectral_equivalence_clamped,
    check_spectral_equivalence_nonclamped,
    identity_form_ratio,
    infsup_estimate,
    run_verification,
    stress_pair_condition,
)

LAMBDAS = [0.0, 1.0, 1e4, 1e8, 1e12]


class TestSpectralTable:
    """Tests for the SpectralTable summaries."""

    def test_summaries(self):
        table = SpectralTable(
            "demo",
            (SpectralRow(1e4, 1.0, 2.0), SpectralRow(1.0, 1.0, 1.5), SpectralRow(1e8, 1.0, 2.001)),
        )
        assert table.lower == 1.0
        assert table.spread == pytest.approx(2.001 / 1.5)
        assert table.plateau == pytest.approx(0.001 / 2.001)
        assert table.nondecreasing

    def test_decreasing_upper(self):
        table = SpectralTable("demo", (SpectralRow(1.0, 1.0, 3.0), SpectralRow(2.0, 1.0, 2.0)))
        assert not table.nondecreasing

    def test_single_row_plateau(self):
        assert SpectralTable("demo", (SpectralRow(1.0, 1.0, 3.0),)).plateau == 0.0


class TestSpectralEquivalence:
    """Tests for the stress inner-product pencils."""

    def test_nonclamped(self):
        table = check_spectral_equivalence_nonclamped(2, LAMBDAS)
        assert table.lower >= 1.0 - LOWER_BOUND_TOL
        assert table.nondecreasing
        assert table.plateau <= 1e-3
        first = table.rows[0]
        assert first.eig_min == pytest.approx(1.0, abs=1e-10)
        assert first.eig_max == pytest.approx(1.0, abs=1e-10)

    def test_clamped(self):
        table = check_spectral_equivalence_clamped(2, LAMBDAS)
        assert table.lower >= 1.0 - LOWER_BOUND_TOL
        assert table.nondecreasing
        assert table.plateau <= 1e-3
        for row in table.rows:
            tol = max(1e-10, 1e-13 * (1.0 + row.lam))
            assert row.identity_ratio == pytest.approx(1.0, abs=tol)

    def test_identity_ratio(self):
        spaces = build_biot_spaces(build_unit_square_mesh(2), BoundaryMode.CLAMPED)
        assert identity_form_ratio(spaces, ParameterSet(lam=10.0)) == pytest.approx(1.0, abs=1e-12)

    def test_negative_control(self):
        """Without the rank-one correction the clamped ratio degenerates."""
        assert check_plain_norm_clamped(2, 1e12) < 1e-8
        assert check_plain_norm_clamped(2, 1.0) > 1e-3

    @pytest.mark.parametrize("n", [0, 9])
    def test_dense_size_limit(self, n):
        with pytest.raises(InvalidArgumentError, match="Dense verification"):
            check_spectral_equivalence_nonclamped(n, [1.0])


class TestInfSup:
    """Tests for the inf-sup estimates of the Biot system."""

    def test_positive(self):
        beta = check_infsup(2, ParameterSet(lam=1.0, alpha=1.0, kappa=1.0))
        assert beta > 0.0

    def test_estimate_point(self):
        est = infsup_estimate(1, ParameterSet(lam=1e4, alpha=1e-4, kappa=1e-4))
        assert est.point == {"N": 1.0, "lambda": 1e4, "alpha": 1e-4, "kappa": 1e-4}
        assert est.upper >= est.beta > 0.0

    def test_lambda_robust(self):
        betas = [check_infsup(2, ParameterSet(lam=lam)) for lam in (1.0, 1e4, 1e8)]
        assert max(betas) / min(betas) <= 2.0

    def test_mixed_boundary(self):
        assert check_infsup(2, ParameterSet(lam=1e4), BoundaryMode.MIXED) > 0.0


class TestStability:
    """Tests for the elasticity stability constant."""

    def test_sampled_below_worst_case(self):
        est = check_elasticity_stability(2, samples=5)
        assert np.isfinite(est.worst_case)
        assert 0.0 < est.sampled <= est.worst_case * (1.0 + 1e-10)

    def test_mesh_robust(self):
        coarse = check_elasticity_stability(1, samples=1)
        fine = check_elasticity_stability(2, samples=1)
        assert max(coarse.worst_case, fine.worst_case) / min(coarse.worst_case, fine.worst_case) <= 5.0


class TestConditionChecks:
    """Tests for the Lanczos-based condition checks."""

    @pytest.mark.parametrize("lam", [1.0, 1e4, 1e12])
    def test_aux_preconditioner_is_exact(self, lam):
        assert aux_preconditioner_condition(2, lam, iters=30) <= 1.0 + 1e-6

    @pytest.mark.slow
    @pytest.mark.parametrize("lam", VerifyConfig().lambda_list)
    def test_aux_preconditioner_is_exact_on_default_sweep(self, lam):
        """Every lambda of the default suite meets 1 + 1e-6 on the condition mesh."""
        config = VerifyConfig()
        assert config.condition_n == 8
        k = aux_preconditioner_condition(config.condition_n, lam, iters=config.lanczos_iters)
        assert k <= 1.0 + 1e-6

    @pytest.mark.parametrize("lam", [1.0, 1e8])
    def test_stress_pair_bounded(self, lam):
        assert stress_pair_condition(2, lam, BoundaryMode.CLAMPED, iters=64) <= 10.0

    def test_mixed_stress_pair_bounded(self):
        assert stress_pair_condition(2, 1e8, BoundaryMode.MIXED, iters=64) <= 10.0


@pytest.mark.integration
class TestRunVerification:
    """End-to-end run of the suite on a reduced configuration."""

    def test_records(self):
        config = VerifyConfig(
            n=2,
            lambda_list=[1.0, 1e4, 1e8],
            infsup_n_list=[1, 2],
            infsup_lambda_list=[1.0, 1e8],
            infsup_alpha_list=[1.0],
            infsup_kappa_list=[1.0],
            stability_n_list=[1, 2],
            stability_samples=2,
            lanczos_iters=40,
            condition_n=2,
        )
        seen = []
        records = run_verification(config, progress=seen.append)
        checks = {r.check for r in records}
        assert seen[0] == "spectral_nonclamped"
        assert {
            "spectral_nonclamped_lower",
            "spectral_clamped_identity",
            "negative_control",
            "infsup_beta",
            "infsup_h_robust",
            "stability_h_robust",
            "condition_aux_exact",
            "condition_stress_clamped",
        } <= checks
        by_name = {r.check: r for r in records}
        assert by_name["negative_control"].passed
        assert by_name["spectral_clamped_lower"].passed
        assert all(r.passed for r in records if r.check == "condition_aux_exact")
        assert {r.point["N"] for r in records if r.check.startswith("condition_")} == {2}
