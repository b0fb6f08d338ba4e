"""Tests for the identity checks, report assembly and gating."""

import json

import numpy as np
import pytest

from serrin import (
    BoundaryData,
    DomainSpec,
    FourierCurve,
    InconsistentModelError,
    InvalidInputError,
    ModelParams,
    ScalarField,
    UnsupportedRegimeError,
    boundary_data_of,
    build_grid,
    integrate_area,
    model_u,
    refined_k,
    solve_dirichlet,
)
from serrin.verify import (
    CSV_COLUMNS,
    TOLERANCES,
    area_bound_check,
    boundary_distance,
    degenerate_expansion_check,
    divergence_identity_residual,
    evaluate_checks,
    fit_from_field,
    full_report,
    gradient_bound_margin,
    measured_boundary_data,
    neumann_constancy,
    pohozaev_residual,
    refined_pohozaev_check,
)

INT4U_A = 1.6783766859991517
WAVY_LEN = 6.4225893330511004


def solved(params, ns, ntheta):
    spec = DomainSpec.circles(params.r_i, params.r_o)
    grid = build_grid(spec, ns, ntheta)
    data = boundary_data_of(params)
    field, _ = solve_dirichlet(grid, -2.0, data.a, data.b)
    return grid, field, data


class TestNeumannStats:
    def test_hand_example(self):
        st = neumann_constancy(np.array([0.0, 1.0]), np.array([1.0, 1.0]))
        assert st.mean == pytest.approx(0.5)
        assert st.sd == pytest.approx(0.5)
        assert st.max_dev == pytest.approx(0.5)

    def test_weights_shape(self):
        with pytest.raises(InvalidInputError):
            neumann_constancy(np.array([1.0, 2.0]), np.array([1.0]))

    def test_constant_trace(self):
        st = neumann_constancy(np.full(8, 3.0))
        assert st.sd == 0.0
        assert st.mean == pytest.approx(3.0)


class TestMeasuredData:
    def test_recovers_boundary_data(self, model_a):
        grid, field, data = solved(model_a, 65, 64)
        md = measured_boundary_data(grid, field)
        assert md.a == pytest.approx(data.a, abs=1e-12)
        assert md.b == pytest.approx(data.b, abs=1e-12)
        assert md.alpha == pytest.approx(data.alpha, abs=1e-3)
        assert md.beta == pytest.approx(data.beta, abs=1e-3)

    def test_fit_from_field(self, model_a):
        grid, field, _ = solved(model_a, 65, 64)
        md, fitted = fit_from_field(grid, field)
        assert fitted.M == pytest.approx(model_a.M, rel=1e-3)
        assert fitted.r_i == pytest.approx(model_a.r_i, rel=1e-3)


class TestPohozaev:
    @pytest.mark.parametrize("key", ["a", "b", "c"])
    def test_small_on_models(self, key, model_a, model_b, model_c):
        p = {"a": model_a, "b": model_b, "c": model_c}[key]
        grid, field, data = solved(p, 129, 128)
        assert abs(pohozaev_residual(grid, field, data)) <= 5e-3

    def test_weighted_integral_value(self, model_a):
        grid, field, _ = solved(model_a, 129, 128)
        val = integrate_area(grid, 4.0 * field.values)
        assert val == pytest.approx(INT4U_A, abs=5e-3)

    def test_measured_data_variant(self, model_a):
        grid, field, _ = solved(model_a, 65, 64)
        assert abs(pohozaev_residual(grid, field)) <= 5e-3


class TestGradientBound:
    def test_margin_small_on_model(self, model_a):
        grid, field, _ = solved(model_a, 65, 64)
        margin, at = gradient_bound_margin(grid, field, model_a)
        assert margin <= 5e-3
        r = np.hypot(*at)
        assert model_a.r_i - 1e-9 <= r <= model_a.r_o + 1e-9

    def test_margin_shrinks_with_resolution(self, model_a):
        vals = []
        for n in (33, 65):
            grid, field, _ = solved(model_a, n, n)
            vals.append(abs(gradient_bound_margin(grid, field, model_a)[0]))
        assert vals[1] < vals[0]

    def test_out_of_range_field_rejected(self, model_a):
        grid, field, _ = solved(model_a, 33, 32)
        shifted = ScalarField(grid=grid, values=field.values + 1.0)
        with pytest.raises(InconsistentModelError):
            gradient_bound_margin(grid, shifted, model_a)


class TestAreaBound:
    def test_zero_on_model_circles(self, model_a):
        spec = DomainSpec.circles(model_a.r_i, model_a.r_o)
        m_in, m_out = area_bound_check(spec, model_a)
        assert abs(m_in) < 1e-12
        assert abs(m_out) < 1e-12

    def test_wavy_inner_margin(self, model_a):
        spec = DomainSpec(
            inner=FourierCurve(c0=1.0, cos_coeffs=(0.0, 0.0, 0.1)),
            outer=FourierCurve(c0=2.0),
        )
        m_in, m_out = area_bound_check(spec, model_a)
        assert m_in == pytest.approx(WAVY_LEN - 2 * np.pi, rel=1e-10)
        assert m_out == pytest.approx(4 * np.pi - 3 * np.pi, rel=1e-12)


class TestDivergenceIdentity:
    def test_small_on_increasing_model(self, model_a):
        grid, field, _ = solved(model_a, 97, 96)
        res = divergence_identity_residual(grid, field, model_a)
        assert abs(res.residual) <= 1e-2
        assert res.inner_term == pytest.approx(2 * np.pi, abs=1e-3)
        assert res.outer_term == pytest.approx(2 * np.pi, abs=1e-3)
        assert not res.outer_limit_used

    def test_rejects_decreasing(self, model_c):
        grid, field, _ = solved(model_c, 33, 32)
        with pytest.raises(UnsupportedRegimeError):
            divergence_identity_residual(grid, field, model_c)

    def test_degenerate_outer_boundary_stable(self):
        # outer slope ~ 4e-6: the direct quotient is hopeless there, the
        # boundary term must switch to its analytic limit
        p = ModelParams(L=0.0, M=4.0, r_i=1.0, r_o=2.0 * (1 - 1e-6))
        grid, field, _ = solved(p, 65, 64)
        residuals = []
        for cutoff in (1e-3, 1e-4, 1e-5):
            res = divergence_identity_residual(grid, field, p, cutoff=cutoff)
            residuals.append(res.residual)
            assert res.outer_limit_used
            assert res.excluded_nodes == 64
        assert max(residuals) - min(residuals) <= 1e-9
        assert abs(residuals[0]) <= 0.05


class TestRefinedIdentity:
    @pytest.mark.parametrize("key", ["b", "c"])
    def test_small_on_decreasing_models(self, key, model_b, model_c):
        p = {"b": model_b, "c": model_c}[key]
        grid, field, _ = solved(p, 129, 128)
        res = refined_pohozaev_check(grid, field, p)
        assert abs(res.identity_residual) <= 2e-2
        assert res.case1_margin >= -2e-2
        assert res.k == pytest.approx(refined_k(p), rel=1e-13)

    def test_free_constant_shift(self, model_c):
        # the identity holds for any k; a unit shift must stay within gate
        grid, field, _ = solved(model_c, 129, 128)
        res = refined_pohozaev_check(grid, field, model_c,
                                     k=refined_k(model_c) + 1.0)
        assert abs(res.identity_residual) <= 2e-2

    def test_degenerate_inner_row_excluded(self, model_d):
        grid, field, _ = solved(model_d, 129, 128)
        res = refined_pohozaev_check(grid, field, model_d)
        assert abs(res.identity_residual) <= 2e-2
        assert res.excluded_nodes == 128

    def test_rejects_increasing(self, model_a):
        grid, field, _ = solved(model_a, 33, 32)
        with pytest.raises(UnsupportedRegimeError):
            refined_pohozaev_check(grid, field, model_a)


class TestBoundaryDistance:
    def test_circle_distance_is_radial(self):
        grid = build_grid(DomainSpec.circles(1.0, 2.0), 17, 32)
        d = boundary_distance(grid, "inner")
        assert d.shape == (17, 32)
        assert d == pytest.approx(grid.r - 1.0, abs=1e-6)

    def test_row_selection(self):
        grid = build_grid(DomainSpec.circles(1.0, 2.0), 17, 32)
        d = boundary_distance(grid, "outer", rows=[16])
        assert d.shape == (1, 32)
        assert np.max(np.abs(d)) < 1e-6


class TestExpansion:
    def test_synthetic_quadratic(self):
        grid = build_grid(DomainSpec.circles(1.0, 2.0), 65, 64)
        dist = boundary_distance(grid, "inner")
        field = ScalarField(grid=grid, values=5.0 - dist**2)
        res = degenerate_expansion_check(grid, field)
        assert res is not None
        assert res.boundary == "inner"
        assert res.coefficient == pytest.approx(-1.0, abs=1e-12)
        assert res.n_nodes > 0

    def test_no_degenerate_boundary(self, model_a):
        grid, field, _ = solved(model_a, 33, 32)
        assert degenerate_expansion_check(grid, field) is None

    def test_solved_degenerate_model(self, model_d):
        grid, field, _ = solved(model_d, 129, 128)
        res = degenerate_expansion_check(grid, field)
        assert res is not None
        assert res.boundary == "inner"
        assert res.coefficient == pytest.approx(-1.0, abs=0.15)
        assert abs(res.neumann_mean) < 1e-3


class TestFullReport:
    def test_increasing_model_all_pass(self, model_a):
        spec = DomainSpec.circles(model_a.r_i, model_a.r_o)
        rep = full_report(spec, boundary_data_of(model_a), 65, 64)
        assert rep.case == "Increasing"
        assert not rep.diagnostic_only
        assert rep.divergence is not None
        assert rep.refined is None
        assert rep.expansion is None
        checks, ok = evaluate_checks(rep)
        assert ok
        names = {c.name for c in checks}
        assert "div_identity_res" in names
        assert "refined_identity_res" not in names

    def test_decreasing_model_report(self, model_c):
        spec = DomainSpec.circles(model_c.r_i, model_c.r_o)
        rep = full_report(spec, boundary_data_of(model_c), 65, 64)
        assert rep.refined is not None
        assert rep.divergence is None
        checks, ok = evaluate_checks(rep)
        assert ok

    def test_json_round_trip(self, model_a):
        spec = DomainSpec.circles(model_a.r_i, model_a.r_o)
        rep = full_report(spec, boundary_data_of(model_a), 49, 48)
        tree = rep.to_dict()
        text = json.dumps(tree, sort_keys=True)
        back = json.loads(text)
        assert back["case"] == "Increasing"
        assert "divergence_identity" in back
        assert "refined_identity" not in back
        assert back["resolution"] == {"ns": 49, "ntheta": 48}

    def test_csv_row_shape(self, model_a):
        spec = DomainSpec.circles(model_a.r_i, model_a.r_o)
        rep = full_report(spec, boundary_data_of(model_a), 49, 48)
        row = rep.csv_row(eps=0.25)
        assert len(row) == len(CSV_COLUMNS) == 15
        assert row[0] == "Increasing"
        assert row[3] == "0.25"
        assert row[-1] == ""

    def test_unproven_regime_note(self):
        data = BoundaryData(a=1.0, b=0.0, alpha=0.5, beta=-0.5)
        spec = DomainSpec.circles(1.0, 2.0)
        rep = full_report(spec, data, 33, 32)
        assert "unproven" in rep.regime_note
        assert rep.model is None
        assert rep.grad_margin is None

    def test_perturbed_domain_goes_diagnostic(self, model_a, data_a):
        spec = DomainSpec(
            inner=FourierCurve(c0=1.0),
            outer=FourierCurve(c0=1.5, cos_coeffs=(0.0, 0.1)),
        )
        rep = full_report(spec, data_a, 65, 64)
        assert rep.diagnostic_only
        checks, ok = evaluate_checks(rep)
        assert not ok
        checks, ok = evaluate_checks(rep, expect_asymmetric=True)
        assert ok
        sd_checks = [c for c in checks if c.name.startswith("neumann_sd")]
        assert any(c.waived for c in sd_checks)
        assert all(("PASS" in c.describe() or "DIAG" in c.describe())
                   for c in checks)

    def test_tolerance_table_keys(self):
        assert set(TOLERANCES) >= {
            "neumann_sd", "pohozaev", "grad_margin", "area_margin",
            "div_identity", "refined_identity", "case1_margin", "expansion",
        }
