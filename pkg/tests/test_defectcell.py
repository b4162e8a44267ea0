import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

import oracles
from fieldqc import defectcell as dc
from fieldqc.errors import DomainError, InputError, RegimeError
from fieldqc.homogenized import build_model

R0_CORE = 3.75
# frozen from tests/oracles.py (raw basis, adaptive precision), rho = 1
E_ES = {11.25: 86.230044922777117, 22.5: 82.776977613172335}
E_INF = 82.766061331347446


def solve(model, R0, rho=1.0, r0=R0_CORE):
    return dc.solve_coefficients(model, dc.SphericalDefect(rho, r0, R0))


def test_regularity_row_pattern(al_model):
    A, rhs, cond = dc.assemble_system(al_model, dc.SphericalDefect(1.0, R0_CORE, 22.5))
    np.testing.assert_array_equal(A[0], [1, 0, 1, 0, 0, 0, 0, 0])
    np.testing.assert_array_equal(A[1], [0, 1, 0, 1, 0, 0, 0, 0])
    assert np.all(np.isfinite(A)) and cond < 1e12


def test_zero_source_zero_rhs(al_model):
    _, rhs, _ = dc.assemble_system(al_model, dc.SphericalDefect(0.0, R0_CORE, 22.5))
    assert not rhs.any()
    sol = solve(al_model, 22.5, rho=0.0)
    assert not sol.scaled.any()
    r = np.linspace(0, 22.5, 7)
    assert not dc.field_u(sol, r).any() and not dc.field_phi(sol, r).any()
    assert dc.energy_es(sol) == 0.0
    assert dc.energy_es_infinite(al_model, dc.SphericalDefect(0.0, R0_CORE, 22.5)) == 0.0


@pytest.mark.parametrize("R0", sorted(E_ES))
def test_energy_matches_raw_basis_oracle(al_model, R0):
    assert dc.energy_es(solve(al_model, R0)) == pytest.approx(E_ES[R0], rel=1e-12)


def test_coefficients_match_oracle(al_model):
    sol = solve(al_model, 22.5)
    ref, _ = oracles.defect_solution(1 / 6, 0.1629, 0.9449, 1.0, R0_CORE, 22.5)
    np.testing.assert_allclose(sol.coefficients(), [float(c) for c in ref], rtol=1e-10)


def test_infinite_energy(al_model):
    e = dc.energy_es_infinite(al_model, dc.SphericalDefect(1.0, R0_CORE, 22.5))
    assert e == pytest.approx(E_INF, rel=1e-12)
    big = solve(al_model, 60 / al_model.k_plus)
    assert dc.energy_es(big) == pytest.approx(e, rel=1e-8)


@pytest.mark.parametrize("factor", [40, 60])
def test_large_cell_recovers_infinite_constants(al_model, factor):
    d = dc.SphericalDefect(1.0, R0_CORE, factor / al_model.k_plus)
    sol = dc.solve_coefficients(al_model, d)
    ref = dc.infinite_coefficients(al_model, d)
    np.testing.assert_allclose(sol.scaled[[0, 1, 6, 7]], ref[[0, 1, 6, 7]], rtol=1e-8)
    assert np.all(np.abs(sol.scaled[4:6]) < 1e-10)
    raw = dc.infinite_coefficients(al_model, d, scaled=False)
    np.testing.assert_allclose(sol.coefficients()[:2], raw[:2], rtol=1e-6)


def test_coefficients_approach_limit_monotonically(al_model):
    ref = dc.infinite_coefficients(al_model, dc.SphericalDefect(1.0, R0_CORE, 100.0))
    radii = np.linspace(5 / al_model.k_plus, 30 / al_model.k_plus, 12)
    gaps = [abs(solve(al_model, R).scaled[0] - ref[0]) for R in radii]
    slack = 1e-14 * abs(ref[0])  # gaps bottom out at rounding level
    assert all(b <= a + slack for a, b in zip(gaps, gaps[1:]))
    assert gaps[-1] < 1e-3 * gaps[0]


def test_invariants_hold(al_model):
    sol = solve(al_model, 15.0)
    assert sol.diagnostics["worst"] < 1e-8
    assert abs(float(dc.field_u(sol, 15.0))) < 1e-12
    assert sol.varsigma == pytest.approx(float(dc.field_phi(sol, 15.0)))


@settings(max_examples=25, deadline=None)
@given(rho=st.floats(0.1, 50.0), R0=st.floats(4.5, 80.0))
def test_linear_in_rho_quadratic_energy(rho, R0):
    m = build_model(1 / 6, 0.1629, 0.9449)
    one, two = solve(m, R0, rho=rho), solve(m, R0, rho=2 * rho)
    np.testing.assert_allclose(two.scaled, 2 * one.scaled, rtol=1e-12, atol=1e-300)
    assert dc.energy_es(two) == pytest.approx(4 * dc.energy_es(one), rel=1e-12)


def test_series_limit_at_origin(al_model):
    sol = solve(al_model, 22.5)
    tiny = 0.5e-6 * R0_CORE
    near = 2e-4
    assert float(dc.field_u(sol, tiny)) == pytest.approx(float(dc.field_u(sol, near)), rel=1e-6)
    assert float(dc.field_phi(sol, tiny)) == pytest.approx(float(dc.field_phi(sol, near)), rel=1e-6)
    m = al_model
    c = sol.coefficients()
    u0 = 1 / m.inv_l0_4 + 2 * (c[0] * m.k_plus + c[1] * m.k_minus)
    assert float(dc.field_u(sol, 0.0)) == pytest.approx(u0, rel=1e-12)


def test_deep_interior_tends_to_particular_solution(al_model):
    r0 = 100 / al_model.k_plus
    sol = solve(al_model, r0 + 60 / al_model.k_plus, r0=r0)
    assert float(dc.field_u(sol, r0 / 2)) == pytest.approx(1 / al_model.inv_l0_4, rel=1e-2)


def test_closed_form_equals_quadrature(al_model):
    for r0, R0 in [(2.0, 5.0), (3.75, 22.5), (6.0, 40.0)]:
        sol = solve(al_model, R0, r0=r0)
        assert dc.energy_es(sol, check=False) == pytest.approx(dc.energy_es_quadrature(sol), rel=1e-8)


def test_sweep_table(al_model):
    radii = dc.default_radii(R0_CORE, 7.5)
    sw = dc.cell_size_sweep(al_model, 1.0, R0_CORE, radii, a0=7.5)
    assert len(list(sw.rows())) == 40 and not sw.errors
    tail = sw.rel_error[sw.R0 > 2 * R0_CORE]
    assert np.all(np.diff(tail) <= 1e-10)
    assert sw.R0_at_threshold is not None


def test_single_entry_sweep(al_model):
    sw = dc.cell_size_sweep(al_model, 1.0, R0_CORE, [22.5], a0=7.5)
    assert len(list(sw.rows())) == 1


def test_sweep_rejects_bad_lists(al_model):
    with pytest.raises(InputError):
        dc.cell_size_sweep(al_model, 1.0, R0_CORE, [10.0, 8.0])
    with pytest.raises(InputError):
        dc.cell_size_sweep(al_model, 1.0, R0_CORE, [3.0, 8.0])


def test_relative_error_is_rho_independent(al_model):
    a = dc.relative_error(al_model, 1.0, R0_CORE, 18.0)
    b = dc.relative_error(al_model, 7.3, R0_CORE, 18.0)
    assert a == pytest.approx(b, rel=1e-12)


def test_error_decays_like_slow_exponential(al_model):
    r1, r2 = 20.0, 30.0
    e1 = dc.relative_error(al_model, 1.0, R0_CORE, r1)
    e2 = dc.relative_error(al_model, 1.0, R0_CORE, r2)
    rate = math.log(e1 / e2) / (r2 - r1)
    assert rate == pytest.approx(2 * al_model.k_plus, rel=0.05)


def test_errors(al_model):
    with pytest.raises(InputError):
        dc.SphericalDefect(1.0, 5.0, 4.0)
    with pytest.raises(InputError):
        dc.SphericalDefect(math.nan, 1.0, 4.0)
    sol = solve(al_model, 10.0)
    with pytest.raises(DomainError):
        dc.field_u(sol, 10.5)
    with pytest.raises(DomainError):
        dc.field_phi(sol, -0.1)
    with pytest.raises(RegimeError):
        dc.assemble_system(build_model(1 / 6, 0.1629, 0.05), dc.SphericalDefect(1.0, 1.0, 4.0))


def test_b_c_conversion(al_model):
    d = dc.SphericalDefect(2.0, 1.0, 3.0)
    assert d.b_c(al_model) == pytest.approx(-al_model.lam * 2.0 / (2 * al_model.alpha))
