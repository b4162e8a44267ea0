import math

import mpmath as mp
import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

import oracles
from fieldqc.errors import DomainError, InputError, RegimeError
from fieldqc.homogenized import (Regime, build_model, decay_summary, green_phi, green_u,
                                 green_u_naive, ode_residual)

# frozen from tests/oracles.py at 60 digits
K_PLUS = 0.23758930965311136749
K_MINUS = 3.3589211541711660334
E_U = {0.5: 0.0099457190413182819, 1.0: 0.0053431618343864827,
       5.0: 0.00043219541684869688, 20.0: 3.0610071647933481e-6}


def test_aluminium_is_case1(al_model):
    assert al_model.regime is Regime.CASE1
    assert al_model.l0 > abs(al_model.l1) > 0


def test_roots_match_frozen_oracle(al_model):
    assert al_model.k_plus == pytest.approx(K_PLUS, rel=1e-13)
    assert al_model.k_minus == pytest.approx(K_MINUS, rel=1e-13)
    kp, km = oracles.roots(1 / 6, 0.1629, 0.9449)
    assert float(kp) == pytest.approx(K_PLUS, rel=1e-15)
    assert float(km) == pytest.approx(K_MINUS, rel=1e-15)


@pytest.mark.parametrize("r", sorted(E_U))
def test_green_u_matches_oracle(al_model, r):
    assert green_u(al_model, r) == pytest.approx(E_U[r], rel=1e-12)
    assert float(oracles.green_u(1 / 6, 0.1629, 0.9449, r)) == pytest.approx(E_U[r], rel=1e-15)


def test_green_u_factored_equals_naive(al_model):
    r = np.geomspace(1e-3, 50, 40)
    np.testing.assert_allclose(green_u(al_model, r), green_u_naive(al_model, r), rtol=1e-11)


@settings(max_examples=60, deadline=None)
@given(lam=st.floats(0.05, 2.0), alpha=st.floats(0.05, 2.0), gamma=st.floats(-3.0, 3.0))
def test_vieta_identities(lam, alpha, gamma):
    m = build_model(lam, alpha, gamma)
    if m.regime is Regime.CASE2:
        return
    kp2, km2 = m.kappa_plus**2, m.kappa_minus**2
    assert abs(kp2 * km2 - m.inv_l0_4) <= 1e-12 * m.inv_l0_4
    assert abs(kp2 + km2 + 2 * m.inv_l1_sq) <= 1e-12 * max(abs(m.inv_l1_sq), abs(kp2), abs(km2))


@settings(max_examples=40, deadline=None)
@given(lam=st.floats(0.05, 2.0), alpha=st.floats(0.05, 1.0), ratio=st.floats(1.01, 5.0),
       r=st.floats(0.01, 30.0))
def test_green_u_positive_in_case1(lam, alpha, ratio, r):
    gamma = ratio * 2 * alpha * math.sqrt(lam)
    m = build_model(lam, alpha, gamma)
    assert m.regime is Regime.CASE1
    assert green_u(m, r) > 0


@pytest.mark.parametrize("gamma, regime", [
    (0.9449, Regime.CASE1),
    (0.05, Regime.CASE3),
    (-0.9449, Regime.NON_INTEGRABLE),
])
def test_regime_classification(gamma, regime):
    assert build_model(1 / 6, 0.1629, gamma).regime is regime


def test_case2_values():
    m = build_model(1.0, 0.5, 1.0)
    assert m.regime is Regime.CASE2
    assert green_u(m, 1.0) == pytest.approx(1 / (8 * math.pi * math.e), rel=1e-14)
    assert green_phi(m, 1.0) == pytest.approx(-3 / (8 * math.pi * math.e), rel=1e-14)
    assert decay_summary(m).rate == pytest.approx(1.0, rel=1e-14)


@pytest.mark.parametrize("r", [0.5, 1.0, 5.0])
def test_case1_to_case2_continuity(r):
    # l0 = 1, l1 = 1 - 1e-6
    m = build_model(1.0, 0.5, 1.0 / (1 - 1e-6) ** 2)
    assert m.regime is Regime.CASE1
    case2 = math.exp(-r) / (8 * math.pi)
    assert green_u(m, r) == pytest.approx(case2, rel=1e-4)


def test_case3_is_real_and_decays():
    m = build_model(1 / 6, 0.1629, 0.05)
    r = np.array([1.0, 10.0, 40.0])
    vals = green_u(m, r)
    assert np.all(np.isfinite(vals))
    assert abs(vals[-1]) < abs(vals[0])
    np.testing.assert_allclose(vals, green_u_naive(m, r), rtol=1e-10)


def test_non_integrable_rejected():
    m = build_model(1 / 6, 0.1629, -1.0)
    with pytest.raises(RegimeError):
        green_u(m, 1.0)
    with pytest.raises(RegimeError):
        decay_summary(m)


def test_bad_inputs():
    with pytest.raises(InputError):
        build_model(0.0, 0.1, 0.1)
    with pytest.raises(InputError):
        build_model(1.0, 0.0, 0.1)
    m = build_model(1 / 6, 0.1629, 0.9449)
    with pytest.raises(DomainError):
        green_u(m, 0.0)
    with pytest.raises(DomainError):
        green_phi(m, -1.0)


@pytest.mark.parametrize("r", [1.0, 5.0, 20.0])
def test_ode_residual_second_order(al_model, r):
    res = [ode_residual(al_model, r, h) for h in (4e-3, 2e-3, 1e-3)]
    assert res[0] / res[1] == pytest.approx(4.0, rel=0.05)
    assert res[1] / res[2] == pytest.approx(4.0, rel=0.05)


def test_green_phi_from_green_u_by_fd(al_model):
    # E_phi = (lam/2 alpha)[E_u'' + (2/r) E_u' - (2/l1^2) E_u]
    m = al_model
    for r in (0.7, 3.0, 12.0):
        h = 1e-3
        f = [green_u(m, r + k * h) for k in (-1, 0, 1)]
        d1 = (f[2] - f[0]) / (2 * h)
        d2 = (f[2] - 2 * f[1] + f[0]) / h**2
        fd = m.lam / (2 * m.alpha) * (d2 + 2 * d1 / r - 2 * m.inv_l1_sq * f[1])
        assert green_phi(m, r) == pytest.approx(fd, rel=1e-4, abs=1e-9)


def test_green_phi_tail_matches_slow_root(al_model):
    # far from the source only the k+ exponential survives
    m = al_model
    r = 40.0
    kp, km = m.k_plus, m.k_minus
    c_plus = -m.lam * km**2 / (2 * m.alpha)
    tail = c_plus * math.exp(-kp * r) / (4 * math.pi * (km**2 - kp**2) * r)
    assert green_phi(m, r) == pytest.approx(tail, rel=1e-12)


def test_decay_summary(al_model):
    d = decay_summary(al_model)
    assert d.rate == pytest.approx(K_PLUS, rel=1e-13)
    assert d.length == pytest.approx(4.2089, abs=1e-4)
    assert "algebraic" in d.elastic_class


def test_mp_stencil_independent_of_precision(al_model):
    a = ode_residual(al_model, 5.0, 1e-3, dps=50)
    b = ode_residual(al_model, 5.0, 1e-3, dps=80)
    assert a == pytest.approx(b, rel=1e-8)
    assert mp.mp.dps == 15
