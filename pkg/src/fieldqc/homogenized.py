"""Homogenized corrector model and its radial Green's functions.

With constant coefficients the corrector fields obey

    lap phi + 2 alpha u + b_c = 0,     -lam lap u + 2 gamma u + 2 alpha phi = 0,

which reduces to ``(lap lap - 2/l1^2 lap + 1/l0^4) u = b`` with
``1/l1^2 = gamma/lam``, ``1/l0^4 = 4 alpha^2/lam`` and ``b = -2 alpha b_c/lam``.
The characteristic roots kappa_+- (Im >= 0) set the decay of E_u and E_phi.
"""

import cmath
import math
from dataclasses import dataclass
from enum import Enum

import mpmath
import numpy as np

from .errors import DomainError, InputError, RegimeError

CASE2_RTOL = 1e-12


class Regime(str, Enum):
    CASE1 = "Case1"
    CASE2 = "Case2"
    CASE3 = "Case3"
    NON_INTEGRABLE = "NonIntegrable"

    @property
    def integrable(self):
        return self is not Regime.NON_INTEGRABLE


@dataclass(frozen=True)
class HomogenizedModel:
    lam: float
    alpha: float
    gamma: float
    l0: float
    l1: complex
    kappa_plus: complex
    kappa_minus: complex
    regime: Regime
    k_plus: float = None
    k_minus: float = None

    @property
    def inv_l1_sq(self):
        return self.gamma / self.lam

    @property
    def inv_l0_4(self):
        return 4.0 * self.alpha**2 / self.lam

    @property
    def c_plus(self):
        return self.lam / (2 * self.alpha) * self.kappa_minus**2

    @property
    def c_minus(self):
        return self.lam / (2 * self.alpha) * self.kappa_plus**2

    def require_integrable(self):
        if not self.regime.integrable:
            raise RegimeError(
                "characteristic roots are real: Green's functions are not integrable")

    def as_dict(self):
        return {"regime": self.regime.value, "lambda": self.lam, "alpha": self.alpha,
                "gamma": self.gamma, "l0": self.l0,
                "l1": self.l1.real if abs(self.l1.imag) < 1e-300 else str(self.l1),
                "k_plus": self.k_plus, "k_minus": self.k_minus}


def _upper(z):
    """Square root with non-negative imaginary part."""
    s = cmath.sqrt(z)
    return -s if s.imag < 0 or (s.imag == 0 and s.real < 0) else s


def build_model(lam, alpha, gamma):
    """Classify the regime and compute l0, l1, kappa_+- (and k_+- in Cases 1-2)."""
    if not lam > 0:
        raise InputError("lambda must be positive")
    if alpha == 0:
        raise InputError("alpha must be nonzero")
    inv_l1_sq = gamma / lam
    inv_l0_4 = 4.0 * alpha**2 / lam
    l0 = inv_l0_4 ** -0.25
    l1 = cmath.sqrt(lam / gamma) if gamma != 0 else complex(math.inf)
    disc = gamma**2 - 4.0 * alpha**2 * lam
    l1_abs = abs(l1)

    if gamma > 0 and abs(l0 - l1_abs) <= CASE2_RTOL * l0:
        regime = Regime.CASE2
    elif gamma > 0 and disc > 0:
        regime = Regime.CASE1
    elif disc < 0:
        regime = Regime.CASE3
    else:
        regime = Regime.NON_INTEGRABLE

    if regime is Regime.CASE2:
        kp = km = 1j / l0
        k_plus = k_minus = 1.0 / l0
    else:
        root = cmath.sqrt(complex(inv_l1_sq**2 - inv_l0_4))
        kp = _upper(-inv_l1_sq + root)
        km = _upper(-inv_l1_sq - root)
        k_plus = k_minus = None
        if regime is Regime.CASE1:
            # cancellation-free forms of sqrt((gamma -+ sqrt(disc)) / lam)
            s = math.sqrt(disc)
            k_minus = math.sqrt((gamma + s) / lam)
            k_plus = math.sqrt(4.0 * alpha**2 / (gamma + s))
            kp, km = 1j * k_plus, 1j * k_minus
    return HomogenizedModel(lam=lam, alpha=alpha, gamma=gamma, l0=l0, l1=l1,
                            kappa_plus=kp, kappa_minus=km, regime=regime,
                            k_plus=k_plus, k_minus=k_minus)


def _check_r(r):
    r = np.asarray(r, dtype=float)
    if np.any(r <= 0):
        raise DomainError("radius must be positive")
    return r


def _sinc(z):
    z = np.asarray(z, dtype=complex)
    small = np.abs(z) < 1e-4
    zs = np.where(small, 1.0, z)
    return np.where(small, 1.0 - z * z / 6.0 + z**4 / 120.0, np.sin(zs) / zs)


def _real(values, what):
    values = np.asarray(values)
    if np.any(np.abs(values.imag) > 1e-12 * np.maximum(np.abs(values), 1e-300)):
        raise ArithmeticError(f"{what} has a non-negligible imaginary part")
    return values.real


def _eu_complex(model, r):
    # [e^{i k+ r} - e^{i k- r}] / (4 pi (k+^2 - k-^2) r), rewritten with the mean
    # and half-difference of the roots so that k+ -> k- is free of cancellation
    kbar = 0.5 * (model.kappa_plus + model.kappa_minus)
    half = 0.5 * (model.kappa_plus - model.kappa_minus)
    return 1j * np.exp(1j * kbar * r) / (8 * np.pi * kbar) * _sinc(half * r)


def green_u(model, r):
    """Fundamental solution E_u of the fourth-order operator at radius r."""
    model.require_integrable()
    r = _check_r(r)
    if model.regime is Regime.CASE2:
        return model.l0 / (8 * np.pi) * np.exp(-r / model.l0)
    return _real(_eu_complex(model, r), "E_u")


def green_phi(model, r):
    """Potential kernel E_phi = (lam/2 alpha)[lap E_u - (2/l1^2) E_u]."""
    model.require_integrable()
    r = _check_r(r)
    if model.regime is Regime.CASE2:
        l0 = model.l0
        return -model.lam / (16 * np.pi * model.alpha) * (1 / l0 + 2 / r) * np.exp(-r / l0)
    # C+ e+ - C- e- = C+ (e+ - e-) - (lam/2 alpha)(k+^2 - k-^2) e-
    val = (model.c_plus * _eu_complex(model, r)
           - model.lam / (2 * model.alpha) * np.exp(1j * model.kappa_minus * r) / (4 * np.pi * r))
    return _real(val, "E_phi")


def green_u_naive(model, r):
    """Direct two-exponential formula; used as an independent check."""
    kp, km = model.kappa_plus, model.kappa_minus
    r = _check_r(r)
    val = (np.exp(1j * kp * r) - np.exp(1j * km * r)) / (4 * np.pi * (kp**2 - km**2) * r)
    return val.real


def _mp_green_u(model, dps):
    """High-precision r -> r E_u(r), with roots recomputed from (lam, alpha, gamma)."""
    with mpmath.workdps(dps):
        lam, alpha, gamma = (mpmath.mpf(x) for x in (model.lam, model.alpha, model.gamma))
        inv_l1_sq = gamma / lam
        inv_l0_4 = 4 * alpha**2 / lam
        if model.regime is Regime.CASE2:
            l0 = mpmath.mpf(model.l0)
            return lambda r: l0 / (8 * mpmath.pi) * mpmath.exp(-r / l0) * r, inv_l1_sq, inv_l0_4
        root = mpmath.sqrt(mpmath.mpc(inv_l1_sq**2 - inv_l0_4))
        roots = []
        for sq in (-inv_l1_sq + root, -inv_l1_sq - root):
            s = mpmath.sqrt(sq)
            roots.append(-s if mpmath.im(s) < 0 else s)
        kp, km = roots

    def ru(r):
        return (mpmath.exp(1j * kp * r) - mpmath.exp(1j * km * r)) / (4 * mpmath.pi * (kp**2 - km**2))
    return ru, inv_l1_sq, inv_l0_4


def ode_residual(model, r, h, dps=50):
    """Central-difference residual of (d^4 - 2/l1^2 d^2 + 1/l0^4)(r E_u) at r.

    Stencil values are computed with ``dps`` decimal digits so the result is
    truncation-limited, O(h^2).
    """
    model.require_integrable()
    if not r > 4 * h > 0:
        raise DomainError("ode_residual requires r > 4h > 0")
    ru, inv_l1_sq, inv_l0_4 = _mp_green_u(model, dps)
    with mpmath.workdps(dps):
        r, h = mpmath.mpf(r), mpmath.mpf(h)
        v = [ru(r + j * h) for j in (-2, -1, 0, 1, 2)]
        d4 = (v[0] - 4 * v[1] + 6 * v[2] - 4 * v[3] + v[4]) / h**4
        d2 = (v[1] - 2 * v[2] + v[3]) / h**2
        res = d4 - 2 * inv_l1_sq * d2 + inv_l0_4 * v[2]
        return float(abs(res))


@dataclass(frozen=True)
class DecaySummary:
    rate: float
    length: float
    electronic_class: str = "exponential"
    elastic_class: str = "algebraic |x|^-2"


def decay_summary(model):
    """Slowest exponential decay rate min Im(kappa_+-) of u and phi."""
    model.require_integrable()
    rate = min(model.kappa_plus.imag, model.kappa_minus.imag)
    return DecaySummary(rate=rate, length=1.0 / rate)
