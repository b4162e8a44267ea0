"""Spherical defect in a finite ball: closed-form radial solution and energy.

The source ``b`` equals ``rho`` for r <= r0 and vanishes outside.  Writing
``v = r u``, the radial equation ``v'''' - (2/l1^2) v'' + v/l0^4 = r b`` has

    v = rho l0^4 r + C1 e^{k+ r} + C2 e^{k- r} + C3 e^{-k+ r} + C4 e^{-k- r}   (r <= r0)
    v = C5 e^{k+ r} + C6 e^{k- r} + C7 e^{-k+ r} + C8 e^{-k- r}              (r >= r0)

The eight constants follow from regularity at the origin, C^3 matching of v
at r0, u(R0) = 0 and zero flux through the sphere r = R0.

Internally each exponential is carried as ``c_j exp(s_j k_j r + o_j)`` with
offsets chosen so every basis function is at most 1 on its own region.  The
offsets for C1/C3 (and C2/C4) coincide, so the regularity rows keep their
plain ``[1, 0, 1, 0, ...]`` form.
"""

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sl
from scipy import integrate, optimize

from .errors import (ConsistencyError, DegenerateGeometryError, DomainError,
                     FieldQCError, IllConditionedError, InputError, RegimeError)
from .homogenized import Regime

SERIES_FRACTION = 1e-6
INVARIANT_TOL = 1e-6


@dataclass(frozen=True)
class SphericalDefect:
    rho: float
    r0: float
    R0: float

    def __post_init__(self):
        if not 0 < self.r0 < self.R0:
            raise InputError("need 0 < r0 < R0")
        if not math.isfinite(self.rho):
            raise InputError("rho must be finite")

    def b_c(self, model):
        """Physical charge perturbation b_c = -lam rho / (2 alpha) inside the core."""
        return -model.lam * self.rho / (2 * model.alpha)

    def with_R0(self, R0):
        return SphericalDefect(self.rho, self.r0, R0)


def _require_case1(model):
    if model.regime is not Regime.CASE1:
        raise RegimeError(f"finite-cell solution needs Case 1 (l0 > l1 > 0); got {model.regime.value}")


def _basis(model, defect):
    kp, km = model.k_plus, model.k_minus
    r0, R0 = defect.r0, defect.R0
    k = np.array([kp, km, kp, km, kp, km, kp, km])
    sign = np.array([1, 1, -1, -1, 1, 1, -1, -1], dtype=float)
    offset = np.array([-kp * r0, -km * r0, -kp * r0, -km * r0,
                       -kp * R0, -km * R0, kp * r0, km * r0])
    return sign * k, offset


def _rows(rate, offset, r, m, cols):
    """Row of d^m/dr^m of the scaled basis functions ``cols`` at r."""
    return rate[cols] ** m * np.exp(rate[cols] * r + offset[cols])


def assemble_system(model, defect):
    """Equilibrated 8x8 matrix, right-hand side and 2-norm condition number."""
    _require_case1(model)
    rate, off = _basis(model, defect)
    inner, outer = np.arange(4), np.arange(4, 8)
    r0, R0, rho = defect.r0, defect.R0, defect.rho
    l0_4 = 1.0 / model.inv_l0_4
    c = 2.0 * model.inv_l1_sq

    A = np.zeros((8, 8))
    rhs = np.zeros(8)
    A[0, [0, 2]] = 1.0
    A[1, [1, 3]] = 1.0
    for m in range(4):
        A[2 + m, inner] = _rows(rate, off, r0, m, inner)
        A[2 + m, outer] = -_rows(rate, off, r0, m, outer)
    A[6, outer] = _rows(rate, off, R0, 0, outer)
    A[7, outer] = (R0 * _rows(rate, off, R0, 3, outer) - _rows(rate, off, R0, 2, outer)
                   - c * R0 * _rows(rate, off, R0, 1, outer) + c * _rows(rate, off, R0, 0, outer))
    rhs[2] = -rho * r0 * l0_4
    rhs[3] = -rho * l0_4

    scale = np.abs(A).max(axis=1)
    A /= scale[:, None]
    rhs /= scale
    return A, rhs, float(np.linalg.cond(A))


@dataclass(frozen=True)
class RadialDefectSolution:
    model: object
    defect: SphericalDefect
    scaled: np.ndarray
    condition: float
    residual: float
    diagnostics: dict = field(default_factory=dict)

    @property
    def _rate_offset(self):
        return _basis(self.model, self.defect)

    def coefficients(self):
        """Unscaled C1..C8 (entries may overflow for very large k r)."""
        _, off = self._rate_offset
        with np.errstate(over="ignore"):
            return self.scaled * np.exp(off)

    @property
    def varsigma(self):
        """Boundary value of the potential, phi(R0)."""
        return float(field_phi(self, self.defect.R0))

    def _v(self, r, m):
        rate, off = self._rate_offset
        r = np.asarray(r, dtype=float)
        r0 = self.defect.r0
        # each branch is evaluated on its own side of r0 so nothing overflows
        ri = np.minimum(r, r0)[..., None]
        ro = np.maximum(r, r0)[..., None]
        inner = (self.scaled[:4] * rate[:4]**m * np.exp(rate[:4] * ri + off[:4])).sum(-1)
        outer = (self.scaled[4:] * rate[4:]**m * np.exp(rate[4:] * ro + off[4:])).sum(-1)
        l0_4 = 1.0 / self.model.inv_l0_4
        part = self.defect.rho * l0_4 * (r if m == 0 else (1.0 if m == 1 else 0.0))
        return np.where(r <= self.defect.r0, inner + part, outer)

    def ru(self, r, m=0):
        """m-th derivative of r u(r)."""
        return self._v(r, m)

    def rphi(self, r, m=0):
        """m-th derivative of r phi(r) = (lam/2 alpha)(ru)'' - (gamma/alpha) ru."""
        mod = self.model
        return mod.lam / (2 * mod.alpha) * self._v(r, m + 2) - mod.gamma / mod.alpha * self._v(r, m)


def _check_range(sol, r):
    r = np.asarray(r, dtype=float)
    if np.any(r < 0) or np.any(r > sol.defect.R0 * (1 + 1e-14)):
        raise DomainError("r must lie in [0, R0]")
    return r


def _divide_by_r(sol, r, g):
    # g(r) = r f(r) is odd; near 0 use f ~ g'(0) + g'''(0) r^2 / 6
    small = r < SERIES_FRACTION * sol.defect.r0
    safe = np.where(small, 1.0, r)
    series = g(np.zeros_like(r), 1) + g(np.zeros_like(r), 3) * r * r / 6.0
    return np.where(small, series, g(r, 0) / safe)


def field_u(sol, r):
    r = _check_range(sol, r)
    return _divide_by_r(sol, r, sol.ru)


def field_phi(sol, r):
    r = _check_range(sol, r)
    return _divide_by_r(sol, r, sol.rphi)


def _core_factor(k, r0):
    """exp(-k r0) [k r0 cosh(k r0) - sinh(k r0)], without overflow."""
    x = k * r0
    if x < 1e-2:
        return math.exp(-x) * (x**3 / 3 + x**5 / 30 + x**7 / 840)
    e = math.exp(-2 * x)
    return 0.5 * (x * (1 + e) + math.expm1(-2 * x))


def _energy_closed(model, rho, r0, c1_scaled, c2_scaled):
    lam, alpha, gamma = model.lam, model.alpha, model.gamma
    kp, km = model.k_plus, model.k_minus
    cp = -lam * km**2 / (2 * alpha)
    cm = -lam * kp**2 / (2 * alpha)
    core = -math.pi * gamma * lam * rho * r0**3 / (3 * alpha**3)
    core += cp * c1_scaled * 8 * math.pi * _core_factor(kp, r0) / kp**2
    core += cm * c2_scaled * 8 * math.pi * _core_factor(km, r0) / km**2
    return -lam * rho / (4 * alpha) * core


def _flux_identity(sol):
    """Boundary flux term, volume term of the divergence identity, and their
    sum relative to the source integral."""
    d, mod = sol.defect, sol.model
    R = d.R0
    v = [float(sol.ru(R, m)) for m in range(4)]
    c = 2 * mod.inv_l1_sq
    # (lap u)' - c u' on r = R, times the sphere area
    boundary = 4 * math.pi * (R * v[3] - v[2] - c * (R * v[1] - v[0]))
    f = lambda r: 4 * math.pi * r * float(sol.ru(r))
    vol_u = sum(integrate.quad(f, a, b, epsabs=0, epsrel=1e-13, limit=200)[0]
                for a, b in ((0, d.r0), (d.r0, R)))
    source = d.rho * 4 * math.pi * d.r0**3 / 3
    total = boundary + mod.inv_l0_4 * vol_u - source
    return boundary, mod.inv_l0_4 * vol_u - source, abs(total) / max(abs(source), 1e-300)


def _verify(sol):
    d = sol.defect
    diag = {}
    s = sol.scaled
    diag["evenness"] = max(abs(s[0] + s[2]), abs(s[1] + s[3])) / max(np.abs(s).max(), 1e-300)
    umax = max(abs(float(field_u(sol, d.r0))), abs(float(field_u(sol, 0.0))), 1e-300)
    diag["boundary_u"] = abs(float(field_u(sol, d.R0))) / umax
    cont = []
    rate, off = sol._rate_offset
    l0_4 = 1.0 / sol.model.inv_l0_4
    for m in range(4):
        ti = s[:4] * rate[:4] ** m * np.exp(rate[:4] * d.r0 + off[:4])
        to = s[4:] * rate[4:] ** m * np.exp(rate[4:] * d.r0 + off[4:])
        part = d.rho * l0_4 * (d.r0 if m == 0 else (1.0 if m == 1 else 0.0))
        mag = max(np.abs(ti).max(), np.abs(to).max(), abs(part), 1e-300)
        cont.append(abs(ti.sum() + part - to.sum()) / mag)
    diag["continuity"] = cont
    diag["flux"] = _flux_identity(sol)[2] if d.rho != 0 else 0.0
    worst = max(diag["evenness"], diag["boundary_u"], max(cont), diag["flux"])
    diag["worst"] = worst
    return diag


def solve_coefficients(model, defect, verify=True):
    """Solve the radial system and check the solution's invariants."""
    A, rhs, cond = assemble_system(model, defect)
    try:
        lu = sl.lu_factor(A, check_finite=True)
    except (ValueError, sl.LinAlgError) as exc:
        raise DegenerateGeometryError(f"radial system could not be factored: {exc}") from exc
    if np.any(np.abs(np.diag(lu[0])) < 1e-300) or not np.isfinite(cond):
        raise DegenerateGeometryError("radial system is singular")
    x = sl.lu_solve(lu, rhs)
    resid = float(np.abs(A @ x - rhs).max())
    sol = RadialDefectSolution(model=model, defect=defect, scaled=x, condition=cond, residual=resid)
    if verify:
        diag = _verify(sol)
        sol.diagnostics.update(diag)
        if diag["worst"] > INVARIANT_TOL:
            raise IllConditionedError("radial solution violates its constraints", diagnostics=diag)
    return sol


def energy_es(sol, check=True):
    """Electrostatic defect energy 1/2 int b_c phi for the finite ball.

    The closed form is cross-checked against adaptive quadrature of
    -(pi lam rho / alpha) int_0^r0 r (r phi) dr.
    """
    d, mod = sol.defect, sol.model
    e = _energy_closed(mod, d.rho, d.r0, sol.scaled[0], sol.scaled[1])
    if check and d.rho != 0:
        q = energy_es_quadrature(sol)
        if abs(e - q) > 1e-8 * abs(e):
            raise ConsistencyError(f"closed-form energy {e!r} disagrees with quadrature {q!r}")
    return e


def energy_es_quadrature(sol):
    d, mod = sol.defect, sol.model
    f = lambda r: r * float(sol.rphi(r))
    val, _ = integrate.quad(f, 0.0, d.r0, epsabs=0, epsrel=1e-13, limit=200)
    return -math.pi * mod.lam * d.rho / mod.alpha * val


def infinite_coefficients(model, defect, scaled=True):
    """C1, C2, C5..C8 of the R0 -> infinity solution (C3 = -C1, C4 = -C2)."""
    _require_case1(model)
    kp, km, r0, rho = model.k_plus, model.k_minus, defect.r0, defect.rho
    l0_4 = 1.0 / model.inv_l0_4
    dk = kp**2 - km**2
    c1 = rho * l0_4 * km**2 * (1 + kp * r0) / (2 * kp * dk)
    c2 = -rho * l0_4 * kp**2 * (1 + km * r0) / (2 * km * dk)
    # C7 carries the opposite sign to C8, mirroring C1 and C2
    c7 = -rho * l0_4 * km**2 * _core_factor(kp, r0) / (kp * dk)
    c8 = rho * l0_4 * kp**2 * _core_factor(km, r0) / (km * dk)
    out = np.array([c1, c2, -c1, -c2, 0.0, 0.0, c7, c8])
    if not scaled:
        off = np.array([-kp * r0, -km * r0, -kp * r0, -km * r0, 0, 0, kp * r0, km * r0])
        with np.errstate(over="ignore"):
            out = out * np.exp(off)
    return out


def energy_es_infinite(model, defect):
    c = infinite_coefficients(model, defect)
    return _energy_closed(model, defect.rho, defect.r0, c[0], c[1])


@dataclass
class SweepResult:
    R0: np.ndarray
    energy: np.ndarray
    rel_error: np.ndarray
    E_inf: float
    a0: float
    threshold: float
    errors: dict

    @property
    def R0_at_threshold(self):
        """Smallest listed R0 whose relative error is below the threshold."""
        ok = np.nonzero(self.rel_error < self.threshold)[0]
        return float(self.R0[ok[0]]) if ok.size else None

    def rows(self):
        for R, e, err in zip(self.R0, self.energy, self.rel_error):
            yield R, R / self.a0, e, err


def default_radii(r0, a0, points=40):
    return np.geomspace(1.2 * r0, 10 * a0, points)


def cell_size_sweep(model, rho, r0, radii, a0=1.0, threshold=0.01):
    """Electrostatic defect energy and relative error vs. E(inf) over cell radii.

    Failures at individual radii are recorded in ``errors`` and yield NaN rows.
    """
    radii = np.asarray(radii, dtype=float)
    if radii.ndim != 1 or radii.size == 0:
        raise InputError("need a non-empty list of cell radii")
    if np.any(np.diff(radii) <= 0) or radii[0] <= r0:
        raise InputError("cell radii must be strictly increasing and exceed r0")
    e_inf = energy_es_infinite(model, SphericalDefect(rho, r0, radii[-1]))
    energies = np.full(radii.size, np.nan)
    errors = {}
    for i, R in enumerate(radii):
        try:
            energies[i] = energy_es(solve_coefficients(model, SphericalDefect(rho, r0, R)))
        except FieldQCError as exc:
            errors[float(R)] = f"{type(exc).__name__}: {exc}"
    rel = np.abs(energies - e_inf) / abs(e_inf)
    return SweepResult(R0=radii, energy=energies, rel_error=rel, E_inf=e_inf, a0=a0,
                       threshold=threshold, errors=errors)


def relative_error(model, rho, r0, R0):
    d = SphericalDefect(rho, r0, R0)
    e = energy_es(solve_coefficients(model, d))
    return abs(e - energy_es_infinite(model, d)) / abs(energy_es_infinite(model, d))


def crossing_radius(model, r0, threshold=0.01, rho=1.0, bracket=None):
    """Cell radius at which the relative electrostatic error equals ``threshold``.

    The relative error does not depend on rho.  The bracket defaults to
    [1.05 r0, r0 + 60/k+].
    """
    lo, hi = bracket or (1.05 * r0, r0 + 60.0 / model.k_plus)
    g = lambda R: math.log(relative_error(model, rho, r0, R)) - math.log(threshold)
    if g(lo) < 0:
        return lo
    return optimize.brentq(g, lo, hi, xtol=1e-12, rtol=1e-13)
