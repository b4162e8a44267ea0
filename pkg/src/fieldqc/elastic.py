"""Dilatational inclusion in an isotropic ball with a clamped outer surface.

With eigenstress ``B = sigma0 I`` carried by the source ``rho`` on r <= r0,
the displacement is radial,

    y = Theta1 x                         (r <= r0)
    y = Theta2 x - Theta3 x / r^3        (r0 <= r <= R0)

and the three constants follow from continuity of y and of the radial
traction at r0 together with y = 0 on r = R0.
"""

import math
from dataclasses import dataclass

import numpy as np
from scipy import integrate, optimize

from .errors import ConsistencyError, DomainError, InputError


@dataclass(frozen=True)
class ElasticSpec:
    mu: float
    kappa: float
    sigma0: float
    rho: float
    r0: float
    R0: float

    def __post_init__(self):
        if not (self.mu > 0 and self.kappa > 0):
            raise InputError("shear and bulk moduli must be positive")
        if not 0 < self.r0 <= self.R0:
            raise InputError("need 0 < r0 <= R0")
        if not (math.isfinite(self.sigma0) and math.isfinite(self.rho)):
            raise InputError("sigma0 and rho must be finite")

    @property
    def eigenstress(self):
        """Product rho * sigma0; only this combination enters the solution."""
        return self.rho * self.sigma0

    def with_R0(self, R0):
        return ElasticSpec(self.mu, self.kappa, self.sigma0, self.rho, self.r0, R0)


def theta1_closed(spec):
    return spec.eigenstress / (4 * spec.mu + 3 * spec.kappa) * ((spec.r0 / spec.R0) ** 3 - 1)


def solve_thetas(spec):
    """(Theta1, Theta2, Theta3) from the interface and boundary conditions."""
    k, mu, r0, R0 = spec.kappa, spec.mu, spec.r0, spec.R0
    A = np.array([[1.0, -1.0, 1.0 / r0**3],
                  [3 * k, -3 * k, -4 * mu / r0**3],
                  [0.0, 1.0, -1.0 / R0**3]])
    rhs = np.array([0.0, -spec.eigenstress, 0.0])
    theta = np.linalg.solve(A, rhs)
    ref = theta1_closed(spec)
    if abs(theta[0] - ref) > 1e-12 * max(abs(ref), abs(spec.eigenstress) / (4 * mu + 3 * k), 1e-300):
        raise ConsistencyError(f"Theta1 {theta[0]!r} disagrees with closed form {ref!r}")
    return tuple(float(t) for t in theta)


def displacement(spec, r, thetas=None):
    """Radial displacement y_r(r)."""
    t1, t2, t3 = thetas or solve_thetas(spec)
    r = np.asarray(r, dtype=float)
    if np.any(r < 0) or np.any(r > spec.R0 * (1 + 1e-14)):
        raise DomainError("r must lie in [0, R0]")
    safe = np.where(r > 0, r, 1.0)
    return np.where(r <= spec.r0, t1 * r, t2 * r - t3 / safe**2)


def _strains(spec, r, thetas):
    t1, t2, t3 = thetas
    r = np.asarray(r, dtype=float)
    safe = np.where(r > 0, r, 1.0)
    inside = r <= spec.r0
    err = np.where(inside, t1, t2 + 2 * t3 / safe**3)
    ett = np.where(inside, t1, t2 - t3 / safe**3)
    return err, ett


def radial_stress(spec, r, side="auto", thetas=None):
    """sigma_rr at r.  ``side`` selects the inner or outer branch at r = r0."""
    thetas = thetas or solve_thetas(spec)
    r = np.asarray(r, dtype=float)
    t1, t2, t3 = thetas
    if side == "inner":
        err = ett = np.full_like(r, t1)
    elif side == "outer":
        err, ett = t2 + 2 * t3 / r**3, t2 - t3 / r**3
    else:
        err, ett = _strains(spec, r, thetas)
    trace = err + 2 * ett
    dev = err - trace / 3
    stress = spec.kappa * trace + 2 * spec.mu * dev
    core = (r < spec.r0) if side == "auto" else np.full(r.shape, side == "inner")
    return stress + np.where(core, spec.eigenstress, 0.0)


def verify_solution(spec, thetas=None):
    """Mismatch in displacement and traction at r0 and displacement at R0."""
    thetas = thetas or solve_thetas(spec)
    t1, t2, t3 = thetas
    r0 = spec.r0
    disp = abs(t1 * r0 - (t2 * r0 - t3 / r0**2))
    trac = abs(float(radial_stress(spec, r0, "inner", thetas)) - float(radial_stress(spec, r0, "outer", thetas)))
    clamp = abs(float(displacement(spec, spec.R0, thetas)))
    scale = abs(spec.eigenstress) or 1.0
    return {"displacement_jump": disp, "traction_jump": trac / scale, "boundary_displacement": clamp}


def energy_el(spec, check=True):
    """Elastic defect energy (3 rho sigma0 / 2) Theta1.

    This is the core average of (1/2) rho tr(grad y) sigma0; multiply by the
    core volume (see :func:`energy_el_integrated`) for the integrated energy.
    """
    t1 = theta1_closed(spec)
    e = 1.5 * spec.eigenstress * t1
    if check:
        thetas = solve_thetas(spec)
        q = energy_el_quadrature(spec, thetas)
        if abs(e - q) > 1e-10 * max(abs(e), 1e-300) and abs(e - q) > 1e-300:
            raise ConsistencyError(f"closed-form elastic energy {e!r} disagrees with quadrature {q!r}")
    return e


def energy_el_quadrature(spec, thetas=None):
    """Core average of (1/2) rho sigma0 div y, div y from the displacement field."""
    thetas = thetas or solve_thetas(spec)

    def div_y(r):
        err, ett = _strains(spec, r, thetas)
        return float(err + 2 * ett)

    val, _ = integrate.quad(lambda r: 4 * math.pi * r * r * div_y(r), 0.0, spec.r0,
                            epsabs=0, epsrel=1e-13)
    return 0.5 * spec.eigenstress * val / (4 * math.pi * spec.r0**3 / 3)


def energy_el_integrated(spec):
    """Elastic energy integrated over the core, (4 pi r0^3 / 3) times :func:`energy_el`."""
    return 4 * math.pi * spec.r0**3 / 3 * energy_el(spec)


def energy_el_infinite(spec):
    return -1.5 * spec.eigenstress**2 / (4 * spec.mu + 3 * spec.kappa)


def relative_error(spec):
    """|E(R0) - E(inf)| / |E(inf)|, equal to (r0/R0)^3."""
    inf = energy_el_infinite(spec)
    return abs(energy_el(spec, check=False) - inf) / abs(inf)


def crossing_ratio(threshold=0.01):
    """R0 / r0 at which the relative elastic error equals ``threshold``."""
    return threshold ** (-1.0 / 3.0)


def crossing_radius(spec, threshold=0.01):
    """Numerical root of relative_error(R0) = threshold, for checking :func:`crossing_ratio`."""
    g = lambda R: relative_error(spec.with_R0(R)) - threshold
    return optimize.brentq(g, spec.r0 * (1 + 1e-9), spec.r0 * 1e3, xtol=1e-14, rtol=1e-15)


def voigt_isotropic(C):
    """Voigt bulk and shear moduli of a 3x3x3x3 stiffness tensor."""
    C = np.asarray(C, dtype=float)
    iijj = np.einsum("iijj->", C)
    ijij = np.einsum("ijij->", C)
    return iijj / 9.0, (3 * ijij - iijj) / 30.0


@dataclass(frozen=True)
class DefectEnergy:
    total: float
    electrostatic: float
    elastic: float

    @property
    def elastic_share(self):
        denom = abs(self.electrostatic) + abs(self.elastic)
        return abs(self.elastic) / denom if denom else 0.0

    def as_dict(self):
        return {"E_d": self.total, "E_es": self.electrostatic, "E_el": self.elastic,
                "elastic_share": self.elastic_share}


def total_defect_energy(E_es, E_el, defect=None, elastic=None):
    """Sum of the electrostatic and elastic contributions.

    If both geometries are given (a ``SphericalDefect`` and an ``ElasticSpec``)
    their rho, r0 and R0 must agree.
    """
    if defect is not None and elastic is not None:
        for name in ("rho", "r0", "R0"):
            a, b = getattr(defect, name), getattr(elastic, name)
            if not math.isclose(a, b, rel_tol=1e-12, abs_tol=0.0):
                raise InputError(f"inconsistent {name}: {a!r} vs {b!r}")
    if not (math.isfinite(E_es) and math.isfinite(E_el)):
        raise InputError("energies must be finite")
    return DefectEnergy(total=E_es + E_el, electrostatic=E_es, elastic=E_el)


def residual_error_scales(k_plus, r0, R0):
    """Leading cell-size error scales: exp(-k+ (R0 - r0)) and (r0/R0)^3."""
    return {"electrostatic": math.exp(-k_plus * (R0 - r0)), "elastic": (r0 / R0) ** 3}
