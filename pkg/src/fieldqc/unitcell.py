"""Periodic Thomas-Fermi-von Weizsacker problem on a deformed unit cell.

Fields are sampled on a uniform grid in fractional coordinates and
differentiated spectrally.  The square-root density ``u`` minimizes

    E(u) = <f(u) + lam/2 |grad u|^2 + 1/2 (u^2 + b) phi[u]>,   f(u) = C_F u^(10/3),

over ``<u^2> = -<b>`` (charge neutrality), where ``phi[u]`` solves
``lap phi + u^2 + b = 0``.  The neutrality multiplier is folded into the
additive constant of ``phi``.

Sign convention: ``u^2`` is the electron number density and ``b`` is the
nuclear charge density measured in electron units, so ``b <= 0`` and
``integral(b) = -Z`` per cell.
"""

import json
import logging
import time
from dataclasses import dataclass, field
from itertools import product
from pathlib import Path

import numpy as np

from .errors import ConstraintError, ConvergenceError, InputError, ResolutionError
from .grid import PeriodicGrid

log = logging.getLogger(__name__)

C_F = 0.3 * (3.0 * np.pi**2) ** (2.0 / 3.0)

MODES = ("regularized-nucleus", "uniform-background")

_PRIMITIVE = {
    "sc": np.eye(3),
    "fcc": 0.5 * np.array([[0.0, 1.0, 1.0], [1.0, 0.0, 1.0], [1.0, 1.0, 0.0]]),
    "bcc": 0.5 * np.array([[-1.0, 1.0, 1.0], [1.0, -1.0, 1.0], [1.0, 1.0, -1.0]]),
}


def f_tf(u):
    return C_F * u ** (10.0 / 3.0)


def df_tf(u):
    return (10.0 / 3.0) * C_F * u ** (7.0 / 3.0)


def d2f_tf(u):
    return (70.0 / 9.0) * C_F * u ** (4.0 / 3.0)


def _frozen(a):
    a = np.array(a, dtype=float)
    a.flags.writeable = False
    return a


@dataclass(frozen=True)
class UnitCellSpec:
    """Definition of one periodic unit-cell problem.

    ``lattice_vectors`` holds the rescaled vectors e_1, e_2, e_3 as columns,
    normalized so that their triple product is 1; ``eta`` is the lattice
    parameter, so the undeformed cell has volume ``eta**3``.
    """

    lattice_vectors: np.ndarray
    eta: float
    Z: float
    sigma_nuc: float
    lam: float = 1.0 / 6.0
    n: int = 32
    mode: str = "regularized-nucleus"
    F0: np.ndarray = field(default_factory=lambda: np.eye(3))
    center: tuple = (0.0, 0.0, 0.0)

    def __post_init__(self):
        e = np.array(self.lattice_vectors, dtype=float)
        F = np.array(self.F0, dtype=float)
        if e.shape != (3, 3) or F.shape != (3, 3):
            raise InputError("lattice vectors and F0 must be 3x3")
        if abs(np.linalg.det(e) - 1.0) > 1e-10:
            raise InputError("rescaled lattice vectors must have unit triple product")
        if np.linalg.det(F) <= 0:
            raise InputError("det F0 must be positive")
        if self.eta <= 0 or self.Z <= 0 or self.sigma_nuc <= 0:
            raise InputError("eta, Z and sigma_nuc must be positive")
        if not 0.0 < self.lam <= 1.0:
            raise InputError("lambda must lie in (0, 1]")
        if self.n < 8 or self.n % 2:
            raise InputError("grid resolution must be an even integer >= 8")
        if self.mode not in MODES:
            raise InputError(f"unknown source mode {self.mode!r}")
        object.__setattr__(self, "lattice_vectors", _frozen(e))
        object.__setattr__(self, "F0", _frozen(F))
        object.__setattr__(self, "center", tuple(float(c) for c in self.center))

    @classmethod
    def from_lattice(cls, kind, a0, Z, sigma_nuc=None, **kw):
        """Primitive cell of a cubic Bravais lattice with conventional constant ``a0``."""
        try:
            prim = _PRIMITIVE[kind.lower()]
        except KeyError:
            raise InputError(f"unknown lattice type {kind!r}") from None
        vol = np.linalg.det(prim)
        e = prim / vol ** (1.0 / 3.0)
        eta = a0 * vol ** (1.0 / 3.0)
        if sigma_nuc is None:
            sigma_nuc = a0 / 20.0
        return cls(lattice_vectors=e, eta=eta, Z=Z, sigma_nuc=sigma_nuc, **kw)

    def with_F(self, F):
        return UnitCellSpec(self.lattice_vectors, self.eta, self.Z, self.sigma_nuc,
                            self.lam, self.n, self.mode, F, self.center)

    @property
    def cell(self):
        return self.eta * self.F0 @ self.lattice_vectors

    @property
    def volume(self):
        return self.eta**3 * np.linalg.det(self.F0)

    def grid(self):
        return PeriodicGrid(self.cell, self.n)


@dataclass(frozen=True)
class ElectronicFields:
    u: np.ndarray
    phi: np.ndarray
    residual_el: float
    residual_poisson: float
    volume: float
    neutrality: float
    iterations: int = 0
    energy: float = float("nan")

    def __post_init__(self):
        for name in ("u", "phi"):
            a = np.array(getattr(self, name), dtype=float)
            a.flags.writeable = False
            object.__setattr__(self, name, a)

    @property
    def residuals(self):
        return {"euler_lagrange": self.residual_el, "poisson": self.residual_poisson}


@dataclass(frozen=True)
class CellMoments:
    alpha: float
    beta: float
    gamma: float
    W: float = float("nan")
    F0: np.ndarray = field(default_factory=lambda: np.eye(3))

    @classmethod
    def reference(cls):
        """Moments reported for FCC aluminium (TFW, lambda = 1/6).

        W is not reported and stays NaN.
        """
        return cls(alpha=0.1629, beta=-0.0509, gamma=0.9449)

    def as_dict(self):
        return {"alpha": self.alpha, "beta": self.beta, "gamma": self.gamma, "W": self.W}


@dataclass(frozen=True)
class ElasticTensors:
    C: np.ndarray
    B: np.ndarray
    F0: np.ndarray
    h: float

    def symmetry_error(self):
        C = self.C
        return float(np.abs(C - C.transpose(2, 3, 0, 1)).max() / max(np.abs(C).max(), 1e-300))

    def voigt_moduli(self):
        """Isotropic (shear, bulk) moduli by Voigt averaging of C.

        Only meaningful for a stress-free reference, where C reduces to the
        small-strain stiffness.
        """
        C = self.C
        iijj = np.einsum("iijj->", C)
        ijij = np.einsum("ijij->", C)
        return (3.0 * ijij - iijj) / 30.0, iijj / 9.0


def assemble_source(spec, grid=None):
    """Nuclear charge density ``b`` sampled on the grid (electron units, <= 0).

    Regularized-nucleus mode places a normalized periodized Gaussian of width
    ``sigma_nuc`` at fractional position ``spec.center``; its Fourier series is
    truncated to the grid so the cell integral is exactly ``-Z``.
    """
    grid = grid or spec.grid()
    if spec.mode == "uniform-background":
        return np.full(grid.shape, -spec.Z / grid.volume)
    if spec.sigma_nuc < 4.0 * grid.spacing:
        raise ResolutionError(
            f"sigma_nuc={spec.sigma_nuc:g} resolved by {spec.sigma_nuc / grid.spacing:.2f} "
            "grid spacings; at least 4 are required")
    xc = spec.cell @ np.asarray(spec.center)
    phase = np.exp(-1j * np.einsum("a,aijk->ijk", xc, grid.gvecs))
    bh = np.exp(-0.5 * spec.sigma_nuc**2 * grid.g2) * phase
    # real-space sample of (1/vol) sum_G bh(G) exp(iGx)
    dens = np.fft.ifftn(bh).real * grid.n**3 / grid.volume
    return -spec.Z * dens


class _TFWProblem:
    def __init__(self, grid, b, lam):
        self.grid = grid
        self.b = b
        self.lam = lam
        self.nbar = -b.mean()

    def evaluate(self, u):
        g = self.grid
        rho = u * u + self.b
        phit = g.poisson(rho)
        lap = g.laplacian(u)
        e = np.mean(f_tf(u) - 0.5 * self.lam * u * lap + 0.5 * rho * phit)
        grad = -self.lam * lap + df_tf(u) + 2.0 * u * phit
        return e, grad, phit, lap


def _rms(a):
    return float(np.sqrt(np.mean(np.abs(a) ** 2)))


def solve_unit_cell(spec, tol=1e-9, max_iter=100_000, u0=None):
    """Ground-state ``(u_p, phi_p)`` of the unit-cell problem.

    Preconditioned nonlinear conjugate gradients on the neutrality sphere
    ``<u^2> = nbar`` with a geodesic line search; the trial step is halved
    whenever it fails to lower the energy.  ``tol`` bounds the relative
    Euler-Lagrange residual.
    """
    grid = spec.grid()
    b = assemble_source(spec, grid)
    prob = _TFWProblem(grid, b, spec.lam)
    nbar = prob.nbar

    if u0 is None:
        u = np.sqrt(0.5 * nbar + 0.5 * np.abs(b))
    else:
        u = np.maximum(np.array(u0, dtype=float), 0.0)
    u *= np.sqrt(nbar / np.mean(u * u))

    shift = max(np.mean((10.0 / 3.0) * C_F * u ** (4.0 / 3.0)), 1e-3)
    precond = 1.0 / (spec.lam * grid.g2 + shift)

    def project(v, base):
        return v - (np.mean(v * base) / np.mean(base * base)) * base

    e, grad, phit, lap = prob.evaluate(u)
    d_prev = pg_prev = gp_prev = None
    theta0 = 0.05
    res = np.inf
    it = 0
    for it in range(max_iter + 1):
        mu = np.mean(grad * u) / np.mean(u * u)
        gp = grad - mu * u
        scale = _rms(spec.lam * lap) + _rms(df_tf(u)) + _rms(2.0 * u * (phit - 0.5 * mu))
        res = _rms(gp) / scale
        if res <= tol:
            break
        if it == max_iter:
            raise ConvergenceError(
                f"unit-cell solve did not converge in {max_iter} iterations "
                f"(relative residual {res:.3e})",
                residuals={"euler_lagrange": res}, state=np.array(spec.F0))

        pg = project(grid.ifft(precond * grid.fft(gp)), u)
        d = -pg
        if d_prev is not None:
            beta = max(0.0, np.mean(gp * (pg - pg_prev)) / np.mean(gp_prev * pg_prev))
            d = d + beta * project(d_prev, u)
        if np.mean(gp * d) >= 0:
            d = -pg
        dn = d * np.sqrt(np.mean(u * u) / np.mean(d * d))
        slope0 = np.mean(grad * dn)

        theta = theta0
        while True:
            ut = np.cos(theta) * u + np.sin(theta) * dn
            et, gt, _, _ = prob.evaluate(ut)
            slope_t = np.mean(gt * (-np.sin(theta) * u + np.cos(theta) * dn))
            cand = [(et, theta, ut)]
            if slope0 - slope_t > 0:
                th = theta * slope0 / (slope0 - slope_t)
                th = min(th, 4.0 * theta, 0.5 * np.pi)
                us = np.cos(th) * u + np.sin(th) * dn
                es, _, _, _ = prob.evaluate(us)
                cand.append((es, th, us))
            best = min(cand, key=lambda c: c[0])
            if best[0] <= e or theta < 1e-14:
                break
            theta *= 0.5
        e_new, theta, u_new = best
        theta0 = min(max(theta, 1e-8), 0.5)

        neg = np.minimum(u_new, 0.0)
        if neg.any():
            if _rms(neg) > 1e-2 * _rms(u_new):
                raise ConstraintError("negative density beyond tolerance during iteration",
                                      residuals={"euler_lagrange": res},
                                      state=np.array(spec.F0))
            u_new = np.maximum(u_new, 0.0)
            u_new *= np.sqrt(nbar / np.mean(u_new * u_new))
            d = None
        u = u_new
        e, grad, phit, lap = prob.evaluate(u)
        d_prev, pg_prev, gp_prev = d, pg, gp

    mu = np.mean(grad * u) / np.mean(u * u)
    phi = phit - 0.5 * mu
    rho = u * u + b
    res_p = _rms(grid.laplacian(phi) + rho) / (_rms(u * u) + _rms(b))
    neutral = grid.integrate(rho)
    log.debug("unit cell converged: %d iterations, residual %.2e", it, res)
    return ElectronicFields(u=u, phi=phi, residual_el=res, residual_poisson=res_p,
                            volume=grid.volume, neutrality=neutral, iterations=it, energy=e)


def energy_density(fields, spec, grid=None, b=None):
    """Cell average of f(u) + lam/2 |grad u|^2 - 1/2 |grad phi|^2 + (u^2 + b) phi."""
    grid = grid or spec.grid()
    if b is None:
        b = assemble_source(spec, grid)
    u, phi = fields.u, fields.phi
    return float(np.mean(f_tf(u)) + 0.5 * spec.lam * grid.grad_sq_mean(u)
                 - 0.5 * grid.grad_sq_mean(phi) + np.mean((u * u + b) * phi))


def moments(fields, spec):
    u, phi = fields.u, fields.phi
    beta = float(np.mean(phi))
    return CellMoments(alpha=float(np.mean(u)), beta=beta,
                       gamma=float(np.mean(0.5 * d2f_tf(u))) + beta,
                       W=energy_density(fields, spec), F0=np.array(spec.F0))


def cell_moments(spec, **solve_kw):
    """Solve the unit cell and return its moments."""
    return moments(solve_unit_cell(spec, **solve_kw), spec)


def stiffness_fd(spec, h=None, **solve_kw):
    """C = d^2(JW)/dF dF and B = d(J beta)/dF by central differences.

    ``h`` is the absolute step on the entries of F (default 1e-3 ||F0||_F).
    Each stencil point re-solves the unit cell at the perturbed F.
    """
    F0 = np.array(spec.F0)
    fnorm = np.linalg.norm(F0)
    if h is None:
        h = 1e-3 * fnorm
    if not 1e-4 * fnorm * (1 - 1e-12) <= h <= 1e-2 * fnorm * (1 + 1e-12):
        raise InputError("FD step must lie in [1e-4, 1e-2] * ||F0||")

    cache = {}

    def evaluate(key):
        if key not in cache:
            F = F0.copy()
            for idx, s in key:
                F[idx] += s * h
            try:
                m = cell_moments(spec.with_F(F), **solve_kw)
            except ConvergenceError as exc:
                exc.state = F
                raise
            J = np.linalg.det(F)
            cache[key] = (J * m.W, J * m.beta)
        return cache[key]

    def key(*pairs):
        acc = {}
        for idx, s in pairs:
            acc[idx] = acc.get(idx, 0) + s
        return tuple(sorted((i, s) for i, s in acc.items() if s))

    idxs = list(product(range(3), range(3)))
    jw0 = evaluate(())[0]
    C = np.zeros((3, 3, 3, 3))
    B = np.zeros((3, 3))
    for a in idxs:
        fp, bp = evaluate(key((a, 1)))
        fm, bm = evaluate(key((a, -1)))
        B[a] = (bp - bm) / (2 * h)
        C[a + a] = (fp - 2 * jw0 + fm) / h**2
    for a, c in product(idxs, idxs):
        if a == c:
            continue
        fpp = evaluate(key((a, 1), (c, 1)))[0]
        fpm = evaluate(key((a, 1), (c, -1)))[0]
        fmp = evaluate(key((a, -1), (c, 1)))[0]
        fmm = evaluate(key((a, -1), (c, -1)))[0]
        C[a + c] = (fpp - fpm - fmp + fmm) / (4 * h * h)
    return ElasticTensors(C=C, B=B, F0=F0, h=h)


@dataclass
class SymmetryReport:
    reference: CellMoments
    deviations: list
    tol: float = 1e-6

    @property
    def max_deviation(self):
        return max((d["max"] for d in self.deviations), default=0.0)

    @property
    def passed(self):
        return self.max_deviation <= self.tol


def _rel(a, b):
    return abs(a - b) / max(abs(b), 1e-300)


def symmetry_check(spec, group, action="both", tol=1e-6, **solve_kw):
    """Compare W, alpha, beta, gamma at R F0 and/or F0 H against F0.

    ``action`` selects the left (frame indifference), right (lattice
    point group) or both transformations for each matrix in ``group``.
    Left action is only applied to proper rotations.
    """
    ref = cell_moments(spec, **solve_kw)
    F0 = np.array(spec.F0)
    rows = []
    for k, G in enumerate(group):
        G = np.asarray(G, dtype=float)
        targets = []
        proper = np.allclose(G @ G.T, np.eye(3), atol=1e-12) and np.linalg.det(G) > 0
        if action in ("left", "both") and proper:
            targets.append(("left", G @ F0))
        if action in ("right", "both"):
            targets.append(("right", F0 @ G))
        for side, F in targets:
            m = cell_moments(spec.with_F(F), **solve_kw)
            dev = {name: _rel(getattr(m, name), getattr(ref, name))
                   for name in ("W", "alpha", "beta", "gamma")}
            dev["max"] = max(dev.values())
            dev.update(index=k, action=side)
            rows.append(dev)
    return SymmetryReport(reference=ref, deviations=rows, tol=tol)


def cubic_rotations():
    """The 24 proper rotations of the cube."""
    mats = []
    for perm in ((0, 1, 2), (0, 2, 1), (1, 0, 2), (1, 2, 0), (2, 0, 1), (2, 1, 0)):
        for signs in product((1, -1), repeat=3):
            M = np.zeros((3, 3))
            for i, (p, s) in enumerate(zip(perm, signs)):
                M[i, p] = s
            if np.linalg.det(M) > 0:
                mats.append(M)
    return mats


# -- configuration and raw-field I/O -----------------------------------------

def spec_from_config(cfg):
    """Build a spec from the JSON config layout (lattice, Z, sigma_nuc, ...)."""
    lat = cfg.get("lattice", {})
    a0 = float(lat.get("a0_bohr", 7.5))
    F0 = np.asarray(cfg.get("F0", np.eye(3).ravel()), dtype=float).reshape(3, 3)
    return UnitCellSpec.from_lattice(
        lat.get("type", "fcc"), a0, float(cfg.get("Z", 3.0)),
        sigma_nuc=cfg.get("sigma_nuc"), lam=float(cfg.get("lambda", 1.0 / 6.0)),
        n=int(cfg.get("N", 32)), mode=cfg.get("mode", "regularized-nucleus"), F0=F0)


def summary(fields, spec, runtime=None):
    m = moments(fields, spec)
    out = m.as_dict()
    out.update(residuals=fields.residuals, N=spec.n)
    if runtime is not None:
        out["runtime_seconds"] = runtime
    return out


def dump_fields(fields, spec, directory, stem="fields"):
    """Write u and phi as little-endian float64, x-fastest, plus a JSON sidecar."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    paths = {}
    for name in ("u", "phi"):
        p = directory / f"{stem}_{name}.bin"
        np.asarray(getattr(fields, name), dtype="<f8").ravel(order="F").tofile(p)
        paths[name] = p.name
    side = {"shape": [spec.n] * 3, "order": "x-fastest", "dtype": "float64-le",
            "cell_bohr": np.asarray(spec.cell).T.tolist(), "files": paths}
    (directory / f"{stem}.json").write_text(json.dumps(side, indent=2))
    return directory / f"{stem}.json"


def load_fields(sidecar):
    sidecar = Path(sidecar)
    meta = json.loads(sidecar.read_text())
    shape = tuple(meta["shape"])
    return {name: np.fromfile(sidecar.parent / fn, dtype="<f8").reshape(shape, order="F")
            for name, fn in meta["files"].items()}


def timed_solve(spec, **kw):
    t = time.perf_counter()
    fields = solve_unit_cell(spec, **kw)
    return fields, time.perf_counter() - t
