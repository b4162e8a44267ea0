"""Partial-fraction kernels and their local (screened-Poisson) reformulation.

A nonlocal kinetic kernel is approximated as

    K(k) ~ sum_j P_j k^2 / (k^2 + Q_j),

with complex (P_j, Q_j) closed under conjugation and Re Q_j > 0.  Each term
turns into a screened Poisson equation -lap phi + Q_j phi + P_j Q_j p(u) = 0
on the unit cell, solved exactly in Fourier space.
"""

import math
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy import optimize

from .errors import DomainError, FitError, InputError
from .grid import PeriodicGrid

IMAG_TOL = 1e-12


@dataclass(frozen=True)
class KernelSamples:
    k: np.ndarray
    values: np.ndarray
    provenance: str = "user table"

    def __post_init__(self):
        k = np.asarray(self.k, dtype=float)
        v = np.asarray(self.values, dtype=float)
        if k.ndim != 1 or k.shape != v.shape:
            raise InputError("k and K values must be 1-D arrays of equal length")
        if np.any(k < 0) or np.any(np.diff(k) <= 0):
            raise InputError("wavenumbers must be non-negative and strictly increasing")
        if not (np.all(np.isfinite(k)) and np.all(np.isfinite(v))):
            raise InputError("samples must be finite")
        object.__setattr__(self, "k", k)
        object.__setattr__(self, "values", v)

    @classmethod
    def from_terms(cls, k, P, Q, provenance="synthetic"):
        k = np.asarray(k, dtype=float)
        vals = _evaluate(np.asarray(P, complex), np.asarray(Q, complex), k)
        return cls(k, vals.real, provenance)

    @classmethod
    def from_csv(cls, path):
        data = np.genfromtxt(path, delimiter=",", names=True, dtype=float)
        names = [n.lower() for n in data.dtype.names]
        try:
            ik, iv = names.index("k"), names.index("khat")
        except ValueError:
            raise InputError("samples CSV needs 'k' and 'Khat' columns") from None
        cols = data.dtype.names
        return cls(np.atleast_1d(data[cols[ik]]), np.atleast_1d(data[cols[iv]]), str(path))


@dataclass(frozen=True)
class KernelFit:
    P: np.ndarray
    Q: np.ndarray
    residual: float
    threshold: float = math.inf
    split: tuple = (0, 0)

    @property
    def m(self):
        return len(self.P)

    @property
    def above_threshold(self):
        return self.residual > self.threshold

    def pairs(self):
        return [{"P_re": float(p.real), "P_im": float(p.imag), "Q_re": float(q.real), "Q_im": float(q.imag)}
                for p, q in zip(self.P, self.Q)]

    def conjugate_closed(self, tol=1e-12):
        a = sorted(zip(np.round(self.P, 12), np.round(self.Q, 12)), key=_key)
        b = sorted(zip(np.round(self.P.conj(), 12), np.round(self.Q.conj(), 12)), key=_key)
        return all(abs(p - r) <= tol * max(1, abs(p)) and abs(q - s) <= tol * max(1, abs(q))
                   for (p, q), (r, s) in zip(a, b))


def _key(pq):
    p, q = pq
    return (q.real, q.imag, p.real, p.imag)


def _evaluate(P, Q, k):
    k2 = np.asarray(k, dtype=float)[..., None] ** 2
    return (P * k2 / (k2 + Q)).sum(-1)


def eval_fit(fit, k):
    """Evaluate the fitted kernel; the result is real for a conjugate-closed fit."""
    val = _evaluate(fit.P, fit.Q, k)
    if np.any(np.abs(val.imag) > IMAG_TOL * np.maximum(1.0, np.abs(val))):
        raise ArithmeticError("fitted kernel has a non-negligible imaginary part")
    return val.real


# variable projection ---------------------------------------------------------

def _poles(theta, n_pairs, n_real):
    a = theta[: 2 * n_pairs].reshape(n_pairs, 2)
    q_pair = np.exp(a[:, 0]) + 1j * a[:, 1]
    q_real = np.exp(theta[2 * n_pairs:])
    return q_pair, q_real


def _basis(k2, q_pair, q_real):
    cols = []
    for q in q_pair:
        g = k2 / (k2 + q)
        cols += [g.real, g.imag]
    for q in q_real:
        cols.append(k2 / (k2 + q))
    return np.column_stack(cols) if cols else np.zeros((k2.size, 0))


def _project(theta, n_pairs, n_real, k2, y):
    q_pair, q_real = _poles(theta, n_pairs, n_real)
    A = _basis(k2, q_pair, q_real)
    x, *_ = np.linalg.lstsq(A, y, rcond=None)
    return A, x, q_pair, q_real


def _assemble(x, q_pair, q_real):
    P, Q = [], []
    for i, q in enumerate(q_pair):
        # P g + conj(P g) = 2 Re P Re g - 2 Im P Im g
        p = 0.5 * (x[2 * i] - 1j * x[2 * i + 1])
        P += [p, p.conjugate()]
        Q += [q, q.conjugate()]
    for i, q in enumerate(q_real):
        P.append(complex(x[2 * len(q_pair) + i]))
        Q.append(complex(q))
    return np.array(P, dtype=complex), np.array(Q, dtype=complex)


def _max_rel(P, Q, samples):
    err = _evaluate(P, Q, samples.k).real - samples.values
    return float(np.abs(err).max() / max(np.abs(samples.values).max(), 1e-300))


def _encode(Q_pair, Q_real):
    t = []
    for q in Q_pair:
        t += [math.log(q.real), q.imag]
    t += [math.log(q) for q in Q_real]
    return np.array(t, dtype=float)


def _fit_split(samples, n_pairs, n_real, starts):
    k2 = samples.k**2
    y = samples.values

    def fun(th):
        A, x, _, _ = _project(th, n_pairs, n_real, k2, y)
        return A @ x - y

    best = None
    for th0 in starts:
        try:
            with np.errstate(all="ignore"):
                res = optimize.least_squares(fun, th0, method="lm", xtol=1e-15, ftol=1e-15,
                                             gtol=1e-15, max_nfev=4000 * (len(th0) + 1))
        except (ValueError, np.linalg.LinAlgError):
            continue
        if not np.all(np.isfinite(res.x)):
            continue
        _, x, qp, qr = _project(res.x, n_pairs, n_real, k2, y)
        P, Q = _assemble(x, qp, qr)
        if not np.all(np.isfinite(P)):
            continue
        r = _max_rel(P, Q, samples)
        if best is None or r < best[0]:
            best = (r, P, Q)
    return best


def _starts(samples, n_pairs, n_real, rng, restarts):
    k2 = samples.k[samples.k > 0] ** 2
    lo, hi = (math.log(k2.min()), math.log(k2.max())) if k2.size else (-2.0, 2.0)
    n = n_pairs + n_real
    grid = np.linspace(lo, hi, n + 2)[1:-1]
    out = []
    base = []
    for i in range(n_pairs):
        base += [grid[i], 0.5 * math.exp(grid[i])]
    base += list(grid[n_pairs:])
    out.append(np.array(base))
    for _ in range(restarts):
        t = []
        for _ in range(n_pairs):
            c = rng.uniform(lo, hi)
            t += [c, math.exp(c) * rng.uniform(0.05, 2.0) * rng.choice([-1, 1])]
        t += list(rng.uniform(lo, hi, n_real))
        out.append(np.array(t))
    return out


def fit_partial_fractions(samples, m, restarts=8, seed=0, threshold=math.inf):
    """Least-squares partial-fraction fit by variable projection.

    Poles are searched over every split of ``m`` into conjugate pairs and real
    terms; the (m-1)-term optimum with a zero-weight extra pole is always a
    candidate, so the residual never increases with m.  The residual is
    max|fit - K| / max|K| over the samples.
    """
    if not isinstance(m, (int, np.integer)) or m < 1:
        raise InputError("m must be a positive integer")
    if samples.k.size < 4 * m:
        raise InputError(f"need at least {4 * m} samples for m = {m}")
    rng = np.random.default_rng(seed)
    best = None
    for mm in range(1, m + 1):
        prev = best
        best = None
        for n_pairs in range(mm // 2 + 1):
            n_real = mm - 2 * n_pairs
            starts = _starts(samples, n_pairs, n_real, rng, restarts)
            if prev is not None and prev[3][0] == n_pairs and prev[3][1] == n_real - 1:
                _, Pp, Qp, _ = prev
                pair_q = [q for q in Qp if q.imag > 0]
                real_q = [q.real for q in Qp if q.imag == 0]
                extra = math.exp(starts[0][-1]) if n_real else 1.0
                starts.insert(0, _encode(pair_q, real_q + [extra]))
            found = _fit_split(samples, n_pairs, n_real, starts)
            if found is not None and (best is None or found[0] < best[0]):
                best = (*found, (n_pairs, n_real))
        if prev is not None and (best is None or prev[0] < best[0]):
            # augment the previous optimum with a zero-weight real pole
            r, Pp, Qp, (np_, nr_) = prev
            best = (r, np.append(Pp, 0.0), np.append(Qp, 1.0 + 0j), (np_, nr_ + 1))
        if best is None:
            raise FitError(f"no partial-fraction fit converged for m = {mm}", best=prev)
    r, P, Q, split = best
    if np.any(Q.real <= 0):
        raise FitError("fitted pole left the right half-plane", best=best)
    fit = KernelFit(P=P, Q=Q, residual=r, threshold=threshold, split=split)
    if fit.above_threshold:
        warnings.warn(f"kernel fit residual {r:.3e} exceeds threshold {threshold:.3e}", stacklevel=2)
    return fit


# unit-cell potentials ---------------------------------------------------------

def _grid_for(cell, shape):
    if isinstance(cell, PeriodicGrid):
        return cell
    if len(set(shape)) != 1:
        raise InputError("fields must live on an N x N x N grid")
    return PeriodicGrid(cell, shape[0])


@dataclass(frozen=True)
class PredictorPotentials:
    phi_p: list
    phi_q: list


def _screened(grid, P, Q, src_hat):
    denom = grid.g2 + Q
    if np.any(denom == 0):
        raise InputError("resonance: |g|^2 + Q vanishes at a lattice frequency")
    return grid.ifft(-P * Q * src_hat / denom, real=False)


def solve_predictor_potentials(fit, p_grid, q_grid, cell):
    """phi_pj, phi_qj solving -lap phi + Q_j phi + P_j Q_j p = 0 (and likewise for q).

    ``cell`` is a 3x3 matrix of cell vectors (columns) or a ``PeriodicGrid``.
    Potentials of real poles are returned as real arrays.
    """
    p_grid = np.asarray(p_grid, dtype=float)
    q_grid = np.asarray(q_grid, dtype=float)
    grid = _grid_for(cell, p_grid.shape)
    ph, qh = grid.fft(p_grid), grid.fft(q_grid)
    out_p, out_q = [], []
    for P, Q in zip(fit.P, fit.Q):
        a, b = _screened(grid, P, Q, ph), _screened(grid, P, Q, qh)
        if Q.imag == 0 and P.imag == 0:
            a, b = a.real, b.real
        out_p.append(a)
        out_q.append(b)
    return PredictorPotentials(out_p, out_q)


@dataclass(frozen=True)
class KernelMaps:
    """Pointwise maps p, q and their first two derivatives."""
    p: object
    dp: object
    d2p: object
    q: object
    dq: object
    d2q: object

    @classmethod
    def power(cls, a, b):
        """p(u) = u^(2a), q(u) = u^(2b)."""
        def pw(e):
            return (lambda u: u**e, lambda u: e * u ** (e - 1), lambda u: e * (e - 1) * u ** (e - 2))
        p, q = pw(2 * a), pw(2 * b)
        return cls(*p, *q)


@dataclass(frozen=True)
class KernelMoments:
    xi_p: float
    xi_q: float
    chi_p: np.ndarray
    chi_q: np.ndarray
    psi: np.ndarray
    gamma: float
    gamma_tilde: float
    potentials: PredictorPotentials = field(default=None, repr=False)

    def recompute_gamma_tilde(self):
        return self.gamma + 0.5 * float(np.real(np.sum(self.chi_p + self.chi_q + self.psi)))


def _eval_map(fn, u, name):
    vals = np.asarray(fn(u), dtype=float)
    vals = np.broadcast_to(vals, u.shape)
    bad = ~np.isfinite(vals)
    if bad.any():
        idx = tuple(int(i) for i in np.argwhere(bad)[0])
        raise DomainError(f"{name} is not finite at grid point {idx} (u = {u[idx]!r})")
    return vals


def _real_sum(values, what):
    s = complex(np.sum(values))
    if abs(s.imag) > 1e-10 * max(1.0, abs(s)):
        raise ArithmeticError(f"sum of {what} is not real")
    return s.real


def kernel_moments(fields, fit, maps, gamma, cell):
    """Cell averages feeding the homogenized kernel coefficients.

    ``psi_j`` is the same average for every j; it is kept per j to match the
    sum over terms in gamma_tilde.
    """
    u = np.asarray(fields.u, dtype=float)
    p, dp, d2p = (_eval_map(f, u, n) for f, n in ((maps.p, "p"), (maps.dp, "p'"), (maps.d2p, "p''")))
    q, dq, d2q = (_eval_map(f, u, n) for f, n in ((maps.q, "q"), (maps.dq, "q'"), (maps.d2q, "q''")))
    pots = solve_predictor_potentials(fit, p, q, cell)
    chi_p = np.array([np.mean(d2p * phq) for phq in pots.phi_q], dtype=complex)
    chi_q = np.array([np.mean(d2q * php) for php in pots.phi_p], dtype=complex)
    psi_val = float(np.mean(d2p * q + 2 * dp * dq + p * d2q))
    psi = np.full(fit.m, psi_val)
    gt = gamma + 0.5 * (_real_sum(chi_p, "chi_p") + _real_sum(chi_q, "chi_q") + psi.sum())
    return KernelMoments(xi_p=float(dp.mean()), xi_q=float(dq.mean()), chi_p=chi_p, chi_q=chi_q,
                         psi=psi, gamma=gamma, gamma_tilde=gt, potentials=pots)


@dataclass(frozen=True)
class CoupledSystem:
    """Constant coefficients of  -D lap x + M x + s b_c = 0.

    Unknowns are ordered [phi_c, u_c, phi_p1..phi_pm, phi_q1..phi_qm].
    """
    names: tuple
    D: np.ndarray
    M: np.ndarray
    s: np.ndarray

    def symbol(self, k):
        """Fourier symbol D k^2 + M."""
        return self.D * k**2 + self.M


def coupled_system(alpha, moments, fit):
    m = fit.m
    n = 2 + 2 * m
    D = np.zeros((n, n), dtype=complex)
    M = np.zeros((n, n), dtype=complex)
    s = np.zeros(n)
    ip = 2 + np.arange(m)
    iq = 2 + m + np.arange(m)
    # lap phi + 2 alpha u + b_c = 0
    D[0, 0] = -1.0
    M[0, 1] = 2 * alpha
    s[0] = 1.0
    # -lap u + 2 gamma~ u + 2 alpha phi + sum_j (xi_p phi_qj + xi_q phi_pj) = 0
    D[1, 1] = 1.0
    M[1, 1] = 2 * moments.gamma_tilde
    M[1, 0] = 2 * alpha
    M[1, iq] = moments.xi_p
    M[1, ip] = moments.xi_q
    for j in range(m):
        for row, xi in ((ip[j], moments.xi_p), (iq[j], moments.xi_q)):
            D[row, row] = 1.0
            M[row, row] = fit.Q[j]
            M[row, 1] = xi
    names = ("phi_c", "u_c") + tuple(f"phi_p{j + 1}" for j in range(m)) + tuple(f"phi_q{j + 1}" for j in range(m))
    return CoupledSystem(names=names, D=D, M=M, s=s)


def screened_kernel_realspace(Q, r):
    """Real-space Green's function of (-lap + Q) in 3-D, exp(-sqrt(Q) r) / (4 pi r)."""
    r = np.asarray(r, dtype=float)
    return np.exp(-np.sqrt(Q) * r) / (4 * np.pi * r)
