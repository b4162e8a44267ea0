"""Uniform periodic grid on a parallelepiped cell with Fourier differentiation."""

import numpy as np
import scipy.fft as sfft


class PeriodicGrid:
    """N^3 collocation grid in fractional coordinates of ``cell``.

    ``cell`` holds the cell vectors as columns (Bohr).  Point ``(i, j, k)``
    sits at ``cell @ (i, j, k) / N``.
    """

    def __init__(self, cell, n):
        self.cell = np.array(cell, dtype=float)
        self.n = int(n)
        self.volume = abs(np.linalg.det(self.cell))
        recip = 2.0 * np.pi * np.linalg.inv(self.cell).T
        m = np.fft.fftfreq(self.n, 1.0 / self.n)
        mi, mj, mk = np.meshgrid(m, m, m, indexing="ij")
        self.gvecs = np.einsum("ab,bijk->aijk", recip, np.stack([mi, mj, mk]))
        self.g2 = np.einsum("aijk,aijk->ijk", self.gvecs, self.gvecs)

    @property
    def shape(self):
        return (self.n,) * 3

    @property
    def spacing(self):
        """Largest distance between neighbouring points along a cell vector."""
        return np.linalg.norm(self.cell, axis=0).max() / self.n

    def points(self):
        s = np.arange(self.n) / self.n
        si, sj, sk = np.meshgrid(s, s, s, indexing="ij")
        return np.einsum("ab,bijk->aijk", self.cell, np.stack([si, sj, sk]))

    def fft(self, f):
        return sfft.fftn(f)

    def ifft(self, fh, real=True):
        out = sfft.ifftn(fh)
        return out.real if real else out

    def mean(self, f):
        return f.mean()

    def integrate(self, f):
        return f.mean() * self.volume

    def laplacian(self, f):
        return self.ifft(-self.g2 * self.fft(f))

    def poisson(self, rho):
        """Zero-mean solution of ``-lap(phi) = rho``; the mean of rho is ignored."""
        rh = self.fft(rho)
        with np.errstate(divide="ignore", invalid="ignore"):
            ph = np.where(self.g2 > 0, rh / self.g2, 0.0)
        return self.ifft(ph)

    def grad_sq_mean(self, f):
        """Cell average of |grad f|^2, by Parseval."""
        fh = self.fft(f)
        return float(np.sum(self.g2 * np.abs(fh) ** 2).real / self.n**6)

    def gradient(self, f):
        fh = self.fft(f)
        g = self.gvecs.copy()
        # odd derivative: drop Nyquist components
        h = self.n // 2
        for a in range(3):
            sl = [slice(None)] * 3
            sl[a] = h
            g[:, sl[0], sl[1], sl[2]] = 0.0
        return np.stack([self.ifft(1j * g[a] * fh) for a in range(3)])
