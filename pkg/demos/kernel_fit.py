"""Fit a partial-fraction kernel and watch the residual fall with m."""

import numpy as np

from fieldqc import kernelfit as kf

k = np.linspace(0.0, 8.0, 80)
samples = kf.KernelSamples(k, 1 - np.exp(-k**2 / 4) * np.cos(k / 2), provenance="synthetic")
for m in (1, 2, 3):
    fit = kf.fit_partial_fractions(samples, m)
    print(f"m={m} residual={fit.residual:.2e}  Q={np.round(fit.Q, 4)}")

# screened solves of a single cosine mode
cell = np.diag([6.0, 6.0, 6.0])
fit = kf.fit_partial_fractions(kf.KernelSamples.from_terms(k, [0.7], [1.9]), 1)
x = np.indices((16, 16, 16)) * 6.0 / 16
p = np.cos(2 * np.pi * x[0] / 6.0)
pot = kf.solve_predictor_potentials(fit, p, p, cell).phi_p[0].real
print(f"peak potential {pot.max():.6f}, hand value {0.7 * 1.9 / ((2 * np.pi / 6) ** 2 + 1.9):.6f}")
