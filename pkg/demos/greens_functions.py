"""Decay of the homogenized Green's functions for the aluminium moments."""

import numpy as np

from fieldqc.homogenized import build_model, decay_summary, green_phi, green_u

model = build_model(1 / 6, 0.1629, 0.9449)
print(model.regime.value, f"k+={model.k_plus:.6f} k-={model.k_minus:.6f}")
print(f"decay length {decay_summary(model).length:.3f} Bohr")

r = np.array([0.5, 1.0, 2.0, 5.0, 10.0, 20.0])
for ri, eu, ep in zip(r, green_u(model, r), green_phi(model, r)):
    print(f"r={ri:5.1f}  E_u={eu: .6e}  E_phi={ep: .6e}")

# the same pair of formulas covers every regime; pick gamma to move across
for gamma in (2.0, 1.0, 0.5):
    m = build_model(1.0, 0.5, gamma)
    print(f"gamma={gamma}: {m.regime.value}, E_u(1)={float(green_u(m, 1.0)):.6f}")
