"""How large must a spherical cell be before the vacancy energy settles?

Electrostatic error falls like exp(-2 k+ R0); the elastic part only
algebraically, (r0/R0)^3, so the elastic tail governs large cells.
"""

from fieldqc import defectcell as dc
from fieldqc import elastic as el
from fieldqc.homogenized import build_model

a0 = 7.5
r0 = a0 / 2
model = build_model(1 / 6, 0.1629, 0.9449)

sweep = dc.cell_size_sweep(model, 1.0, r0, dc.default_radii(r0, a0, points=12), a0=a0)
for R0, ratio, energy, err in sweep.rows():
    print(f"R0={R0:7.3f}  R0/a0={ratio:5.2f}  E={energy:.9f}  rel={err:.2e}")

cross = dc.crossing_radius(model, r0)
print(f"electrostatic 1% crossing: {cross:.3f} Bohr = {cross / a0:.3f} a0")
print(f"elastic 1% crossing: R0/r0 = {el.crossing_ratio():.4f}")
print(el.residual_error_scales(model.k_plus, r0, 5 * a0))
