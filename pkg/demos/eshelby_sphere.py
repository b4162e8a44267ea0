"""Spherical inclusion in a finite ball: closed form against quadrature."""

from fieldqc import elastic as el

spec = el.ElasticSpec(mu=0.4, kappa=1.3, sigma0=0.7, rho=1.0, r0=2.0, R0=9.0)
t1, t2, t3 = el.solve_thetas(spec)
print(f"theta = {t1:.6e}, {t2:.6e}, {t3:.6e}")
print("checks:", el.verify_solution(spec))
print(f"E_el closed {el.energy_el(spec):.12e}  quadrature {el.energy_el_quadrature(spec):.12e}")
for R0 in (3.0, 6.0, 12.0, 24.0):
    s = spec.with_R0(R0)
    print(f"R0={R0:5.1f}  rel error {el.relative_error(s):.3e}  (r0/R0)^3 = {(spec.r0 / R0) ** 3:.3e}")
