# Convergence constants of a small instance and how a real run compares to them.
#
# Run:  python3 demos/02_theory.py

import numpy as np

from matkaczmarz import RngSpec, generate
from matkaczmarz.theory import (
    error_bound_curve,
    mean_error_trace,
    rate_factors,
    spectral_bounds,
)

inst = generate("dense", 20, 5, 10, RngSpec(3))
sb = spectral_bounds(inst.A, inst.B)
print(f"rho_tilde = {sb.rho_tilde:.3e}  (sigma_r(A)={sb.sigma_r_A:.3f}, sigma_r(B)={sb.sigma_r_B:.3f})")

# Momentum ranges.  beta_max keeps t1 + t2 < 1, so q1 < 1; the commonly
# quoted heavy-ball range is far wider and lets q1 exceed one.
for method, alpha in (("pm-rgrk", 0.9), ("nm-rgrk", 0.8)):
    f = rate_factors(method, alpha, 0.0, sb.rho_tilde)
    print(f"{method}: alpha={alpha}  beta_max={f.beta_max:.3e}  quoted bound={f.beta_max_stated:.3e}")

wide = rate_factors("pm-rgrk", 0.9, 0.1, sb.rho_tilde)
print(f"pm-rgrk at beta=0.1: q1 = {wide.q1:.3f}, admissible = {wide.params_admissible}")

# Inside the admissible range the bound is a slowly decaying geometric curve.
beta = rate_factors("pm-rgrk", 0.9, 0.0, sb.rho_tilde).beta_max / 2
f = rate_factors("pm-rgrk", 0.9, beta, sb.rho_tilde)
F0 = float(np.vdot(inst.oracle, inst.oracle))
curve = error_bound_curve(f, F0, 100)
mean = mean_error_trace(inst, "pm-rgrk", 0.9, beta, runs=200, k_max=100)
print(f"\nbeta = {beta:.2e}, q1 = {f.q1:.6f}")
print("   k   mean |X_k - X*|^2      bound")
for k in (0, 10, 25, 50, 100):
    print(f"{k:4d}   {mean[k]:16.4e}   {curve[k]:.4e}")
