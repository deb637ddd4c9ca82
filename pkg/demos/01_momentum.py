# Greedy Kaczmarz with and without momentum on a dense random equation A X B = C.
#
# Run:  python3 demos/01_momentum.py

import numpy as np

from matkaczmarz import RngSpec, SolverConfig, generate, solve

# A 200x25 and B 25x50 with standard normal entries and a random solution.
inst = generate("dense", 200, 25, 50, RngSpec(seed=1))
print(inst.label, "shape (m, n, p) =", inst.shape)

# Same sampling stream for every method, default parameters:
# me-rgrk (no momentum), pm-rgrk (alpha, beta) = (0.9, 0.3), nm-rgrk (0.8, 0.5).
reports = {}
for method in ("me-rgrk", "pm-rgrk", "nm-rgrk"):
    rep = solve(inst, SolverConfig(method=method, theta=0.9, tol_rrn=1e-5, rng=1))
    reports[method] = rep
    print(f"{method:8s} iterations={rep.final_iter:6d}  rrn={rep.final_rrn_recomputed:.2e}  "
          f"error={rep.error_to_oracle:.2e}  {rep.elapsed_seconds:.2f}s")

base = reports["me-rgrk"]
for method in ("pm-rgrk", "nm-rgrk"):
    print(f"iteration ratio me/{method[:2]} = {base.final_iter / reports[method].final_iter:.2f}")

# The history holds (iteration, rrn, seconds) every 10 steps; print a coarse trace.
print("\niteration   " + "  ".join(f"{m:>9s}" for m in reports))
for k in (0, 1000, 2000, 4000, 6000, 8000):
    row = []
    for rep in reports.values():
        hist = np.array(rep.history)
        hit = hist[hist[:, 0] == k]
        row.append(f"{hit[0, 1]:9.2e}" if len(hit) else f"{'-':>9s}")
    print(f"{k:9d}   " + "  ".join(row))
