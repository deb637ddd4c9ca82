# Fit a cubic B-spline surface to samples of a closed-form surface and export a mesh.
#
# Run:  python3 demos/03_surface.py [output-dir]

import sys
from pathlib import Path

import numpy as np

from matkaczmarz import SolverConfig
from matkaczmarz.surface import eval_surface, fit_surface, sample_surface, write_obj

out = Path(sys.argv[1] if len(sys.argv) > 1 else "surface-demo")
out.mkdir(parents=True, exist_ok=True)

# 100 x 40 data points on surface 2, fitted with a 30 x 30 control net.
grid = sample_surface(2, 100, 40)
for method in ("pm-rgrk", "nm-rgrk"):
    net, rep = fit_surface(grid, 30, SolverConfig(method=method, tol_rrn=5e-4, rng=0))
    print(f"{method}: {rep.final_iter} iterations, RRN {rep.final_rrn_recomputed:.2e}, "
          f"converged={rep.converged}")

# Evaluate the last fit on a finer grid and compare to the data at the samples.
mesh = eval_surface(net, u=grid.params_u, v=grid.params_v)
err = np.linalg.norm(mesh - grid.Q, axis=-1)
print(f"max point error {err.max():.3e}, mean {err.mean():.3e}")
write_obj(out / "fit.obj", eval_surface(net, u=np.linspace(0, 1, 120), v=np.linspace(0, 1, 60)))
print("mesh written to", out / "fit.obj")
