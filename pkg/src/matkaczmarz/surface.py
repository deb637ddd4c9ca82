"""Tensor-product cubic B-spline surface fitting with the greedy Kaczmarz solvers.

Fitting an ``m x p`` grid of points ``Q`` with an ``n x n`` control net is
three matrix equations ``A P_c B = Q_c`` (one per coordinate) sharing the
collocation matrices ``A`` (``m x n``) and ``B`` (``n x p``).  The solver
treats them as one stack: each step picks a single index pair from the
combined loss and updates all three control matrices with it.

Two test surfaces are built in, both sampled on a uniform ``(t, s)`` grid
with ``t`` running along rows and ``s`` along columns:

* surface 1, ``0.5 <= t <= 1``, ``0 <= s <= 2 pi``::

      x = -2 t cos(s) + 2 cos(s) / t - 2 t^3 cos(3 s) / 3
      y =  6 t sin(s) - 2 sin(s) / t - 2 t^3 sin(3 s) / 3
      z =  4 log(t)

* surface 2, ``-pi <= t <= pi``, ``-2 pi <= s <= 2 pi``::

      x = (2 + cos(t)) (s / 3 - sin(s))
      y = (2 + cos(t - 2 pi / 3)) (cos(s) - 1)
      z = (2 + cos(t + 2 pi / 3)) (cos(s) - 1)
"""

import json
import warnings
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .bspline import (
    BSplineBasis,
    averaging_knots,
    chord_params,
    collocation_matrix,
    schoenberg_whitney_ok,
    uniform_knots,
)
from .solver import solve_stack

__all__ = [
    "SurfaceGrid",
    "ControlNet",
    "SURFACES",
    "surface_point",
    "sample_surface",
    "init_control_net",
    "fitting_matrices",
    "fit_surface",
    "eval_surface",
    "write_obj",
    "write_grid_csv",
]


def _surface1(t, s):
    x = -2.0 * t * np.cos(s) + 2.0 * np.cos(s) / t - 2.0 * t ** 3 * np.cos(3.0 * s) / 3.0
    y = 6.0 * t * np.sin(s) - 2.0 * np.sin(s) / t - 2.0 * t ** 3 * np.sin(3.0 * s) / 3.0
    z = 4.0 * np.log(t) + 0.0 * s
    return np.stack([x, y, z], axis=-1)


def _surface2(t, s):
    x = (2.0 + np.cos(t)) * (s / 3.0 - np.sin(s))
    y = (2.0 + np.cos(t - 2.0 * np.pi / 3.0)) * (np.cos(s) - 1.0)
    z = (2.0 + np.cos(t + 2.0 * np.pi / 3.0)) * (np.cos(s) - 1.0)
    return np.stack([x, y, z], axis=-1)


# id -> (function, t range, s range)
SURFACES = {
    1: (_surface1, (0.5, 1.0), (0.0, 2.0 * np.pi)),
    2: (_surface2, (-np.pi, np.pi), (-2.0 * np.pi, 2.0 * np.pi)),
}


def surface_point(which, t, s):
    """Closed-form point(s) of a test surface at parameters ``(t, s)``."""
    if which not in SURFACES:
        raise ValueError(f"unknown surface {which!r}; choose 1 or 2")
    return SURFACES[which][0](np.asarray(t, dtype=np.float64), np.asarray(s, dtype=np.float64))


@dataclass(frozen=True, eq=False)
class SurfaceGrid:
    """Data points ``Q[i, j] = (x, y, z)`` with normalised sampling parameters.

    `params_u` (length ``m``) and `params_v` (length ``p``) map the sampling
    grid onto ``[0, 1]``; `t` and `s` keep the raw surface parameters.
    """

    Q: np.ndarray
    params_u: np.ndarray
    params_v: np.ndarray
    which: int | None = None
    t: np.ndarray | None = None
    s: np.ndarray | None = None

    def __post_init__(self):
        Q = np.asarray(self.Q, dtype=np.float64)
        if Q.ndim != 3 or Q.shape[2] != 3:
            raise ValueError(f"Q must have shape (m, p, 3), got {Q.shape}")
        object.__setattr__(self, "Q", Q)
        for name, n in (("params_u", Q.shape[0]), ("params_v", Q.shape[1])):
            par = np.asarray(getattr(self, name), dtype=np.float64)
            if par.shape != (n,):
                raise ValueError(f"{name} must have length {n}")
            if par[0] != 0.0 or par[-1] != 1.0 or np.any(np.diff(par) <= 0.0):
                raise ValueError(f"{name} must increase strictly from 0 to 1")
            object.__setattr__(self, name, par)

    @property
    def shape(self):
        return self.Q.shape[0], self.Q.shape[1]


@dataclass(eq=False)
class ControlNet:
    """x, y and z control matrices with the bases they refer to."""

    P1: np.ndarray
    P2: np.ndarray
    P3: np.ndarray
    basis_u: BSplineBasis | None = None
    basis_v: BSplineBasis | None = None

    def __post_init__(self):
        self.P1, self.P2, self.P3 = (np.asarray(P, dtype=np.float64) for P in (self.P1, self.P2, self.P3))
        if not (self.P1.shape == self.P2.shape == self.P3.shape) or self.P1.ndim != 2:
            raise ValueError("control matrices must be 2-D with equal shapes")

    @classmethod
    def from_stack(cls, P, basis_u=None, basis_v=None):
        return cls(P[0], P[1], P[2], basis_u, basis_v)

    def stack(self):
        return np.stack([self.P1, self.P2, self.P3])

    @property
    def points(self):
        """Control points as an ``(n_u, n_v, 3)`` array."""
        return np.stack([self.P1, self.P2, self.P3], axis=-1)


def sample_surface(which, m, p):
    """Sample a test surface on a uniform ``m x p`` grid of ``(t, s)``."""
    if which not in SURFACES:
        raise ValueError(f"unknown surface {which!r}; choose 1 or 2")
    if m < 2 or p < 2:
        raise ValueError("need m, p >= 2")
    f, (t0, t1), (s0, s1) = SURFACES[which]
    t = np.linspace(t0, t1, m)
    s = np.linspace(s0, s1, p)
    T, S = np.meshgrid(t, s, indexing="ij")
    return SurfaceGrid(f(T, S), np.linspace(0.0, 1.0, m), np.linspace(0.0, 1.0, p), which, t, s)


def _subsample_index(length, n):
    # 1-based f(1) = 1, f(i) = floor(length * i / n); returned 0-based.
    i = np.arange(1, n + 1)
    f = np.where(i == 1, 1, (length * i) // n)
    if np.any(f > length):
        warnings.warn("initial control index exceeds the grid and was clamped", RuntimeWarning,
                      stacklevel=3)
        f = np.minimum(f, length)
    return f - 1


def init_control_net(Q, n):
    """Initial ``n x n`` control net picked from the data grid.

    Control point ``(i, j)`` is ``Q[f1(i), f2(j)]`` with ``f(1) = 1`` and
    ``f(i) = floor(m i / n)`` otherwise (1-based; ``p`` in place of ``m`` for ``f2``).
    """
    Q = Q.Q if isinstance(Q, SurfaceGrid) else np.asarray(Q, dtype=np.float64)
    m, p = Q.shape[:2]
    if n < 1 or n > min(m, p):
        raise ValueError(f"need 1 <= n <= min(m, p) = {min(m, p)}, got {n}")
    sub = Q[np.ix_(_subsample_index(m, n), _subsample_index(p, n))]
    return ControlNet(sub[..., 0], sub[..., 1], sub[..., 2])


def fitting_matrices(grid, n, params="grid", knots="averaging", degree=3):
    """Collocation matrices ``A`` (``m x n``) and ``B`` (``n x p``) and their bases.

    ``params="grid"`` uses the grid's own sampling parameters,
    ``params="chord"`` recomputes averaged chord-length parameters from the
    points.  ``knots`` is ``"averaging"`` or ``"uniform"``.
    """
    if params == "grid":
        u, v = grid.params_u, grid.params_v
    elif params == "chord":
        u, v = chord_params(grid.Q, axis=0), chord_params(grid.Q, axis=1)
    else:
        raise ValueError(f"params must be 'grid' or 'chord', got {params!r}")
    if knots == "averaging":
        ku, kv = averaging_knots(u, n, degree), averaging_knots(v, n, degree)
    elif knots == "uniform":
        ku, kv = uniform_knots(n, degree), uniform_knots(n, degree)
    else:
        raise ValueError(f"knots must be 'averaging' or 'uniform', got {knots!r}")
    if not (schoenberg_whitney_ok(ku, u, degree) and schoenberg_whitney_ok(kv, v, degree)):
        warnings.warn("a knot span holds no parameter; collocation matrix is rank deficient",
                      RuntimeWarning, stacklevel=2)
    bu, bv = BSplineBasis(degree, ku), BSplineBasis(degree, kv)
    A = collocation_matrix(bu, u)
    B = collocation_matrix(bv, v).T
    return A, B, bu, bv


def fit_surface(grid, n, config, params="grid", knots="averaging", rrn_norm="unsquared", X0=None):
    """Fit an ``n x n`` cubic control net to `grid`.

    The three coordinate equations are solved jointly; the relative residual
    is ``E_k / E_0`` with ``E_k`` the sum over coordinates of
    ``|Q_c - A P_c B|_F`` (``rrn_norm="squared"`` sums squares instead).
    The iteration starts from :func:`init_control_net` unless `X0` is given.

    Returns
    -------
    (ControlNet, ConvergenceReport)
    """
    A, B, bu, bv = fitting_matrices(grid, n, params, knots)
    C = np.moveaxis(grid.Q, -1, 0)
    if X0 is None:
        X0 = init_control_net(grid.Q, n).stack()
    report = solve_stack(A, B, C, config, X0=X0, rrn_norm=rrn_norm)
    return ControlNet.from_stack(report.x_final, bu, bv), report


def eval_surface(net, basis_u=None, basis_v=None, u=None, v=None):
    """Evaluate the tensor-product surface on the grid ``u x v``.

    Bases default to those stored on `net`; `u` and `v` default to 50
    equally spaced points over each domain.  Returns ``(len(u), len(v), 3)``.
    """
    bu = basis_u if basis_u is not None else net.basis_u
    bv = basis_v if basis_v is not None else net.basis_v
    if bu is None or bv is None:
        raise ValueError("bases are required")
    u = np.linspace(*bu.domain, 50) if u is None else np.asarray(u, dtype=np.float64)
    v = np.linspace(*bv.domain, 50) if v is None else np.asarray(v, dtype=np.float64)
    Nu = collocation_matrix(bu, u)
    Nv = collocation_matrix(bv, v)
    return np.stack([Nu @ P @ Nv.T for P in (net.P1, net.P2, net.P3)], axis=-1)


def write_obj(path, mesh):
    """Write an ``(r, c, 3)`` point grid as an OBJ file of quads."""
    mesh = np.asarray(mesh, dtype=np.float64)
    r, c = mesh.shape[:2]
    lines = [f"v {x:.17g} {y:.17g} {z:.17g}" for x, y, z in mesh.reshape(-1, 3)]
    for i in range(r - 1):
        for j in range(c - 1):
            a = i * c + j + 1
            lines.append(f"f {a} {a + 1} {a + c + 1} {a + c}")
    Path(path).write_text("\n".join(lines) + "\n")


def write_grid_csv(path, mesh):
    """Write an ``(r, c, 3)`` point grid as CSV rows ``i,j,x,y,z``."""
    mesh = np.asarray(mesh, dtype=np.float64)
    lines = ["i,j,x,y,z"]
    for i in range(mesh.shape[0]):
        for j in range(mesh.shape[1]):
            x, y, z = mesh[i, j]
            lines.append(f"{i},{j},{x:.17g},{y:.17g},{z:.17g}")
    Path(path).write_text("\n".join(lines) + "\n")


def fit_summary(which, grid, n, report):
    m, p = grid.shape
    return {
        "surface": which,
        "m": m,
        "p": p,
        "n": n,
        "method": report.method,
        "theta": report.theta,
        "alpha": report.alpha,
        "beta": report.beta,
        "iters": report.final_iter,
        "converged": report.converged,
        "final_rrn": report.final_rrn_recomputed,
        "seed": report.seed,
        "elapsed_seconds": report.elapsed_seconds,
    }


def write_summary(path, summary):
    Path(path).write_text(json.dumps(summary, indent=2, sort_keys=True) + "\n")
