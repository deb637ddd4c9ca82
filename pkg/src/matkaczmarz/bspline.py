"""Clamped B-spline bases: Cox-de Boor evaluation, knot vectors and
collocation matrices."""

import warnings
from dataclasses import dataclass

import numpy as np

__all__ = [
    "BSplineBasis",
    "uniform_knots",
    "averaging_knots",
    "chord_params",
    "basis_eval",
    "collocation_matrix",
    "schoenberg_whitney_ok",
]


@dataclass(frozen=True)
class BSplineBasis:
    degree: int
    knots: np.ndarray

    def __post_init__(self):
        knots = np.asarray(self.knots, dtype=np.float64)
        object.__setattr__(self, "knots", knots)
        k = self.degree
        if k < 0:
            raise ValueError("degree must be nonnegative")
        if knots.ndim != 1 or len(knots) < 2 * (k + 1):
            raise ValueError(f"need at least {2 * (k + 1)} knots for degree {k}")
        if np.any(np.diff(knots) < 0):
            raise ValueError("knot vector must be nondecreasing")
        if np.any(knots[: k + 1] != knots[0]) or np.any(knots[-(k + 1):] != knots[-1]):
            raise ValueError("knot vector must be clamped (end knots of multiplicity degree+1)")
        if knots[0] == knots[-1]:
            raise ValueError("knot vector spans an empty domain")

    @property
    def n_basis(self):
        return len(self.knots) - self.degree - 1

    @property
    def domain(self):
        return float(self.knots[self.degree]), float(self.knots[self.n_basis])

    def find_span(self, x):
        """Knot-span index ``s`` with ``knots[s] <= x < knots[s+1]`` (vectorised).

        The right domain end belongs to the last nonempty span.
        """
        x = np.asarray(x, dtype=np.float64)
        span = np.searchsorted(self.knots, x, side="right") - 1
        return np.clip(span, self.degree, self.n_basis - 1)


def uniform_knots(n_basis, degree=3, lo=0.0, hi=1.0):
    """Clamped knot vector with equally spaced interior knots."""
    if n_basis < degree + 1:
        raise ValueError(f"n_basis must be at least degree+1 = {degree + 1}")
    interior = np.linspace(lo, hi, n_basis - degree + 1)[1:-1]
    return np.concatenate([np.full(degree + 1, lo), interior, np.full(degree + 1, hi)])


def averaging_knots(params, n_basis, degree=3):
    """Clamped knots for least-squares approximation of ``len(params)`` samples.

    With ``d = len(params) / (n_basis - degree)``, interior knot ``j`` is the
    parameter sequence interpolated linearly at fractional index
    ``j*d - 1/2``.  Consecutive knots are ``d >= 1`` indices apart, so every
    knot span holds at least one parameter, and uniform parameters give
    knots symmetric about the midpoint.
    """
    params = np.asarray(params, dtype=np.float64)
    npar = len(params)
    if n_basis < degree + 1:
        raise ValueError(f"n_basis must be at least degree+1 = {degree + 1}")
    if n_basis > npar:
        raise ValueError(f"n_basis={n_basis} exceeds the number of parameters {npar}")
    d = npar / (n_basis - degree)
    pos = np.arange(1, n_basis - degree) * d - 0.5
    i = np.minimum(np.floor(pos).astype(int), npar - 2)
    a = pos - i
    interior = (1.0 - a) * params[i] + a * params[i + 1]
    lo, hi = params[0], params[-1]
    return np.concatenate([np.full(degree + 1, lo), interior, np.full(degree + 1, hi)])


def chord_params(Q, axis=0):
    """Chord-length parameters along `axis` of a point grid ``Q[i, j, :]``.

    Each grid line across the other direction gets its own normalised
    chord-length sequence; the sequences are averaged.  Lines of zero total
    length contribute uniform spacing.
    """
    Q = np.asarray(Q, dtype=np.float64)
    if Q.ndim == 2:
        Q = Q[:, :, None]
    if axis == 1:
        Q = Q.transpose(1, 0, 2)
    m = Q.shape[0]
    if m < 2:
        raise ValueError("need at least two points along the parameter direction")
    chords = np.linalg.norm(np.diff(Q, axis=0), axis=-1)  # (m-1, lines)
    cum = np.vstack([np.zeros((1, chords.shape[1])), np.cumsum(chords, axis=0)])
    total = cum[-1]
    uniform = np.linspace(0.0, 1.0, m)
    good = total > 0.0
    per_line = np.empty_like(cum)
    per_line[:, good] = cum[:, good] / total[good]
    per_line[:, ~good] = uniform[:, None]
    params = per_line.mean(axis=1)
    params[0], params[-1] = 0.0, 1.0
    return params


def _basis_funs(basis, x, span):
    # Triangular Cox-de Boor table for the degree+1 nonzero functions on each span.
    k = basis.degree
    U = basis.knots
    npts = x.shape[0]
    N = np.zeros((npts, k + 1))
    N[:, 0] = 1.0
    left = np.zeros((npts, k + 1))
    right = np.zeros((npts, k + 1))
    for j in range(1, k + 1):
        left[:, j] = x - U[span + 1 - j]
        right[:, j] = U[span + j] - x
        saved = np.zeros(npts)
        for r in range(j):
            temp = N[:, r] / (right[:, r + 1] + left[:, j - r])
            N[:, r] = saved + right[:, r + 1] * temp
            saved = left[:, j - r] * temp
        N[:, j] = saved
    return N


def _clamp_to_domain(basis, x):
    lo, hi = basis.domain
    outside = (x < lo) | (x > hi)
    if np.any(outside):
        warnings.warn(
            f"{int(outside.sum())} evaluation point(s) outside [{lo}, {hi}] clamped",
            RuntimeWarning,
            stacklevel=3,
        )
        x = np.clip(x, lo, hi)
    return x


def collocation_matrix(basis, params):
    """Matrix of basis values, row ``i`` holding all functions at ``params[i]``."""
    x = _clamp_to_domain(basis, np.atleast_1d(np.asarray(params, dtype=np.float64)))
    span = basis.find_span(x)
    N = _basis_funs(basis, x, span)
    out = np.zeros((x.shape[0], basis.n_basis))
    rows = np.arange(x.shape[0])[:, None]
    cols = span[:, None] - basis.degree + np.arange(basis.degree + 1)
    out[rows, cols] = N
    return out


def basis_eval(basis, x):
    """All `n_basis` function values at a single point `x`."""
    return collocation_matrix(basis, [float(x)])[0]


def schoenberg_whitney_ok(knots, params, degree=3):
    """True when every nonempty knot span of the domain holds a parameter."""
    knots = np.asarray(knots, dtype=np.float64)
    params = np.asarray(params, dtype=np.float64)
    n_basis = len(knots) - degree - 1
    for s in range(degree, n_basis):
        lo, hi = knots[s], knots[s + 1]
        if lo == hi:
            continue
        last = s == n_basis - 1
        inside = (params >= lo) & ((params <= hi) if last else (params < hi))
        if not inside.any():
            return False
    return True
