"""Dense kernels: norms, rank-one updates, Householder QR, one-sided Jacobi SVD,
pseudoinverses and a plain-text matrix format.

Matrices are ordinary C-ordered ``float64`` numpy arrays; :func:`as_mat`
is the single gate that enforces shape and finiteness.
"""

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .exceptions import SVDConvergenceError

__all__ = [
    "SvdResult",
    "as_mat",
    "frob_norm_sq",
    "row_norms_sq",
    "rank_one_update",
    "householder_qr",
    "svd",
    "pinv",
    "pinv_solution",
    "write_matrix",
    "read_matrix",
]

EPS = np.finfo(np.float64).eps
MAX_SWEEPS = 60


def as_mat(M, name="matrix"):
    """Return `M` as a C-contiguous 2-D float64 array, rejecting NaN/Inf."""
    M = np.ascontiguousarray(M, dtype=np.float64)
    if M.ndim == 1:
        M = M.reshape(1, -1)
    if M.ndim != 2 or M.shape[0] < 1 or M.shape[1] < 1:
        raise ValueError(f"{name} must be a non-empty 2-D array, got shape {M.shape}")
    if not np.all(np.isfinite(M)):
        raise ValueError(f"{name} has non-finite entries")
    return M


def frob_norm_sq(M):
    M = np.asarray(M, dtype=np.float64)
    return float(np.vdot(M, M))


def row_norms_sq(M):
    """Squared Euclidean norm of every row of `M`."""
    M = np.asarray(M, dtype=np.float64)
    return np.einsum("ij,ij->i", M, M)


def rank_one_update(M, scale, u, w):
    """In-place ``M += scale * outer(u, w)``; returns `M`."""
    u = np.asarray(u, dtype=np.float64)
    w = np.asarray(w, dtype=np.float64)
    if u.shape != (M.shape[0],) or w.shape != (M.shape[1],):
        raise ValueError(
            f"rank-one update of {M.shape} matrix needs vectors of length "
            f"{M.shape[0]} and {M.shape[1]}, got {u.shape} and {w.shape}"
        )
    if scale != 0.0:
        M += scale * np.outer(u, w)
    return M


def householder_qr(M):
    """Thin QR factorisation by Householder reflections.

    Parameters
    ----------
    M : (m, n) array with m >= n

    Returns
    -------
    Q : (m, n) array with orthonormal columns
    R : (n, n) upper triangular array with a nonnegative diagonal
    """
    R = np.array(M, dtype=np.float64)
    m, n = R.shape
    if m < n:
        raise ValueError(f"householder_qr needs rows >= cols, got {R.shape}")
    vs = []
    for k in range(n):
        x = R[k:, k]
        normx = np.linalg.norm(x)
        if normx == 0.0:
            vs.append(None)
            continue
        v = x.copy()
        v[0] += np.copysign(normx, x[0])
        v /= np.linalg.norm(v)
        R[k:, k:] -= 2.0 * np.outer(v, v @ R[k:, k:])
        vs.append(v)
    Q = np.eye(m, n)
    for k in reversed(range(n)):
        v = vs[k]
        if v is not None:
            Q[k:, :] -= 2.0 * np.outer(v, v @ Q[k:, :])
    R = np.triu(R[:n, :])
    signs = np.where(np.diag(R) < 0.0, -1.0, 1.0)
    return Q * signs, R * signs[:, None]


@dataclass
class SvdResult:
    """Thin singular value decomposition ``M = U diag(s) V^T``."""

    singular_values: np.ndarray
    left_vectors: np.ndarray
    right_vectors: np.ndarray
    numerical_rank: int

    @property
    def sigma_max(self):
        return float(self.singular_values[0])

    @property
    def sigma_min_nonzero(self):
        """Smallest singular value counted in the numerical rank (0 if rank 0)."""
        if self.numerical_rank == 0:
            return 0.0
        return float(self.singular_values[self.numerical_rank - 1])

    def reconstruct(self):
        return (self.left_vectors * self.singular_values) @ self.right_vectors.T


def _round_robin(n):
    # Each round is a set of disjoint column pairs; all rounds together cover
    # every pair exactly once.
    size = n + (n % 2)
    players = list(range(size))
    rounds = []
    for _ in range(size - 1):
        half = size // 2
        p = np.array(players[:half])
        q = np.array(players[size - 1 : half - 1 : -1])
        keep = (p < n) & (q < n)
        if keep.any():
            rounds.append((p[keep], q[keep]))
        players = [players[0], players[-1]] + players[1:-1]
    return rounds


def _complete_columns(U, good):
    # Replace columns not flagged `good` by an orthonormal completion.
    m, k = U.shape
    basis = [U[:, j] for j in range(k) if good[j]]
    out = U.copy()
    candidates = iter(range(m))
    for j in range(k):
        if good[j]:
            continue
        while True:
            e = np.zeros(m)
            e[next(candidates)] = 1.0
            for _ in range(2):
                for b in basis:
                    e -= (b @ e) * b
            nrm = np.linalg.norm(e)
            if nrm > 0.5:
                break
        e /= nrm
        basis.append(e)
        out[:, j] = e
    return out


def svd(M, rank_tol=None):
    """Thin SVD by one-sided (Hestenes) Jacobi rotations.

    Column pairs are swept in round-robin order so that each round rotates
    disjoint pairs at once.  The numerical rank counts singular values above
    ``rank_tol * sigma_1`` with ``rank_tol = max(rows, cols) * eps`` by default.

    Raises
    ------
    SVDConvergenceError
        If columns are not mutually orthogonal after ``MAX_SWEEPS`` sweeps.
    """
    M = as_mat(M)
    rows, cols = M.shape
    transposed = cols > rows
    W = np.array(M.T if transposed else M)
    # Work at unit scale so squared column norms neither underflow nor overflow.
    scale_m = float(np.max(np.abs(W)))
    if scale_m > 0.0:
        W /= scale_m
    m, n = W.shape
    V = np.eye(n)
    tol = max(m, n) * EPS
    # Columns below this squared norm are roundoff noise of a rank-deficient
    # input; their orthogonality is meaningless and they are left alone.
    negligible = (EPS * np.linalg.norm(W)) ** 2
    rounds = _round_robin(n)

    off = 0.0
    for sweep in range(1, MAX_SWEEPS + 1):
        off = 0.0
        for p, q in rounds:
            wp, wq = W[:, p], W[:, q]
            alpha = np.einsum("ij,ij->j", wp, wp)
            beta = np.einsum("ij,ij->j", wq, wq)
            gamma = np.einsum("ij,ij->j", wp, wq)
            scale = np.sqrt(alpha * beta)
            nz = (alpha > negligible) & (beta > negligible)
            ratio = np.zeros_like(gamma)
            ratio[nz] = np.abs(gamma[nz]) / scale[nz]
            off = max(off, float(ratio.max(initial=0.0)))
            act = ratio > tol
            if not act.any():
                continue
            p, q = p[act], q[act]
            alpha, beta, gamma = alpha[act], beta[act], gamma[act]
            zeta = (beta - alpha) / (2.0 * gamma)
            t = np.where(zeta >= 0.0, 1.0, -1.0) / (np.abs(zeta) + np.hypot(1.0, zeta))
            c = 1.0 / np.hypot(1.0, t)
            s = c * t
            wp, wq = W[:, p], W[:, q]
            W[:, p] = c * wp - s * wq
            W[:, q] = s * wp + c * wq
            vp, vq = V[:, p], V[:, q]
            V[:, p] = c * vp - s * vq
            V[:, q] = s * vp + c * vq
        if off <= tol:
            break
    else:
        raise SVDConvergenceError(MAX_SWEEPS, off)

    sigma = np.linalg.norm(W, axis=0)
    order = np.argsort(-sigma, kind="stable")
    sigma, W, V = sigma[order], W[:, order], V[:, order]
    unit_sigma = sigma
    sigma = sigma * scale_m
    if rank_tol is None:
        rank_tol = max(rows, cols) * EPS
    cutoff = rank_tol * sigma[0]
    rank = int(np.count_nonzero(sigma > cutoff)) if sigma[0] > 0.0 else 0
    good = sigma > cutoff if sigma[0] > 0.0 else np.zeros(n, dtype=bool)
    U = np.zeros_like(W)
    U[:, good] = W[:, good] / unit_sigma[good]
    if not good.all():
        U = _complete_columns(U, good)
    if transposed:
        U, V = V, U
    return SvdResult(sigma, U, V, rank)


def pinv(M, rank_tol=None):
    """Moore-Penrose pseudoinverse from :func:`svd`."""
    res = svd(M, rank_tol=rank_tol)
    r = res.numerical_rank
    U = res.left_vectors[:, :r]
    V = res.right_vectors[:, :r]
    return (V / res.singular_values[:r]) @ U.T


def pinv_solution(A, B, C):
    """Minimum-Frobenius-norm least-squares solution ``pinv(A) @ C @ pinv(B)``."""
    A, B, C = as_mat(A, "A"), as_mat(B, "B"), as_mat(C, "C")
    if A.shape[1] != B.shape[0] or C.shape != (A.shape[0], B.shape[1]):
        raise ValueError(
            f"non-conformal shapes A{A.shape} B{B.shape} C{C.shape} for AXB = C"
        )
    return pinv(A) @ C @ pinv(B)


def write_matrix(path, M):
    """Write `M` as CSV with ``# rows=`` / ``# cols=`` header lines.

    Values use 17 significant digits so a read-back is bit exact.
    """
    M = as_mat(M)
    lines = [f"# rows={M.shape[0]}", f"# cols={M.shape[1]}"]
    lines += [",".join(f"{v:.17g}" for v in row) for row in M]
    Path(path).write_text("\n".join(lines) + "\n")


def read_matrix(path):
    header = {}
    rows = []
    for raw in Path(path).read_text().splitlines():
        line = raw.strip()
        if not line:
            continue
        if line.startswith("#"):
            key, sep, val = line[1:].partition("=")
            if sep:
                header[key.strip()] = val.strip()
            continue
        rows.append([float(v) for v in line.split(",")])
    M = as_mat(np.array(rows, dtype=np.float64), str(path))
    if "rows" in header and "cols" in header:
        expect = (int(header["rows"]), int(header["cols"]))
        if M.shape != expect:
            raise ValueError(f"{path}: header says {expect}, data is {M.shape}")
    return M
