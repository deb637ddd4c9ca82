"""Seeded generators for consistent test instances of ``A X B = C``.

Four families are provided: dense Gaussian, sparse Gaussian (density 1/n),
2x2 block-repeated uniform, and prescribed-rank products ``U D V^T``.
Random streams come from numpy's PCG64 seeded through a ``SeedSequence``
built from ``(seed, stream_id)``, so instances are reproducible bit for bit
on any platform.
"""

import json
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path

import numpy as np

from .exceptions import InstanceError
from .linalg import as_mat, frob_norm_sq, householder_qr, pinv_solution, read_matrix, write_matrix

__all__ = [
    "RngSpec",
    "ProblemInstance",
    "gen_dense",
    "gen_sparse",
    "gen_block",
    "gen_lowrank",
    "generate",
    "FAMILIES",
    "save_instance",
    "load_instance",
]

CONSISTENCY_TOL = 1e-18


@dataclass(frozen=True)
class RngSpec:
    seed: int = 0
    stream_id: int = 0

    def generator(self):
        ss = np.random.SeedSequence([int(self.seed) & 0xFFFFFFFFFFFFFFFF, int(self.stream_id)])
        return np.random.Generator(np.random.PCG64(ss))


@dataclass(frozen=True, eq=False)
class ProblemInstance:
    """Matrices of a consistent equation ``A X B = C``.

    ``x_star`` is the generating solution when known.  The minimum-norm
    solution (the limit of the Kaczmarz iterations started from zero) is
    available as :attr:`oracle`; the two coincide for full-rank families.
    """

    A: np.ndarray
    B: np.ndarray
    C: np.ndarray
    x_star: np.ndarray | None = None
    label: str = ""
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        A, B, C = as_mat(self.A, "A"), as_mat(self.B, "B"), as_mat(self.C, "C")
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "B", B)
        object.__setattr__(self, "C", C)
        m, n = A.shape
        if B.shape[0] != n:
            raise InstanceError("conformal shapes", f"A is {A.shape}, B is {B.shape}")
        p = B.shape[1]
        if C.shape != (m, p):
            raise InstanceError("conformal shapes", f"C is {C.shape}, expected {(m, p)}")
        if m < n or p < n:
            raise InstanceError("m >= n and p >= n", f"(m, n, p) = {(m, n, p)}")
        zero_rows = np.flatnonzero(~A.any(axis=1))
        if zero_rows.size:
            raise InstanceError("no zero row in A", f"rows {zero_rows[:5].tolist()}")
        zero_cols = np.flatnonzero(~B.any(axis=0))
        if zero_cols.size:
            raise InstanceError("no zero column in B", f"columns {zero_cols[:5].tolist()}")
        if self.x_star is not None:
            X = as_mat(self.x_star, "x_star")
            if X.shape != (n, n):
                raise InstanceError("x_star is n x n", f"got {X.shape}")
            object.__setattr__(self, "x_star", X)
            rel = frob_norm_sq(C - A @ X @ B) / max(frob_norm_sq(C), np.finfo(float).tiny)
            if rel > CONSISTENCY_TOL:
                raise InstanceError("consistency C = A x_star B", f"relative residual^2 {rel:.2e}")

    @property
    def shape(self):
        """``(m, n, p)``."""
        return self.A.shape[0], self.A.shape[1], self.B.shape[1]

    @cached_property
    def oracle(self):
        return pinv_solution(self.A, self.B, self.C)


def _dims(m, n, p):
    m, n, p = int(m), int(n), int(p)
    if n < 1 or m < n or p < n:
        raise ValueError(f"need m, p >= n >= 1, got (m, n, p) = {(m, n, p)}")
    return m, n, p


def _finish(A, B, X, label, rng, meta):
    C = A @ X @ B
    meta = {"seed": rng.seed, "stream_id": rng.stream_id, **meta}
    return ProblemInstance(A, B, C, X, label=label, meta=meta)


def gen_dense(m, n, p, rng=RngSpec()):
    """Standard normal `A`, `B` and solution."""
    m, n, p = _dims(m, n, p)
    g = rng.generator()
    A = g.standard_normal((m, n))
    B = g.standard_normal((n, p))
    X = g.standard_normal((n, n))
    return _finish(A, B, X, f"dense-{m}x{n}x{p}", rng, {"family": "dense"})


def gen_sparse(m, n, p, rng=RngSpec()):
    """Sparse normal `A` with density ``1/n`` (about `m` nonzeros), stored dense.

    Nonzero positions are independent Bernoulli(1/n) draws.  A row left
    empty gets one normal entry in a random column.
    """
    m, n, p = _dims(m, n, p)
    g = rng.generator()
    mask = g.random((m, n)) < 1.0 / n
    A = np.where(mask, g.standard_normal((m, n)), 0.0)
    for i in np.flatnonzero(~A.any(axis=1)):
        A[i, g.integers(n)] = g.standard_normal()
    B = g.standard_normal((n, p))
    X = g.standard_normal((n, n))
    return _finish(A, B, X, f"sparse-{m}x{n}x{p}", rng, {"family": "sparse"})


def gen_block(m, n, p, rng=RngSpec()):
    """``A = [[A1, A1], [A1, A1]]`` with uniform(0, 1) `A1`; rank(A) <= n/2."""
    m, n, p = _dims(m, n, p)
    if m % 2 or n % 2:
        raise ValueError(f"block family needs even m and n, got m={m}, n={n}")
    g = rng.generator()
    A1 = g.random((m // 2, n // 2))
    A = np.block([[A1, A1], [A1, A1]])
    B = g.standard_normal((n, p))
    X = g.standard_normal((n, n))
    return _finish(A, B, X, f"block-{m}x{n}x{p}", rng, {"family": "block"})


def _smatrix(g, rows, cols, rank):
    U, _ = householder_qr(g.standard_normal((rows, rank)))
    V, _ = householder_qr(g.standard_normal((cols, rank)))
    d = 1.0 + 2.0 * g.random(rank)
    return (U * d) @ V.T


def gen_lowrank(m, n, p, r1, r2, rng=RngSpec()):
    """Rank-`r1` `A` and rank-`r2` `B` with singular values in [1, 3].

    The solution is ``A^T Z B^T`` for normal `Z`, so it lies in the range
    that the iterations explore from a zero start and equals the
    minimum-norm solution.
    """
    m, n, p = _dims(m, n, p)
    if not (1 <= r1 <= n and 1 <= r2 <= n):
        raise ValueError(f"ranks must satisfy 1 <= r1, r2 <= n={n}, got {r1}, {r2}")
    g = rng.generator()
    A = _smatrix(g, m, n, r1)
    B = _smatrix(g, n, p, r2)
    X = A.T @ g.standard_normal((m, p)) @ B.T
    return _finish(A, B, X, f"lowrank-{m}x{n}x{p}-r{r1}-{r2}", rng,
                   {"family": "lowrank", "r1": r1, "r2": r2})


FAMILIES = {
    "dense": gen_dense,
    "sparse": gen_sparse,
    "block": gen_block,
    "lowrank": gen_lowrank,
}


def generate(family, m, n, p, rng=RngSpec(), r1=None, r2=None):
    """Dispatch to a generator by family name."""
    if family not in FAMILIES:
        raise ValueError(f"unknown family {family!r}; choose from {sorted(FAMILIES)}")
    if family == "lowrank":
        return gen_lowrank(m, n, p, r1 if r1 is not None else n, r2 if r2 is not None else n, rng)
    return FAMILIES[family](m, n, p, rng)


def save_instance(instance, out_dir):
    """Write ``A.csv``, ``B.csv``, ``C.csv``, optional ``Xstar.csv`` and ``meta.json``."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written = []
    for name, M in (("A", instance.A), ("B", instance.B), ("C", instance.C), ("Xstar", instance.x_star)):
        if M is None:
            continue
        write_matrix(out / f"{name}.csv", M)
        written.append(out / f"{name}.csv")
    m, n, p = instance.shape
    meta = {"label": instance.label, "m": m, "n": n, "p": p, **instance.meta}
    (out / "meta.json").write_text(json.dumps(meta, sort_keys=True) + "\n")
    written.append(out / "meta.json")
    return written


def load_instance(in_dir):
    d = Path(in_dir)
    meta_path = d / "meta.json"
    meta = json.loads(meta_path.read_text()) if meta_path.exists() else {}
    xs = d / "Xstar.csv"
    return ProblemInstance(
        read_matrix(d / "A.csv"),
        read_matrix(d / "B.csv"),
        read_matrix(d / "C.csv"),
        read_matrix(xs) if xs.exists() else None,
        label=meta.pop("label", d.name),
        meta={k: v for k, v in meta.items() if k not in ("m", "n", "p")},
    )
