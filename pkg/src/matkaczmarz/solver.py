"""Relaxed greedy randomized Kaczmarz iterations for ``A X B = C``.

Three update rules share one greedy index selection:

* ``me-rgrk``  plain Kaczmarz projection onto the selected scalar equation
  ``a_i^T X b_j = C_ij``;
* ``pm-rgrk``  the same step scaled by ``alpha`` plus the heavy-ball term
  ``beta * (X_k - X_{k-1})``;
* ``nm-rgrk``  a scaled step producing ``Y_{k+1}`` followed by the
  extrapolation ``X_{k+1} = Y_{k+1} + beta * (Y_{k+1} - Y_k)``.

The residual ``C - A X B`` is never recomputed per step.  Each update of
``X`` by ``c * a_i b_j^T`` changes the residual by ``-c * (A a_i)(B^T b_j)^T``,
so the residual is carried along with rank-one updates and refreshed from
scratch every ``refresh_period`` steps.

The engine works on a stack of ``q`` right-hand sides sharing ``A`` and
``B``; the loss of an index pair is then summed over the stack.  Ordinary
solves use ``q = 1``.
"""

import time
import warnings
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from .exceptions import DivergenceError, InvariantError, ResidualDriftError
from .linalg import as_mat, row_norms_sq
from .problems import RngSpec

__all__ = [
    "Method",
    "Sampling",
    "DEFAULT_PARAMS",
    "SolverConfig",
    "SolverState",
    "ConvergenceReport",
    "IterationInfo",
    "loss_matrix",
    "greedy_threshold",
    "build_index_set",
    "sample_index",
    "selection_probabilities",
    "me_rgrk_step",
    "pm_rgrk_step",
    "nm_rgrk_step",
    "maintain_residual",
    "solve",
    "solve_stack",
]

SELECTION_SLACK = 1e-12
DRIFT_LIMIT = 1e-9


class Method(str, Enum):
    ME_RGRK = "me-rgrk"
    PM_RGRK = "pm-rgrk"
    NM_RGRK = "nm-rgrk"


class Sampling(str, Enum):
    PROPORTIONAL = "proportional"
    UNIFORM = "uniform"


# (alpha, beta) used when a config leaves them unset.
DEFAULT_PARAMS = {
    Method.ME_RGRK: (1.0, 0.0),
    Method.PM_RGRK: (0.9, 0.3),
    Method.NM_RGRK: (0.8, 0.5),
}


@dataclass
class SolverConfig:
    """Run parameters.

    `alpha` and `beta` default per method; for ``me-rgrk`` they are fixed at
    1 and 0.  ``tol_rrn = 0`` runs until `max_iters` unless the residual
    vanishes exactly.
    """

    method: Method = Method.ME_RGRK
    theta: float = 0.9
    alpha: float | None = None
    beta: float | None = None
    tol_rrn: float = 1e-5
    max_iters: int = 100_000
    rng: RngSpec = field(default_factory=lambda: RngSpec(0, 1))
    refresh_period: int = 5000
    sampling: Sampling = Sampling.PROPORTIONAL
    history_stride: int = 10
    gram_budget_bytes: int = 512 * 2**20

    def __post_init__(self):
        self.method = Method(self.method)
        self.sampling = Sampling(self.sampling)
        if isinstance(self.rng, int):
            self.rng = RngSpec(self.rng, 1)
        a0, b0 = DEFAULT_PARAMS[self.method]
        if self.method is Method.ME_RGRK:
            self.alpha, self.beta = a0, b0
        else:
            self.alpha = a0 if self.alpha is None else float(self.alpha)
            self.beta = b0 if self.beta is None else float(self.beta)
        if not 0.0 < self.theta <= 1.0:
            raise ValueError(f"theta must lie in (0, 1], got {self.theta}")
        if self.tol_rrn < 0.0:
            raise ValueError(f"tol_rrn must be nonnegative, got {self.tol_rrn}")
        if self.max_iters < 1 or self.refresh_period < 1 or self.history_stride < 1:
            raise ValueError("max_iters, refresh_period and history_stride must be >= 1")
        if self.beta < 0.0:
            raise ValueError(f"beta must be nonnegative, got {self.beta}")
        if self.method is not Method.ME_RGRK and not 0.0 < self.alpha < 2.0:
            warnings.warn(
                f"step size alpha={self.alpha} outside (0, 2); convergence theory does not apply",
                RuntimeWarning,
                stacklevel=3,
            )


@dataclass
class ConvergenceReport:
    """Outcome of one run.

    `history` holds ``(iteration, rrn, elapsed_seconds)`` rows computed from
    the maintained residual; `final_rrn_recomputed` uses a fresh residual.
    """

    method: str
    theta: float
    alpha: float
    beta: float
    seed: int
    history: list
    final_iter: int
    final_rrn_recomputed: float
    converged: bool
    x_final: np.ndarray
    error_to_oracle: float | None = None
    elapsed_seconds: float = 0.0
    max_drift: float = 0.0
    drift_log: list = field(default_factory=list)

    def summary(self):
        return {
            "method": self.method,
            "theta": self.theta,
            "alpha": self.alpha,
            "beta": self.beta,
            "iters": self.final_iter,
            "converged": self.converged,
            "final_rrn": self.final_rrn_recomputed,
            "error_to_oracle": self.error_to_oracle,
            "seed": self.seed,
            "elapsed_seconds": self.elapsed_seconds,
            "max_drift": self.max_drift,
        }


@dataclass(eq=False)
class SolverState:
    """Iterates, maintained residuals and cached norms of a run.

    Arrays carry a leading stack axis: ``X`` is ``(q, n, n)`` and ``R`` is
    ``(q, m, p)``.  ``X_prev``/``R_prev`` exist for the heavy-ball method,
    ``Y``/``RY`` (the auxiliary sequence and its residual) for Nesterov.
    """

    A: np.ndarray
    B: np.ndarray
    C: np.ndarray
    X: np.ndarray
    R: np.ndarray
    a_norms: np.ndarray
    b_norms: np.ndarray
    a_frob_sq: float
    b_frob_sq: float
    X_prev: np.ndarray | None = None
    R_prev: np.ndarray | None = None
    Y: np.ndarray | None = None
    RY: np.ndarray | None = None
    gram_A: np.ndarray | None = None
    gram_B: np.ndarray | None = None
    iter: int = 0

    @classmethod
    def start(cls, A, B, C, X0=None, method=Method.ME_RGRK, gram_budget_bytes=512 * 2**20):
        A, B = as_mat(A, "A"), as_mat(B, "B")
        C = np.asarray(C, dtype=np.float64)
        if C.ndim == 2:
            C = C[None]
        m, n = A.shape
        p = B.shape[1]
        q = C.shape[0]
        if X0 is None:
            X = np.zeros((q, n, n))
        else:
            X = np.array(X0, dtype=np.float64).reshape(q, n, n)
        a_norms = row_norms_sq(A)
        b_norms = row_norms_sq(B.T)
        if np.any(a_norms <= 0.0) or np.any(b_norms <= 0.0):
            raise InvariantError("zero row in A or zero column in B")
        state = cls(A, B, C, X, C - A @ X @ B, a_norms, b_norms,
                    float(a_norms.sum()), float(b_norms.sum()))
        if 8 * (m * m + p * p) <= gram_budget_bytes:
            state.gram_A = A @ A.T
            state.gram_B = B.T @ B
        method = Method(method)
        if method is Method.PM_RGRK:
            state.X_prev = state.X.copy()
            state.R_prev = state.R.copy()
        elif method is Method.NM_RGRK:
            state.Y = state.X.copy()
            state.RY = state.R.copy()
        return state

    def fresh_residual(self, X):
        return self.C - self.A @ X @ self.B

    def refresh(self):
        """Recompute every maintained residual; return the largest drift."""
        drift = 0.0
        for xname, rname in (("X", "R"), ("X_prev", "R_prev"), ("Y", "RY")):
            X = getattr(self, xname)
            if X is None:
                continue
            fresh = self.fresh_residual(X)
            drift = max(drift, float(np.linalg.norm(getattr(self, rname) - fresh)))
            setattr(self, rname, fresh)
        return drift


@dataclass
class IterationInfo:
    """What a monitoring callback sees at iteration ``k``.

    On the terminating call `pairs`, `chosen`, `W` and `delta` are None.
    """

    k: int
    state: SolverState
    theta: float
    rrn: float
    r_frob_sq: float
    W: np.ndarray | None = None
    delta: float | None = None
    pairs: np.ndarray | None = None
    chosen: tuple | None = None
    sampling: Sampling = Sampling.PROPORTIONAL


def _squared(R):
    R = np.asarray(R, dtype=np.float64)
    R2 = R * R
    return R2.sum(axis=0) if R2.ndim == 3 else R2


def loss_matrix(R, a_norms, b_norms):
    """Loss ``W_ij = R_ij^2 / (|a_i|^2 |b_j|^2)``; for a stack, squares are summed."""
    a_norms = np.asarray(a_norms, dtype=np.float64)
    b_norms = np.asarray(b_norms, dtype=np.float64)
    if np.any(a_norms <= 0.0) or np.any(b_norms <= 0.0):
        raise InvariantError("zero row norm in loss matrix")
    return _squared(R) / np.outer(a_norms, b_norms)


def greedy_threshold(W, r_frob_sq, theta, a_frob_sq, b_frob_sq):
    """``delta_k = theta * max(W) / |R|_F^2 + (1 - theta) / (|A|_F^2 |B|_F^2)``."""
    if r_frob_sq <= 0.0:
        raise ValueError("residual is zero; iteration has converged")
    return theta * float(np.max(W)) / r_frob_sq + (1.0 - theta) / (a_frob_sq * b_frob_sq)


def _candidates(W, delta_k, r_frob_sq):
    # Flat indices of the greedy set.
    thr = delta_k * r_frob_sq * (1.0 - SELECTION_SLACK)
    flat = np.flatnonzero(W >= thr)
    if flat.size == 0:
        raise InvariantError(f"empty greedy index set (threshold {thr:.3e}, max loss {np.max(W):.3e})")
    return flat


def build_index_set(W, delta_k, r_frob_sq):
    """Index pairs with ``W_ij >= delta_k |R|_F^2`` as a ``(k, 2)`` array.

    A relative slack of 1e-12 keeps the maximal entry eligible under roundoff.
    """
    W = np.asarray(W)
    flat = _candidates(W, delta_k, r_frob_sq)
    return np.column_stack(np.unravel_index(flat, W.shape))


def _draw(u, weights):
    k = weights.shape[0]
    if k == 1:
        return 0
    cum = np.cumsum(weights)
    return min(int(np.searchsorted(cum, u * cum[-1], side="right")), k - 1)


def sample_index(pairs, R, sampling, gen, squared=False):
    """Draw one pair from `pairs` using exactly one uniform variate.

    ``proportional`` weights each pair by its squared residual, ``uniform``
    gives all pairs equal mass.  Pass ``squared=True`` when `R` already
    holds squared residuals.
    """
    pairs = np.asarray(pairs)
    u = gen.random()
    k = pairs.shape[0]
    if Sampling(sampling) is Sampling.UNIFORM:
        idx = min(int(u * k), k - 1)
    else:
        R2 = R if squared else _squared(R)
        idx = _draw(u, R2[pairs[:, 0], pairs[:, 1]])
    return int(pairs[idx, 0]), int(pairs[idx, 1])


def selection_probabilities(pairs, R, sampling):
    """Exact probability of each pair in `pairs` under `sampling`."""
    pairs = np.asarray(pairs)
    if Sampling(sampling) is Sampling.UNIFORM:
        return np.full(pairs.shape[0], 1.0 / pairs.shape[0])
    w = _squared(R)[pairs[:, 0], pairs[:, 1]]
    return w / w.sum()


def _coefficient(state, i, j):
    return state.R[:, i, j] / (state.a_norms[i] * state.b_norms[j])


def _image_vectors(state, i, j):
    # A a_i and B^T b_j, from the cached Gram matrices when available.
    if state.gram_A is not None:
        return state.gram_A[:, i], state.gram_B[:, j]
    return state.A @ state.A[i], state.B.T @ state.B[:, j]


def _scaled_outer(c, u, w):
    # c[s] * u w^T for every stack entry s; scaling the short vector first.
    return (c[:, None] * u)[:, :, None] * w


def maintain_residual(state, kind, pair, v, alpha=1.0, beta=0.0):
    """Carry the residual(s) through one update of kind `kind`.

    `v` is the per-stack Kaczmarz coefficient ``R_ij / (|a_i|^2 |b_j|^2)``
    taken before the update.
    """
    i, j = pair
    u, w = _image_vectors(state, i, j)
    kind = Method(kind)
    if kind is Method.ME_RGRK:
        state.R -= _scaled_outer(v, u, w)
    elif kind is Method.PM_RGRK:
        if beta:
            R_next = state.R - state.R_prev
            R_next *= beta
            R_next += state.R
            R_next -= _scaled_outer(alpha * v, u, w)
        else:
            R_next = state.R - _scaled_outer(alpha * v, u, w)
        state.R_prev = state.R
        state.R = R_next
    else:
        RY_next = state.R - _scaled_outer(alpha * v, u, w)
        if beta:
            R_next = RY_next * (1.0 + beta)
            R_next -= beta * state.RY
            state.R = R_next
        else:
            state.R = RY_next.copy()
        state.RY = RY_next


def _projection(state, c, i, j):
    return _scaled_outer(c, state.A[i], state.B[:, j])


def me_rgrk_step(state, pair):
    """Project ``X`` onto the hyperplane ``a_i^T X b_j = C_ij``."""
    i, j = pair
    v = _coefficient(state, i, j)
    state.X += _projection(state, v, i, j)
    maintain_residual(state, Method.ME_RGRK, pair, v)
    state.iter += 1
    return state


def pm_rgrk_step(state, pair, alpha, beta):
    """Relaxed projection plus heavy-ball momentum ``beta (X_k - X_{k-1})``."""
    i, j = pair
    v = _coefficient(state, i, j)
    dX = state.X - state.X_prev
    state.X_prev = state.X
    state.X = state.X + _projection(state, alpha * v, i, j)
    if beta:
        state.X += beta * dX
    maintain_residual(state, Method.PM_RGRK, pair, v, alpha, beta)
    state.iter += 1
    return state


def nm_rgrk_step(state, pair, alpha, beta):
    """Relaxed projection to ``Y_{k+1}``, then Nesterov extrapolation."""
    i, j = pair
    v = _coefficient(state, i, j)
    Y_next = state.X + _projection(state, alpha * v, i, j)
    if beta:
        state.X = Y_next + beta * (Y_next - state.Y)
    else:
        state.X = Y_next.copy()
    state.Y = Y_next
    maintain_residual(state, Method.NM_RGRK, pair, v, alpha, beta)
    state.iter += 1
    return state


def _residual_measure(R2_sums, mode):
    if mode == "squared":
        return float(R2_sums.sum())
    return float(np.sqrt(R2_sums).sum())


def solve_stack(A, B, C, config, X0=None, oracle=None, callback=None, rrn_norm="unsquared"):
    """Run the configured method on a stack of right-hand sides.

    Parameters
    ----------
    A, B : coefficient matrices, ``(m, n)`` and ``(n, p)``
    C : ``(q, m, p)`` or ``(m, p)`` right-hand side(s)
    config : SolverConfig
    X0 : optional initial iterate(s), zero by default
    oracle : optional reference solution(s) for `error_to_oracle`
    callback : optional callable receiving an :class:`IterationInfo` per step
    rrn_norm : ``"unsquared"`` sums the Frobenius norms over the stack,
        ``"squared"`` sums their squares.  Identical for a single right-hand side
        up to the square.

    Returns
    -------
    ConvergenceReport
        `x_final` keeps the stack axis.
    """
    cfg = config
    state = SolverState.start(A, B, C, X0, cfg.method, cfg.gram_budget_bytes)
    if rrn_norm not in ("unsquared", "squared"):
        raise ValueError(f"rrn_norm must be 'unsquared' or 'squared', got {rrn_norm!r}")
    q, m, p = state.R.shape
    inv_np = 1.0 / np.outer(state.a_norms, state.b_norms)
    c_norm = float(np.linalg.norm(state.C))
    gen = cfg.rng.generator()
    method = cfg.method
    alpha, beta = cfg.alpha, cfg.beta
    uniform = cfg.sampling is Sampling.UNIFORM

    R2 = np.empty_like(state.R)
    W = np.empty((m, p))

    def measure(R):
        np.multiply(R, R, out=R2)
        return R2, R2.reshape(q, -1).sum(axis=1)

    R2, sums = measure(state.R)
    e0 = _residual_measure(sums, rrn_norm)
    history = []
    drift_log = []
    max_drift = 0.0
    converged = False
    t0 = time.perf_counter()
    k = 0
    while True:
        r_frob_sq = float(sums.sum())
        if not np.isfinite(r_frob_sq):
            raise DivergenceError(k)
        rrn = _residual_measure(sums, rrn_norm) / e0 if e0 > 0.0 else 0.0
        if k % cfg.history_stride == 0:
            history.append((k, rrn, time.perf_counter() - t0))
        if rrn <= cfg.tol_rrn or r_frob_sq == 0.0:
            converged = True
        if converged or k >= cfg.max_iters:
            if callback is not None:
                callback(IterationInfo(k, state, cfg.theta, rrn, r_frob_sq, sampling=cfg.sampling))
            break

        R2s = R2[0] if q == 1 else R2.sum(axis=0)
        np.multiply(R2s, inv_np, out=W)
        delta = greedy_threshold(W, r_frob_sq, cfg.theta, state.a_frob_sq, state.b_frob_sq)
        flat = _candidates(W, delta, r_frob_sq)
        u = gen.random()
        if uniform:
            pick = flat[min(int(u * flat.size), flat.size - 1)]
        else:
            pick = flat[_draw(u, R2s.ravel()[flat])]
        pair = divmod(int(pick), p)
        if callback is not None:
            pairs = np.column_stack(np.divmod(flat, p))
            callback(IterationInfo(k, state, cfg.theta, rrn, r_frob_sq, W.copy(), delta, pairs,
                                   pair, cfg.sampling))

        if method is Method.ME_RGRK:
            me_rgrk_step(state, pair)
        elif method is Method.PM_RGRK:
            pm_rgrk_step(state, pair, alpha, beta)
        else:
            nm_rgrk_step(state, pair, alpha, beta)
        k += 1

        if k % cfg.refresh_period == 0:
            if not np.all(np.isfinite(state.X)):
                raise DivergenceError(k)
            drift = state.refresh() / c_norm if c_norm > 0.0 else 0.0
            drift_log.append((k, drift))
            max_drift = max(max_drift, drift)
            if drift > DRIFT_LIMIT:
                raise ResidualDriftError(k, drift)
        R2, sums = measure(state.R)

    elapsed = time.perf_counter() - t0
    if history[-1][0] != k:
        history.append((k, rrn, elapsed))
    if not np.all(np.isfinite(state.X)):
        raise DivergenceError(k)
    fresh = state.fresh_residual(state.X)
    final_sums = (fresh * fresh).reshape(q, -1).sum(axis=1)
    final_rrn = _residual_measure(final_sums, rrn_norm) / e0 if e0 > 0.0 else 0.0
    err = None
    if oracle is not None:
        ref = np.asarray(oracle, dtype=np.float64).reshape(state.X.shape)
        ref_norm = float(np.linalg.norm(ref))
        err = float(np.linalg.norm(state.X - ref)) / (ref_norm if ref_norm > 0.0 else 1.0)
    return ConvergenceReport(
        method=method.value,
        theta=cfg.theta,
        alpha=alpha,
        beta=beta,
        seed=cfg.rng.seed,
        history=history,
        final_iter=k,
        final_rrn_recomputed=final_rrn,
        converged=converged,
        x_final=state.X,
        error_to_oracle=err,
        elapsed_seconds=elapsed,
        max_drift=max_drift,
        drift_log=drift_log,
    )


def solve(instance, config, X0=None, callback=None, track_oracle=True):
    """Solve ``A X B = C`` for a :class:`~matkaczmarz.problems.ProblemInstance`.

    When the instance carries a reference solution, the relative distance of
    the final iterate to the minimum-norm solution is reported as
    `error_to_oracle`.
    """
    oracle = instance.oracle if (track_oracle and instance.x_star is not None) else None
    report = solve_stack(instance.A, instance.B, instance.C, config, X0=X0,
                         oracle=oracle, callback=callback)
    report.x_final = report.x_final[0]
    return report
