"""Computable convergence constants for the greedy Kaczmarz methods.

* spectral constant ``rho_tilde = sigma_r(A)^2 sigma_r(B)^2 / (|A|_F^2 |B|_F^2)``;
* per-iteration greedy constants ``zeta_k``, ``gamma_k`` and the threshold
  inequality ``delta_k |A|_F^2 |B|_F^2 >= gamma_k >= 1``;
* rate factors of the heavy-ball and Nesterov variants, the momentum
  ranges that make the two-step recurrence contract, and the resulting
  geometric error bounds;
* small helpers that check these statements against actual iterations.

Two-step recurrences ``F_{k+1} <= t1 F_k + t2 F_{k-1}`` with ``F_1 = F_0``
are bounded by ``q1^k (1 + q2) F_0`` where
``q1 = (t1 + sqrt(t1^2 + 4 t2)) / 2`` and ``q2 = q1 - t1``.
"""

import math
from dataclasses import asdict, dataclass, field

import numpy as np

from .linalg import as_mat, frob_norm_sq, svd
from .solver import (
    Method,
    SolverConfig,
    loss_matrix,
    greedy_threshold,
    build_index_set,
    selection_probabilities,
    solve_stack,
)
from .problems import RngSpec

__all__ = [
    "SpectralBounds",
    "GreedyConstants",
    "RateFactors",
    "spectral_bounds",
    "greedy_constants",
    "lemma_factors",
    "rate_factors",
    "error_bound_curve",
    "simulate_recurrence",
    "GreedyBoundMonitor",
    "expected_selected_loss",
    "mean_error_trace",
]

ZERO_LOSS_REL = 1e-24
CHECK_SLACK = 1e-12


@dataclass
class SpectralBounds:
    sigma_1_A: float
    sigma_r_A: float
    sigma_1_B: float
    sigma_r_B: float
    a_frob_sq: float
    b_frob_sq: float
    rho_tilde: float

    def to_dict(self):
        return asdict(self)


def spectral_bounds(A, B):
    """Extreme nonzero singular values, Frobenius norms and ``rho_tilde``."""
    A, B = as_mat(A, "A"), as_mat(B, "B")
    sa, sb = svd(A), svd(B)
    if sa.numerical_rank == 0 or sb.numerical_rank == 0:
        raise ValueError("A and B must be nonzero")
    a2, b2 = frob_norm_sq(A), frob_norm_sq(B)
    rho = (sa.sigma_min_nonzero * sb.sigma_min_nonzero) ** 2 / (a2 * b2)
    return SpectralBounds(sa.sigma_max, sa.sigma_min_nonzero, sb.sigma_max,
                          sb.sigma_min_nonzero, a2, b2, min(rho, 1.0))


@dataclass
class GreedyConstants:
    zeta_k: float
    gamma_k: float
    rho_tilde_k: float
    n_zero: int = 0


def greedy_constants(W, a_norms, b_norms, theta, a_frob_sq, b_frob_sq, rho_tilde):
    """``zeta_k``, ``gamma_k = theta |A|^2 |B|^2 / zeta_k + 1 - theta`` and ``gamma_k * rho_tilde``.

    Pairs with ``W_ij <= 1e-24 max(W)`` count as zero loss and are removed
    from ``|A|_F^2 |B|_F^2`` to form ``zeta_k``.

    Raises
    ------
    ValueError
        If every loss is zero (the iteration has converged).
    """
    W = np.asarray(W, dtype=np.float64)
    wmax = float(W.max())
    if wmax <= 0.0:
        raise ValueError("all losses are zero; iteration has converged")
    zero = W <= ZERO_LOSS_REL * wmax
    total = a_frob_sq * b_frob_sq
    if zero.any():
        removed = float(np.asarray(a_norms) @ zero @ np.asarray(b_norms))
    else:
        removed = 0.0
    zeta = total - removed
    if zeta <= 0.0:
        raise ValueError("zeta_k is not positive")
    gamma = theta * total / zeta + (1.0 - theta)
    if gamma < 1.0 - CHECK_SLACK:
        raise AssertionError(f"gamma_k = {gamma} < 1")
    return GreedyConstants(zeta, gamma, gamma * rho_tilde, int(zero.sum()))


def lemma_factors(t1, t2):
    """``(q1, q2)`` of the two-step recurrence bound."""
    q1 = 0.5 * (t1 + math.sqrt(t1 * t1 + 4.0 * t2))
    return q1, q1 - t1


@dataclass
class RateFactors:
    """Contraction data of a momentum method at given ``(alpha, beta, rho_tilde)``.

    `beta_max` is the supremum of momentum values with ``t1 + t2 < 1`` (hence
    ``q1 < 1``).  `beta_max_stated` is the bound in its commonly quoted form,
    which can admit ``q1 > 1`` for the heavy-ball method and is always empty
    for Nesterov's; it is reported for comparison only.
    """

    method: str
    alpha: float
    beta: float
    rho_tilde: float
    tau1: float | None = None
    tau2: float | None = None
    tau3: float | None = None
    gamma1: float | None = None
    gamma2: float | None = None
    gamma3: float | None = None
    gamma4: float | None = None
    q1: float = 0.0
    q2: float = 0.0
    beta_max: float = 0.0
    beta_max_stated: float = 0.0
    params_admissible: bool = False
    t_sum: float = field(default=0.0)

    @property
    def t(self):
        if self.gamma1 is not None:
            return self.gamma1, self.gamma2
        return self.gamma3, self.gamma4

    def to_dict(self):
        return asdict(self)


def rate_factors(method, alpha, beta, rho_tilde):
    """Rate factors and admissibility for ``pm-rgrk`` or ``nm-rgrk``.

    ``me-rgrk`` is treated as the heavy-ball method with ``alpha = 1``,
    ``beta = 0``, giving ``q1 = 1 - rho_tilde``.
    """
    method = Method(method)
    if not 0.0 < rho_tilde <= 1.0:
        raise ValueError(f"rho_tilde must lie in (0, 1], got {rho_tilde}")
    a, b, r = float(alpha), float(beta), float(rho_tilde)
    if method is Method.ME_RGRK:
        a, b = 1.0, 0.0
    f = RateFactors(method.value, a, b, r)
    if method is Method.NM_RGRK:
        s = a * (2.0 - a) * r
        f.tau3 = 1.0 / (2.0 + 2.0 * s)
        f.gamma3 = 2.0 * (1.0 + b) ** 2 * (1.0 - s)
        f.gamma4 = 2.0 * b * b * (1.0 - s)
        f.beta_max_stated = _half_root(2.0 * f.tau3)
        if s >= 1.0:
            f.beta_max = math.inf
        else:
            f.beta_max = _half_root(1.0 / (1.0 - s))
    else:
        f.tau1 = 4.0 + a - a * r
        f.tau2 = a * (2.0 - a) * r
        f.gamma1 = (1.0 + 3.0 * b + b * b) - (2.0 * a + a * b - a * a) * r
        f.gamma2 = 2.0 * b * b + (1.0 + a) * b
        f.beta_max_stated = (math.sqrt(f.tau1 ** 2 + 12.0 * (1.0 - f.tau2)) - f.tau1) / 6.0
        # Positive root of 3 beta^2 + tau1 beta - tau2 = 0, i.e. gamma1 + gamma2 = 1.
        f.beta_max = max(0.0, (math.sqrt(f.tau1 ** 2 + 12.0 * f.tau2) - f.tau1) / 6.0)
    t1, t2 = f.t
    f.t_sum = t1 + t2
    f.q1, f.q2 = lemma_factors(t1, t2)
    f.params_admissible = bool(0.0 < a < 2.0 and 0.0 < b < f.beta_max)
    return f


def _half_root(x):
    # (sqrt(x - 1) - 1) / 2, or 0 when that is not positive.
    if x <= 1.0:
        return 0.0
    return max(0.0, (math.sqrt(x - 1.0) - 1.0) / 2.0)


def error_bound_curve(factors, initial_error_sq, k_max, form="lemma"):
    """Bound on the expected squared error, entry ``k`` for iteration ``k + 1``.

    ``form="lemma"`` gives ``q1^k (1 + q2) F_0``, the bound that follows from
    the two-step recurrence with equal starting values.  ``form="stated"``
    gives the sharper-looking ``q1^k q2 F_0``, which fails already at ``k = 0``
    for the heavy-ball method and is provided for comparison.

    Raises
    ------
    ValueError
        If `factors` are not admissible.
    """
    if not factors.params_admissible:
        raise ValueError(
            f"parameters alpha={factors.alpha}, beta={factors.beta} are outside the "
            f"admissible range (beta_max={factors.beta_max:.3e})"
        )
    if form not in ("lemma", "stated"):
        raise ValueError(f"form must be 'lemma' or 'stated', got {form!r}")
    pre = factors.q2 if form == "stated" else 1.0 + factors.q2
    k = np.arange(int(k_max) + 1)
    return factors.q1 ** k * pre * float(initial_error_sq)


def simulate_recurrence(t1, t2, F0, steps):
    """``F_{k+1} = t1 F_k + t2 F_{k-1}`` with ``F_1 = F_0``; returns ``F_0 .. F_steps``."""
    F = np.empty(int(steps) + 1)
    F[0] = F0
    if steps >= 1:
        F[1] = F0
    for k in range(1, int(steps)):
        F[k + 1] = t1 * F[k] + t2 * F[k - 1]
    return F


class GreedyBoundMonitor:
    """Solver callback recording ``gamma_k`` and ``delta_k |A|_F^2 |B|_F^2``.

    With ``strict=True`` the first iteration where either
    ``delta_k |A|^2 |B|^2 >= gamma_k`` or ``gamma_k >= 1`` fails (beyond a
    1e-12 relative slack) raises ``AssertionError``.
    """

    def __init__(self, rho_tilde=1.0, strict=True):
        self.rho_tilde = rho_tilde
        self.strict = strict
        self.records = []
        self.violations = []

    def __call__(self, info):
        if info.W is None:
            return
        st = info.state
        total = st.a_frob_sq * st.b_frob_sq
        gc = greedy_constants(info.W, st.a_norms, st.b_norms, info.theta,
                              st.a_frob_sq, st.b_frob_sq, self.rho_tilde)
        lhs = info.delta * total
        self.records.append((info.k, lhs, gc.gamma_k, gc.n_zero))
        ok = lhs >= gc.gamma_k * (1.0 - CHECK_SLACK) and gc.gamma_k >= 1.0 - CHECK_SLACK
        if not ok:
            self.violations.append((info.k, lhs, gc.gamma_k))
            if self.strict:
                raise AssertionError(
                    f"iteration {info.k}: delta*|A|^2|B|^2 = {lhs!r}, gamma_k = {gc.gamma_k!r}"
                )


def expected_selected_loss(A, B, C, X, theta, sampling, x_ref=None, rho_tilde=None):
    """Exact expected loss of the next selected pair at iterate `X`.

    Returns ``(lhs, rhs)`` with ``lhs = sum_{Delta_k} p_ij W_ij`` and
    ``rhs = gamma_k rho_tilde |X - x_ref|_F^2``; the spectral bound asserts
    ``lhs >= rhs`` when ``X - x_ref`` lies in the range of ``A^T (.) B^T``.
    `x_ref` defaults to the minimum-norm solution.
    """
    from .linalg import pinv_solution

    A, B, C, X = as_mat(A, "A"), as_mat(B, "B"), as_mat(C, "C"), as_mat(X, "X")
    if x_ref is None:
        x_ref = pinv_solution(A, B, C)
    if rho_tilde is None:
        rho_tilde = spectral_bounds(A, B).rho_tilde
    a_norms = np.einsum("ij,ij->i", A, A)
    b_norms = np.einsum("ij,ij->j", B, B)
    a2, b2 = float(a_norms.sum()), float(b_norms.sum())
    R = C - A @ X @ B
    r2 = frob_norm_sq(R)
    W = loss_matrix(R, a_norms, b_norms)
    delta = greedy_threshold(W, r2, theta, a2, b2)
    pairs = build_index_set(W, delta, r2)
    p = selection_probabilities(pairs, R, sampling)
    lhs = float(p @ W[pairs[:, 0], pairs[:, 1]])
    gc = greedy_constants(W, a_norms, b_norms, theta, a2, b2, rho_tilde)
    rhs = gc.rho_tilde_k * frob_norm_sq(X - x_ref)
    return lhs, rhs


def mean_error_trace(instance, method, alpha, beta, runs, k_max, theta=0.9, seed_base=0,
                     x_ref=None):
    """Mean of ``|X_k - x_ref|_F^2`` over seeded runs, for ``k = 0 .. k_max``.

    Each run starts from zero and uses solver stream ``RngSpec(seed_base + r, 1)``.
    """
    x_ref = instance.oracle if x_ref is None else np.asarray(x_ref, dtype=np.float64)
    total = np.zeros(int(k_max) + 1)

    for r in range(int(runs)):
        errs = np.zeros(int(k_max) + 1)

        def record(info, errs=errs):
            d = info.state.X[0] - x_ref
            errs[info.k] = float(np.vdot(d, d))

        cfg = SolverConfig(method=method, theta=theta, alpha=alpha, beta=beta, tol_rrn=0.0,
                           max_iters=int(k_max), rng=RngSpec(seed_base + r, 1),
                           history_stride=max(1, int(k_max)))
        rep = solve_stack(instance.A, instance.B, instance.C, cfg, callback=record)
        if rep.final_iter < k_max:
            # Exact convergence: the error stays at its final value.
            errs[rep.final_iter + 1:] = errs[rep.final_iter]
        total += errs
    return total / int(runs)
