import numpy as np
import pytest
from hypothesis import given, strategies as st

from matkaczmarz.exceptions import InvariantError
from matkaczmarz.problems import ProblemInstance, RngSpec, gen_dense, gen_lowrank
from matkaczmarz.solver import (
    Method,
    Sampling,
    SolverConfig,
    build_index_set,
    greedy_threshold,
    loss_matrix,
    sample_index,
    selection_probabilities,
    solve,
    solve_stack,
)


def test_loss_matrix_example():
    R = np.array([[1.0, 2.0], [3.0, 4.0]])
    W = loss_matrix(R, np.array([1.0, 2.0]), np.array([1.0, 4.0]))
    np.testing.assert_allclose(W, [[1.0, 1.0], [4.5, 2.0]])
    with pytest.raises(InvariantError):
        loss_matrix(R, np.array([0.0, 1.0]), np.ones(2))


def test_threshold_and_index_set():
    W = np.array([[1.0, 0.0], [0.8, 0.2]])
    r2 = 2.0
    d = greedy_threshold(W, r2, 1.0, 2.0, 2.0)
    assert d == pytest.approx(0.5)
    np.testing.assert_array_equal(build_index_set(W, d, r2), [[0, 0]])
    d = greedy_threshold(W, r2, 0.5, 2.0, 2.0)
    assert d == pytest.approx(0.25 + 0.125)
    np.testing.assert_array_equal(build_index_set(W, d, r2), [[0, 0], [1, 0]])
    with pytest.raises(ValueError):
        greedy_threshold(W, 0.0, 0.9, 1.0, 1.0)
    with pytest.raises(InvariantError):
        build_index_set(W, 10.0, r2)


@given(st.integers(0, 2**32), st.floats(0.01, 1.0))
def test_index_set_contains_maximum(seed, theta):
    g = np.random.default_rng(seed)
    R = g.standard_normal((5, 7))
    an, bn = g.random(5) + 0.1, g.random(7) + 0.1
    W = loss_matrix(R, an, bn)
    r2 = float((R * R).sum())
    d = greedy_threshold(W, r2, theta, an.sum(), bn.sum())
    pairs = build_index_set(W, d, r2)
    assert tuple(np.unravel_index(np.argmax(W), W.shape)) in set(map(tuple, pairs))


def test_sampling_uses_one_variate_and_matches_probabilities():
    pairs = np.array([[0, 0], [1, 1], [2, 0]])
    R = np.array([[1.0, 0.0], [0.0, 2.0], [3.0, 0.0]])
    p = selection_probabilities(pairs, R, Sampling.PROPORTIONAL)
    np.testing.assert_allclose(p, [1 / 14, 4 / 14, 9 / 14])
    np.testing.assert_allclose(selection_probabilities(pairs, R, "uniform"), 1 / 3)
    g = np.random.default_rng(0)
    counts = {}
    for _ in range(20000):
        ij = sample_index(pairs, R, "proportional", g)
        counts[ij] = counts.get(ij, 0) + 1
    assert abs(counts[(2, 0)] / 20000 - 9 / 14) < 0.02
    g1, g2 = np.random.default_rng(5), np.random.default_rng(5)
    sample_index(pairs, R, "proportional", g1)
    g2.random()
    assert g1.random() == g2.random()


def test_config_defaults_and_validation():
    assert (SolverConfig(method="pm-rgrk").alpha, SolverConfig(method="pm-rgrk").beta) == (0.9, 0.3)
    assert (SolverConfig(method="nm-rgrk").alpha, SolverConfig(method="nm-rgrk").beta) == (0.8, 0.5)
    me = SolverConfig(method="me-rgrk", alpha=0.3, beta=0.9)
    assert (me.alpha, me.beta) == (1.0, 0.0)
    assert SolverConfig(rng=7).rng == RngSpec(7, 1)
    with pytest.raises(ValueError):
        SolverConfig(theta=0.0)
    with pytest.raises(ValueError):
        SolverConfig(max_iters=0)
    with pytest.warns(RuntimeWarning):
        SolverConfig(method="pm-rgrk", alpha=2.5)


def test_start_at_solution_converges_immediately():
    inst = gen_dense(8, 3, 5, RngSpec(1))
    rep = solve(inst, SolverConfig(), X0=inst.x_star.copy())
    assert rep.converged and rep.final_iter == 0


def test_identity_system():
    C = np.array([[1.0, -2.0], [0.5, 3.0]])
    inst = ProblemInstance(np.eye(2), np.eye(2), C, x_star=C)
    seen = []

    def check(info):
        if info.chosen is not None:
            seen.append(info.chosen)

    rep = solve(inst, SolverConfig(theta=1.0, tol_rrn=1e-12), callback=check)
    # Each step zeroes one residual entry of a diagonal system.
    assert rep.final_iter == 4 and len(set(seen)) == 4
    np.testing.assert_allclose(rep.x_final, C, atol=1e-15)


@pytest.mark.parametrize("method", list(Method))
def test_dense_small_reaches_oracle(method):
    inst = gen_dense(20, 5, 10, RngSpec(11))
    rep = solve(inst, SolverConfig(method=method, tol_rrn=1e-9, max_iters=200_000, rng=3))
    assert rep.converged and rep.error_to_oracle <= 1e-4
    h = [k for k, _, _ in rep.history]
    assert h == sorted(set(h))
    fresh = np.linalg.norm(inst.C - inst.A @ rep.x_final @ inst.B) / np.linalg.norm(inst.C)
    assert rep.final_rrn_recomputed == pytest.approx(fresh, rel=1e-12)


def test_projection_exactness():
    inst = gen_dense(12, 4, 6, RngSpec(2))
    picks = []

    def grab(info):
        if info.chosen is not None:
            picks.append((info.chosen, info.state.X[0].copy()))

    solve(inst, SolverConfig(max_iters=200, tol_rrn=0.0), callback=grab)
    A, B, C = inst.A, inst.B, inst.C
    for (prev_pick, _), (_, X_after) in zip(picks[:-1], picks[1:]):
        i, j = prev_pick
        lhs = A[i] @ X_after @ B[:, j]
        assert abs(lhs - C[i, j]) <= 1e-10 * max(abs(C[i, j]), np.abs(C).max())


@pytest.mark.parametrize("method", ["pm-rgrk", "nm-rgrk"])
def test_reduction_to_plain_method(method):
    inst = gen_dense(10, 3, 6, RngSpec(4))
    runs = {}
    for mt in ("me-rgrk", method):
        xs = []
        cfg = SolverConfig(method=mt, alpha=1.0, beta=0.0, tol_rrn=0.0, max_iters=500, rng=9)
        solve(inst, cfg, callback=lambda info: xs.append(info.state.X.copy()))
        runs[mt] = np.array(xs)
    assert np.array_equal(runs["me-rgrk"], runs[method])


def test_uniform_sampling_converges():
    inst = gen_dense(20, 5, 10, RngSpec(6))
    rep = solve(inst, SolverConfig(method="nm-rgrk", sampling="uniform", tol_rrn=1e-8, rng=1))
    assert rep.converged and rep.error_to_oracle < 1e-4


def test_no_gram_path_matches_gram_path():
    inst = gen_dense(15, 4, 8, RngSpec(8))
    a = solve(inst, SolverConfig(method="pm-rgrk", max_iters=300, tol_rrn=0.0))
    b = solve(inst, SolverConfig(method="pm-rgrk", max_iters=300, tol_rrn=0.0, gram_budget_bytes=0))
    np.testing.assert_allclose(a.x_final, b.x_final, rtol=1e-10, atol=1e-12)


def test_drift_is_logged_at_refresh():
    inst = gen_dense(20, 5, 10, RngSpec(3))
    rep = solve(inst, SolverConfig(method="nm-rgrk", tol_rrn=0.0, max_iters=1000, refresh_period=100))
    assert [k for k, _ in rep.drift_log] == list(range(100, 1001, 100))
    assert rep.max_drift <= 1e-10


def test_stack_solve_shares_pairs():
    inst = gen_dense(12, 4, 6, RngSpec(5))
    C = np.stack([inst.C, 2 * inst.C, -inst.C])
    rep = solve_stack(inst.A, inst.B, C, SolverConfig(tol_rrn=1e-9, max_iters=50_000))
    assert rep.converged
    for s, f in enumerate((1, 2, -1)):
        np.testing.assert_allclose(rep.x_final[s], f * inst.x_star, atol=1e-6)


def test_mean_error_nonincreasing_in_greedy_limit():
    inst = gen_lowrank(10, 4, 6, 4, 4, RngSpec(12))
    K, runs = 40, 120
    total = np.zeros(K + 1)
    for r in range(runs):
        errs = np.zeros(K + 1)

        def rec(info, errs=errs):
            d = info.state.X[0] - inst.x_star
            errs[info.k] = float(np.vdot(d, d))

        solve(inst, SolverConfig(theta=1.0, tol_rrn=0.0, max_iters=K, rng=RngSpec(r, 1)), callback=rec)
        total += errs
    mean = total / runs
    assert np.all(np.diff(mean) <= 1e-12 * mean[0])
