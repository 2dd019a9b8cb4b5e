import numpy as np
import pytest

from gradhyd.errors import ConfigError, NonFiniteObjective
from gradhyd.optimizers import (
    DAMPING_OVERFLOW,
    GRADIENT_TOLERANCE,
    GdConfig,
    LmConfig,
    gradient_descent,
    levenberg_marquardt,
    lm_step,
    multi_start,
)

TARGET = np.array([1.0, -2.0])


def bowl(v):
    e = v - TARGET
    return 0.5 * e @ e, e


def linear_ls(A, y):
    def objective(v):
        e = y - A @ v
        return 0.5 * e @ e, -A.T @ e, A.T @ A
    return objective


def test_gd_quadratic_bowl():
    tr = gradient_descent(bowl, np.zeros(2))
    assert np.max(np.abs(tr.final_vartheta - TARGET)) <= 1e-6
    assert tr.n_iterations <= 100


def test_gd_zero_gradient_at_start():
    tr = gradient_descent(bowl, TARGET.copy())
    assert tr.termination == GRADIENT_TOLERANCE and tr.n_iterations == 0


def test_gd_monotone_on_rosenbrock():
    def rosen(v):
        x, y = v
        return (1 - x) ** 2 + 100 * (y - x * x) ** 2, np.array([-2 * (1 - x) - 400 * x * (y - x * x), 200 * (y - x * x)])
    tr = gradient_descent(rosen, np.array([-1.2, 1.0]), GdConfig(k_max=300))
    losses = [r.loss for r in tr.accepted]
    assert all(b <= a for a, b in zip(losses, losses[1:]))


def test_gd_non_finite_start():
    with pytest.raises(NonFiniteObjective):
        gradient_descent(lambda v: (np.nan, np.zeros(2)), np.zeros(2))


def test_lm_linear_least_squares(rng):
    A = rng.normal(size=(10, 3))
    y = rng.normal(size=10)
    oracle = np.linalg.solve(A.T @ A, A.T @ y)
    # once lambda is tiny, a single step from anywhere lands on the normal-equations solution
    v0 = rng.normal(size=3)
    f = linear_ls(A, y)
    _, g, H = f(v0)
    assert np.max(np.abs(v0 + lm_step(g, H, 1e-12) - oracle)) <= 1e-8
    # the iterated run also lands there once its stopping rules are tight enough
    tr = levenberg_marquardt(f, v0, LmConfig(tol_g=1e-12, tol_loss_rel=1e-15))
    assert np.max(np.abs(tr.final_vartheta - oracle)) <= 1e-8


def test_lm_lambda_audit(rng):
    """Every recorded lambda follows the accept/reject rule exactly."""
    def rosen_res(v):
        r = np.array([10 * (v[1] - v[0] ** 2), 1 - v[0]])
        J = np.array([[-20 * v[0], 10.0], [-1.0, 0.0]])  # dr/dv
        return 0.5 * r @ r, J.T @ r, J.T @ J
    cfg = LmConfig(nu=10.0, lambda0=1.0)
    tr = levenberg_marquardt(rosen_res, np.array([-1.2, 1.0]), cfg)
    recs = tr.records
    assert recs[0].step_ctrl == 1.0
    lam = 1.0
    saw_reject = False
    for prev, cur in zip(recs[1:], recs[2:]):
        lam = prev.step_ctrl / cfg.nu if prev.accepted else prev.step_ctrl * cfg.nu
        assert cur.step_ctrl == lam
        saw_reject |= not prev.accepted
    assert recs[1].step_ctrl == 1.0
    for a, b in zip(recs, recs[1:]):
        if not b.accepted:
            assert np.array_equal(a.vartheta, b.vartheta) and b.loss == a.loss
        else:
            assert b.loss < a.loss
    assert tr.final_loss < 1e-12
    assert saw_reject


def test_lm_single_update_values():
    A = np.eye(2)
    y = np.array([1.0, 1.0])
    f = linear_ls(A, y)
    tr = levenberg_marquardt(f, np.zeros(2), LmConfig(lambda0=1.0, k_max=1))
    assert tr.records[1].accepted and tr.records[1].step_ctrl == 1.0
    tr2 = levenberg_marquardt(f, np.zeros(2), LmConfig(lambda0=1.0, k_max=2))
    assert tr2.records[2].step_ctrl == pytest.approx(0.1, rel=0, abs=0)


def test_lm_rejection_keeps_iterate():
    # objective whose trial points are always worse: every step rejected, lambda grows by nu
    calls = {"n": 0}

    def f(v):
        calls["n"] += 1
        loss = 1.0 if calls["n"] == 1 else 2.0
        return loss, np.ones(2), np.eye(2)
    tr = levenberg_marquardt(f, np.zeros(2), LmConfig(lambda0=1.0, nu=10.0))
    lams = [r.step_ctrl for r in tr.records[1:]]
    assert lams[:3] == [1.0, 10.0, 100.0]
    assert all(np.array_equal(r.vartheta, np.zeros(2)) for r in tr.records)
    assert tr.termination == DAMPING_OVERFLOW


def test_lm_interpolation_limits(rng):
    J = rng.normal(size=(6, 3))
    H = J.T @ J
    g = rng.normal(size=3)
    big = lm_step(g, H, 1e8)
    scaled = -g / np.diag(H)
    cos = big @ scaled / (np.linalg.norm(big) * np.linalg.norm(scaled))
    assert cos == pytest.approx(1.0, abs=1e-6)
    small = lm_step(g, H, 1e-8)
    assert np.allclose(small, np.linalg.solve(H, -g), rtol=1e-6)


def test_lm_default_lambda0(rng):
    A = rng.normal(size=(5, 2)) * 3
    f = linear_ls(A, rng.normal(size=5))
    tr = levenberg_marquardt(f, np.zeros(2))
    assert tr.records[0].step_ctrl == pytest.approx(1e-3 * np.max(np.diag(A.T @ A)))


def test_configs():
    with pytest.raises(ConfigError):
        LmConfig(nu=1.0)
    with pytest.raises(ConfigError):
        GdConfig(shrink=1.5)


def convex_runner(v0):
    return gradient_descent(bowl, v0, GdConfig(tol_g=1e-10))


def test_multi_start_convex():
    res = multi_start(convex_runner, 20, seed=3, d=2)
    finals = [t.final_loss for t in res.traces]
    assert max(finals) - min(finals) <= 1e-8
    assert len(res.ranked) == 20 and res.ranking[0] == int(np.argmin(finals))


def test_multi_start_single_and_deterministic():
    assert len(multi_start(convex_runner, 1, seed=0, d=2).traces) == 1
    a = multi_start(convex_runner, 5, seed=9, d=2)
    b = multi_start(convex_runner, 5, seed=9, d=2)
    assert a.ranking == b.ranking
    for ta, tb in zip(a.traces, b.traces):
        assert [r.loss for r in ta.records] == [r.loss for r in tb.records]
        assert all(np.array_equal(x.vartheta, y.vartheta) for x, y in zip(ta.records, tb.records))
    with pytest.raises(ConfigError):
        multi_start(convex_runner, 0, seed=0, d=2)


def test_multi_start_threads_match_serial():
    a = multi_start(convex_runner, 6, seed=2, d=2, n_jobs=1)
    b = multi_start(convex_runner, 6, seed=2, d=2, n_jobs=3)
    assert a.ranking == b.ranking
    assert [t.final_loss for t in a.traces] == [t.final_loss for t in b.traces]


def test_multi_start_failed_start_ranked_last():
    def runner(v0):
        if v0[0] > 0:
            raise NonFiniteObjective("boom")
        return convex_runner(v0)
    res = multi_start(runner, 8, seed=1, d=2)
    failed = [i for i, e in enumerate(res.errors) if e]
    assert failed and set(res.ranking[-len(failed):]) == set(failed)
