"""The batched simplex against an independent LP solver."""

import numpy as np
import pytest
from scipy.optimize import linprog

from marginrec._simplex import (
    _BatchLP,
    chord_exit_pairs,
    feasibility_residuals,
    ray_exit_lengths,
)


def _hull_program(V):
    h = V.shape[0]
    return np.vstack([V.T, np.ones((1, h))])


def _scipy_min_residual(G, b):
    """Reference phase-1 optimum: min sum(s) s.t. G lam + diag(sign b) s = b."""
    r, n = G.shape
    sigma = np.sign(b)
    sigma[sigma == 0] = 1.0
    A = np.hstack([G, np.diag(sigma)])
    c = np.concatenate([np.zeros(n), np.ones(r)])
    res = linprog(c, A_eq=A, b_eq=b, bounds=[(0, None)] * (n + r),
                  method="highs")
    assert res.status == 0
    return res.fun


def _scipy_ray_exit(V, x, u):
    h = V.shape[0]
    A = np.hstack([np.vstack([V.T, np.ones((1, h))]),
                   np.concatenate([-u, [0.0]])[:, None]])
    c = np.zeros(h + 1)
    c[-1] = -1.0
    res = linprog(c, A_eq=A, b_eq=np.concatenate([x, [1.0]]),
                  bounds=[(0, None)] * (h + 1), method="highs")
    return res


@pytest.mark.parametrize("seed", range(8))
@pytest.mark.parametrize("m", [1, 2, 3])
def test_feasibility_matches_scipy(seed, m):
    gen = np.random.default_rng(seed)
    V = gen.standard_normal((gen.integers(m + 1, 12), m))
    G = _hull_program(V)
    X = gen.standard_normal((20, m)) * 1.5
    b = np.hstack([X, np.ones((20, 1))])
    ours = feasibility_residuals(G, b)
    for i in range(X.shape[0]):
        ref = _scipy_min_residual(G, b[i])
        assert ours[i] == pytest.approx(ref, abs=1e-7)


@pytest.mark.parametrize("seed", range(8))
def test_ray_exit_matches_scipy(seed):
    gen = np.random.default_rng(100 + seed)
    m = int(gen.integers(2, 4))
    V = gen.standard_normal((12, m))
    # interior point: convex combination with full support
    w = gen.random(12)
    w /= w.sum()
    x = w @ V
    u = gen.standard_normal(m)
    u /= np.linalg.norm(u)
    G = _hull_program(V)
    b = np.concatenate([x, [1.0]])[None, :]
    extra = np.concatenate([-u, [0.0]])[None, :]
    alpha, resid = ray_exit_lengths(G, b, extra)
    assert resid[0] < 1e-9
    ref = _scipy_ray_exit(V, x, u)
    assert ref.status == 0
    assert alpha[0] == pytest.approx(-ref.fun, abs=1e-8)


def test_chord_pairs_agree_with_single_exits():
    gen = np.random.default_rng(7)
    V = gen.standard_normal((10, 2))
    w = gen.random(10)
    w /= w.sum()
    x = w @ V
    G = _hull_program(V)
    b = np.concatenate([x, [1.0]])[None, :]
    for _ in range(5):
        u = gen.standard_normal(2)
        u /= np.linalg.norm(u)
        dirs = np.concatenate([-u, [0.0]])[None, :]
        fwd, bwd, resid = chord_exit_pairs(G, b, dirs)
        a1, _ = ray_exit_lengths(G, b, dirs)
        a2, _ = ray_exit_lengths(G, b, -dirs)
        assert fwd[0] == pytest.approx(a1[0], abs=1e-9)
        assert bwd[0] == pytest.approx(a2[0], abs=1e-9)
        assert resid[0] < 1e-9


def test_batch_matches_singletons():
    gen = np.random.default_rng(3)
    V = gen.standard_normal((9, 2))
    G = _hull_program(V)
    X = gen.standard_normal((30, 2))
    b = np.hstack([X, np.ones((30, 1))])
    batch = feasibility_residuals(G, b)
    singles = np.array([feasibility_residuals(G, b[i:i + 1])[0]
                        for i in range(30)])
    assert batch == pytest.approx(singles, abs=1e-9)


def test_rebase_keeps_results_correct():
    gen = np.random.default_rng(11)
    V = gen.standard_normal((8, 2))
    G = _hull_program(V)
    w = gen.random((4, 8))
    w /= w.sum(axis=1, keepdims=True)
    X1 = w @ V
    prog = _BatchLP(G, np.hstack([X1, np.ones((4, 1))]))
    assert prog.phase1().max() < 1e-9
    # move to new rhs, some reachable and some not
    X2 = np.vstack([w[::-1] @ V + 0.0, ])
    b2 = np.hstack([X2, np.ones((4, 1))])
    prog.rebase(b2)
    r2 = prog.phase1()
    ref = np.array([_scipy_min_residual(G, b2[i]) for i in range(4)])
    assert r2 == pytest.approx(ref, abs=1e-8)


def test_deterministic_pivoting():
    gen = np.random.default_rng(5)
    V = gen.standard_normal((15, 3))
    G = _hull_program(V)
    X = gen.standard_normal((50, 3))
    b = np.hstack([X, np.ones((50, 1))])
    r1 = feasibility_residuals(G, b)
    r2 = feasibility_residuals(G, b)
    assert np.array_equal(r1, r2)
