import itertools

import numpy as np
import pytest

ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


# ---- independent oracles, deliberately naive

def qp_oracle(t, mu, admissible):
    """min_s sum_j t_j s_j + mu s_j^2 on the simplex over ``admissible``, by
    enumerating every support pattern and keeping the best feasible KKT point."""
    idx = np.flatnonzero(admissible)
    a = np.asarray(t, dtype=float)[idx] / (2.0 * mu)
    m = idx.size
    masks = np.array(list(itertools.product([0, 1], repeat=m)), dtype=bool)[1:]
    size = masks.sum(axis=1)
    theta = (1.0 + (masks * a).sum(axis=1)) / size
    vals = np.where(masks, theta[:, None] - a[None, :], 0.0)
    feasible = np.all(vals >= -1e-13, axis=1)
    vals = np.maximum(vals, 0.0)
    obj = (vals * a * 2.0 * mu).sum(axis=1) + mu * (vals ** 2).sum(axis=1)
    obj[~feasible] = np.inf
    best = vals[np.argmin(obj)]
    out = np.zeros(len(t))
    out[idx] = best
    return out


def simplex_bisect(v, iters=200):
    """Simplex projection of ``v`` by bisection on the threshold."""
    lo, hi = v.min() - 1.0, v.max()
    for _ in range(iters):
        mid = (lo + hi) / 2.0
        if np.maximum(v - mid, 0).sum() > 1.0:
            lo = mid
        else:
            hi = mid
    return np.maximum(v - (lo + hi) / 2.0, 0)


def naive_sq_dists(Y):
    n = Y.shape[1]
    D = np.zeros((n, n))
    for i in range(n):
        for j in range(n):
            D[i, j] = sum((Y[r, i] - Y[r, j]) ** 2 for r in range(Y.shape[0]))
    return D


def random_stochastic(rng, n, density=0.5, zero_diag=True):
    S = rng.random((n, n)) * (rng.random((n, n)) < density)
    if zero_diag:
        np.fill_diagonal(S, 0.0)
    for i in range(n):
        if S[i].sum() == 0:
            S[i, (i + 1) % n] = 1.0
    return S / S.sum(axis=1, keepdims=True)


def random_orthonormal(rng, d, m):
    Q, _ = np.linalg.qr(rng.standard_normal((d, m)))
    return Q


def block_graph(sizes, rng=None):
    n = sum(sizes)
    S = np.zeros((n, n))
    start = 0
    for b in sizes:
        blk = np.ones((b, b)) if rng is None else rng.random((b, b)) + 0.1
        np.fill_diagonal(blk, 0.0)
        S[start:start + b, start:start + b] = blk
        start += b
    return S / S.sum(axis=1, keepdims=True)
