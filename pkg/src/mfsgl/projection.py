"""Per-view orthonormal projection with a smoothed row-sparsity penalty.

Each view solves

    min_{W^T W = I}  Tr(W^T A W) + r * sum_i sqrt(||w_i||^2 + eps),

with ``A = X L X^T`` and ``r = gamma / alpha_v``, by alternating a diagonal
reweighting ``g_i = 1 / (2 sqrt(||w_i||^2 + eps))`` with an eigenvector solve
of ``A + r diag(g)``.  Every alternation is non-increasing in the objective.
"""

import math
import warnings

import numpy as np

from .graph import smallest_eigs

EPS = 1e-8
INNER_TOL = 1e-6
MAX_INNER = 30


def default_dim(d):
    """Projection size near d/2, kept within [d/3, 2d/3] and below d."""
    if d <= 1:
        return 1
    m = int(math.floor(d / 2 + 0.5))
    m = min(max(m, math.ceil(d / 3)), math.floor(2 * d / 3))
    return max(1, min(m, d - 1))


def clamp_dim(m, d, allow_full=False):
    """Requested size ``m`` for a ``d``-feature view; ``m >= d`` falls back to ``d - 1``.

    ``allow_full`` permits ``m == d``.  The penalty is then constant, so the
    fit keeps all directions and only the graph is learned.
    """
    if d == 1 or (allow_full and m >= d):
        return d
    if m >= d:
        warnings.warn(f"projection dim {m} >= feature dim {d}; using {d - 1}", stacklevel=3)
        return d - 1
    if m < 1:
        raise ValueError(f"projection dim must be >= 1, got {m}")
    return int(m)


def graph_quadratic(X, L):
    """``X L X^T`` (d x d), symmetrized."""
    A = X @ L @ X.T
    return (A + A.T) / 2.0


def compute_reweight(W, eps=EPS):
    W = np.asarray(W, dtype=float)
    return 1.0 / (2.0 * np.sqrt((W * W).sum(axis=1) + eps))


def smoothed_l21(W, eps=EPS):
    W = np.asarray(W, dtype=float)
    return float(np.sqrt((W * W).sum(axis=1) + eps).sum())


def objective_w(X, L, W, gamma, eps=EPS):
    """``Tr(W^T X L X^T W) + gamma * sum_i sqrt(||w_i||^2 + eps)``."""
    Y = W.T @ X
    return float(np.trace(Y @ L @ Y.T)) + gamma * smoothed_l21(W, eps)


def _eig_step(A, g, ratio, m):
    M = A + ratio * np.diag(g)
    _, W = smallest_eigs(M, m)
    return W


def solve_projection_step(X, L, g, gamma_over_alpha, m):
    """Columns: the ``m`` smallest eigenvectors of ``X L X^T + (gamma/alpha) diag(g)``."""
    return _eig_step(graph_quadratic(X, L), np.asarray(g, dtype=float), gamma_over_alpha, m)


def fit_projection(X, L, gamma, alpha=1.0, m=None, eps=EPS, tol=INNER_TOL,
                   max_inner=MAX_INNER, A=None, allow_full=False):
    """Reweighted eigen alternation for one view, starting from ``G = I``.

    Returns ``(W, history)`` where ``history[t]`` is the objective
    ``Tr(W^T A W) + (gamma/alpha) * l21_eps(W)`` after the ``t``-th solve.
    Scaling the penalty by ``1/alpha`` matches the matrix being diagonalized,
    which is what makes the history monotone.  ``A`` may be passed to reuse
    a precomputed ``X L X^T``; ``allow_full`` is passed to :func:`clamp_dim`.
    """
    if max_inner < 1:
        raise ValueError("max_inner must be >= 1")
    if not tol > 0:
        raise ValueError("tol must be positive")
    d = X.shape[0]
    m = default_dim(d) if m is None else clamp_dim(m, d, allow_full)
    if A is None:
        A = graph_quadratic(X, L)
    ratio = gamma / alpha
    g = np.ones(d)
    history = []
    W = None
    for _ in range(max_inner):
        W = _eig_step(A, g, ratio, m)
        obj = float(np.trace(W.T @ A @ W)) + ratio * smoothed_l21(W, eps)
        history.append(obj)
        if ratio == 0:
            break
        if len(history) > 1:
            prev = history[-2]
            if abs(prev - obj) <= tol * max(abs(prev), np.finfo(float).tiny):
                break
        g = compute_reweight(W, eps)
    return W, history


def save_projection(path, W):
    W = np.atleast_2d(W)
    with open(path, "w") as fh:
        fh.write(f"{W.shape[0]} {W.shape[1]}\n")
        np.savetxt(fh, W, fmt="%.17g")


def load_projection(path):
    with open(path) as fh:
        d, m = (int(x) for x in fh.readline().split())
        W = np.loadtxt(fh, ndmin=2)
    return W.reshape(d, m)
