"""Consensus similarity graph: Laplacian, k-sparse simplex rows, mu, components.

A graph is a dense ``n x n`` array ``S`` whose rows lie on the probability
simplex with ``S[i, i] == 0``.  Self-similarity is excluded from every row
problem; otherwise the simplex constraint puts all mass on the diagonal.
"""

from typing import NamedTuple

import numpy as np
import scipy.linalg
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import connected_components
from scipy.spatial.distance import cdist

from .errors import ConvergenceFailure, InvalidMu, KTooLarge, NotSymmetric

MU_MIN = 1e-10
EDGE_EPS = 1e-8


class Laplacian(NamedTuple):
    degree: np.ndarray  # diagonal of D
    L: np.ndarray

    @property
    def D(self):
        return np.diag(self.degree)


class SimilarityUpdate(NamedTuple):
    S: np.ndarray
    mu: float  # shared (averaged) value, reported
    mu_rows: np.ndarray  # per-row values actually used in the solves


def build_laplacian(S):
    """Return ``D`` and ``L = D - (S + S^T) / 2`` for a similarity matrix."""
    S = np.asarray(S, dtype=float)
    W = (S + S.T) / 2.0
    degree = W.sum(axis=1)
    L = np.diag(degree) - W
    return Laplacian(degree, L)


def pairwise_sq_dists(Y):
    """Squared Euclidean distances between the columns of ``Y`` (m x n)."""
    Y = np.atleast_2d(np.asarray(Y, dtype=float))
    D = cdist(Y.T, Y.T, "sqeuclidean")
    np.fill_diagonal(D, 0.0)
    return D


def _admissible(n, self_index, mask=None):
    adm = np.ones(n, dtype=bool) if mask is None else np.asarray(mask, dtype=bool).copy()
    if self_index is not None:
        adm[self_index] = False
    return adm


def _simplex_rows(V, admissible):
    """Euclidean projection of each row of ``V`` onto the simplex.

    Only entries flagged in ``admissible`` may be nonzero.  Rows are
    independent, so the batch result equals row-by-row application.
    """
    V = np.where(admissible, V, -np.inf)
    n_adm = admissible.sum(axis=1)
    u = -np.sort(-V, axis=1)
    css = np.cumsum(np.where(np.isfinite(u), u, 0.0), axis=1)
    j = np.arange(1, V.shape[1] + 1)
    with np.errstate(invalid="ignore"):
        cond = (u * j > css - 1.0) & (j <= n_adm[:, None])
    # cond is true on a prefix; its length is the support size
    rho = cond.sum(axis=1)
    theta = (css[np.arange(V.shape[0]), rho - 1] - 1.0) / rho
    out = V - theta[:, None]
    # entries tied with the threshold are zero in exact arithmetic
    fin = np.where(admissible, np.abs(V), 0.0).max(axis=1)
    ulp = 8 * np.finfo(float).eps * (fin + np.abs(theta))
    out[out <= ulp[:, None]] = 0.0
    out[~admissible] = 0.0
    return out


def solve_row(t, mu, self_index=None, mask=None):
    """Exact minimizer of ``||s + t / (2 mu)||^2`` over the simplex.

    Entries at ``self_index`` (and outside ``mask``) are pinned to zero.  When
    ``mu`` is the per-row value from :func:`row_mus` with neighbor count
    ``k``, the result has the closed form
    ``s_j = (t_(k+1) - t_j)_+ / (k t_(k+1) - sum_{h<=k} t_(h))``.
    """
    if not mu > 0:
        raise InvalidMu(f"mu must be positive, got {mu}")
    t = np.asarray(t, dtype=float)
    adm = _admissible(t.size, self_index, mask)
    if not adm.any():
        raise KTooLarge("row has no admissible neighbor")
    # the projection is invariant to a constant shift; shifting keeps v small
    v = -(t - t[adm].min()) / (2.0 * mu)
    return _simplex_rows(v[None, :], adm[None, :])[0]


def row_objective(s, t, mu):
    """``sum_j t_j s_j + mu s_j^2`` for one row (or rows, with per-row mu)."""
    s, t = np.asarray(s, dtype=float), np.asarray(t, dtype=float)
    mu = np.asarray(mu, dtype=float)
    if s.ndim == 1:
        return float(t @ s + mu * (s @ s))
    return (t * s).sum(axis=1) + mu * (s * s).sum(axis=1)


def row_mus(T, k, mu_min=MU_MIN):
    """Per-row ``mu_i = (k/2) t_(k+1) - (1/2) sum_{j<=k} t_(j)``, clamped below.

    The diagonal is excluded and the remaining costs are sorted ascending.
    With this value the row solution has exactly ``k`` nonzeros unless
    ``t_(k) == t_(k+1)``.
    """
    T = np.asarray(T, dtype=float)
    n = T.shape[0]
    if k < 1 or k + 1 > n - 1:
        raise KTooLarge(f"k={k} needs k+1 <= n-1 admissible neighbors (n={n})")
    off = T[~np.eye(n, dtype=bool)].reshape(n, n - 1)
    srt = np.sort(off, axis=1)
    mu = 0.5 * k * srt[:, k] - 0.5 * srt[:, :k].sum(axis=1)
    return np.maximum(mu, mu_min)


def determine_mu(T, k, mu_min=MU_MIN):
    """Shared regularizer: the mean of the per-row values."""
    return float(row_mus(T, k, mu_min).mean())


def update_similarity(P, Q, lam, k, mu_min=MU_MIN, mu_mode="row"):
    """Solve all row problems for costs ``T = P + lam * Q``.

    ``mu_mode="row"`` solves each row with its own ``mu_i``, which gives
    exactly ``k`` neighbors per non-degenerate row.  ``mu_mode="shared"``
    uses the average of the ``mu_i`` for every row.  The average is
    returned either way, together with the values actually used.
    """
    if mu_mode not in ("row", "shared"):
        raise ValueError(f"unknown mu_mode {mu_mode!r}")
    P = np.asarray(P, dtype=float)
    T = P if Q is None or lam == 0 else P + lam * np.asarray(Q, dtype=float)
    n = T.shape[0]
    mu_rows = row_mus(T, k, mu_min)
    if mu_mode == "shared":
        mu_rows = np.full(n, mu_rows.mean())
    adm = ~np.eye(n, dtype=bool)
    tmin = np.where(adm, T, np.inf).min(axis=1, keepdims=True)
    V = -(T - tmin) / (2.0 * mu_rows[:, None])
    S = _simplex_rows(V, adm)
    return SimilarityUpdate(S, float(mu_rows.mean()), mu_rows)


def weighted_view_dists(views, alpha, projections=None):
    """``sum_v alpha_v ||W_v^T x_i - W_v^T x_j||^2``; raw features if no projections."""
    P = None
    for v, X in enumerate(views):
        Y = X if projections is None else projections[v].T @ X
        term = alpha[v] * pairwise_sq_dists(Y)
        P = term if P is None else P + term
    return P


def init_similarity(views, alpha, k, mu_mode="row"):
    """Initial graph from alpha-weighted raw-feature distances (no rank term)."""
    return update_similarity(weighted_view_dists(views, alpha), None, 0.0, k, mu_mode=mu_mode)


def _edges(S, edge_eps):
    W = (np.asarray(S) + np.asarray(S).T) / 2.0
    return csr_matrix(W > edge_eps)


def count_components(S, edge_eps=EDGE_EPS):
    """Connected components of the graph with edges where ``(s_ij + s_ji)/2 > edge_eps``."""
    return int(connected_components(_edges(S, edge_eps), directed=False)[0])


def component_labels(S, edge_eps=EDGE_EPS):
    return connected_components(_edges(S, edge_eps), directed=False)[1]


def _sign_normalize(vectors):
    idx = np.argmax(np.abs(vectors), axis=0)
    signs = np.sign(vectors[idx, np.arange(vectors.shape[1])])
    signs[signs == 0] = 1.0
    return vectors * signs


def smallest_eigs(M, c):
    """The ``c`` smallest eigenpairs of a symmetric matrix, ascending.

    Each eigenvector is flipped so its largest-magnitude entry is positive.
    """
    M = np.asarray(M, dtype=float)
    n = M.shape[0]
    if M.ndim != 2 or M.shape[1] != n:
        raise NotSymmetric(f"expected a square matrix, got shape {M.shape}")
    if not 1 <= c <= n:
        raise ValueError(f"c must be in [1, {n}], got {c}")
    asym = np.abs(M - M.T).max() if n else 0.0
    if asym > 1e-9 * max(1.0, np.abs(M).max()):
        raise NotSymmetric(f"max asymmetry {asym:.3g}")
    M = (M + M.T) / 2.0
    try:
        values, vectors = scipy.linalg.eigh(M, subset_by_index=[0, c - 1])
    except (np.linalg.LinAlgError, ValueError) as exc:
        raise ConvergenceFailure(str(exc)) from exc
    if not np.all(np.isfinite(values)):
        raise ConvergenceFailure("non-finite eigenvalues")
    return values, _sign_normalize(vectors)


def save_graph(path, S, tol=0.0):
    """Sparse triplet text: ``n`` on the first line, then ``i j s_ij`` (0-based)."""
    S = np.asarray(S, dtype=float)
    rows, cols = np.nonzero(np.abs(S) > tol)
    with open(path, "w") as fh:
        fh.write(f"{S.shape[0]}\n")
        for i, j in zip(rows, cols):
            fh.write(f"{i} {j} {S[i, j]:.17g}\n")


def load_graph(path):
    with open(path) as fh:
        n = int(fh.readline())
        S = np.zeros((n, n))
        for line in fh:
            if line.strip():
                i, j, s = line.split()
                S[int(i), int(j)] = float(s)
    return S
