"""Alternating solver for joint multi-view feature selection and graph learning.

One outer iteration, from the current graph ``S`` (Laplacian ``L``, indicator
``F`` = the ``c`` smallest eigenvectors of ``L``):

1. refit every projection ``W_v`` by the reweighted eigen alternation;
2. rebuild ``S`` row by row from ``T = sum_v alpha_v dist(W_v^T X_v) + lam * dist(F)``;
3. rebuild ``L`` and ``F`` from the new graph;
4. refresh the view weights ``alpha_v = (p/2) h_v^((p-2)/2)``;
5. move ``lam`` towards exactly ``c`` connected components.
"""

import logging
import time
import warnings
from dataclasses import asdict, dataclass, field
from typing import List, Optional, Sequence, Union

import numpy as np

from . import graph, projection
from .errors import InvalidConfig, InvalidCount

log = logging.getLogger(__name__)

H_MIN = 1e-12


@dataclass
class SolverConfig:
    c: int = 2
    gamma: float = 1.0
    p: float = 1.0
    k: int = 10
    m: Union[None, str, int, Sequence[int]] = None  # "full": m_v = d_v
    lambda0: Optional[float] = None  # None: the shared mu after initialization
    lambda_factor: float = 2.0
    tol: float = 1e-5
    max_outer: int = 50
    eps: float = projection.EPS
    inner_tol: float = projection.INNER_TOL
    max_inner: int = projection.MAX_INNER
    edge_eps: float = graph.EDGE_EPS
    mu_mode: str = "shared"
    seed: int = 0

    def validate(self, ds=None):
        if not (isinstance(self.c, (int, np.integer)) and self.c >= 2):
            raise InvalidConfig(f"c must be an integer >= 2, got {self.c!r}")
        if not 0 < self.p <= 2:
            raise InvalidConfig(f"p must lie in (0, 2], got {self.p}")
        if self.gamma < 0:
            raise InvalidConfig(f"gamma must be non-negative, got {self.gamma}")
        if not (isinstance(self.k, (int, np.integer)) and self.k >= 1):
            raise InvalidConfig(f"k must be a positive integer, got {self.k!r}")
        if self.lambda0 is not None and not self.lambda0 > 0:
            raise InvalidConfig(f"lambda0 must be positive, got {self.lambda0}")
        if not self.lambda_factor > 1:
            raise InvalidConfig(f"lambda_factor must exceed 1, got {self.lambda_factor}")
        if not self.tol > 0 or not self.inner_tol > 0 or not self.eps > 0:
            raise InvalidConfig("tol, inner_tol and eps must be positive")
        if not (isinstance(self.max_outer, (int, np.integer)) and self.max_outer >= 1):
            raise InvalidConfig(f"max_outer must be a positive integer, got {self.max_outer!r}")
        if not (isinstance(self.max_inner, (int, np.integer)) and self.max_inner >= 1):
            raise InvalidConfig(f"max_inner must be a positive integer, got {self.max_inner!r}")
        if self.mu_mode not in ("shared", "row"):
            raise InvalidConfig(f"mu_mode must be 'shared' or 'row', got {self.mu_mode!r}")
        if isinstance(self.m, str) and self.m != "full":
            raise InvalidConfig(f"m must be an integer, a list or 'full', got {self.m!r}")
        if ds is not None:
            if self.k > ds.n - 2:
                raise InvalidConfig(f"k={self.k} must be <= n-2={ds.n - 2}")
            if self.c > ds.n:
                raise InvalidConfig(f"c={self.c} exceeds n={ds.n}")
            if isinstance(self.m, (list, tuple, np.ndarray)):
                if len(self.m) != ds.V:
                    raise InvalidConfig(f"m lists {len(self.m)} dims for {ds.V} views")
        return self

    def view_dims(self, dims):
        if self.m is None:
            return [projection.default_dim(d) for d in dims]
        if self.m == "full":
            return list(dims)
        ms = [self.m] * len(dims) if isinstance(self.m, (int, np.integer)) else list(self.m)
        return [projection.clamp_dim(int(m), d) for m, d in zip(ms, dims)]

    def to_dict(self):
        out = asdict(self)
        if isinstance(self.m, (list, tuple, np.ndarray)):
            out["m"] = [int(x) for x in self.m]
        elif isinstance(self.m, np.integer):
            out["m"] = int(self.m)
        return out


@dataclass
class IterationRecord:
    objective: float
    lam: float  # value used to build this iteration's graph
    mu: float
    component_count: int
    alpha: List[float]
    inner_iterations: List[int]


@dataclass
class SolverState:
    S: np.ndarray
    laplacian: graph.Laplacian
    projections: List[np.ndarray]
    F: np.ndarray
    eigenvalues: np.ndarray
    alpha: np.ndarray
    lam: float
    mu: float
    mu_rows: np.ndarray
    iterations: List[IterationRecord] = field(default_factory=list)
    inner_histories: List[List[List[float]]] = field(default_factory=list)
    converged: bool = False
    status: str = "running"
    timings: dict = field(default_factory=dict)
    init_mu: float = float("nan")
    init_component_count: int = 0

    @property
    def objective_history(self):
        return [r.objective for r in self.iterations]

    @property
    def component_count_history(self):
        return [r.component_count for r in self.iterations]

    @property
    def lambda_history(self):
        return [r.lam for r in self.iterations]

    @property
    def alpha_history(self):
        return np.array([r.alpha for r in self.iterations])

    @property
    def normalized_alpha(self):
        return self.alpha / self.alpha.sum()

    @property
    def component_count(self):
        return self.iterations[-1].component_count if self.iterations else self.init_component_count


def view_traces(projections, views, L):
    """``h_v = Tr(W_v^T X_v L X_v^T W_v)`` per view."""
    out = []
    for W, X in zip(projections, views):
        Y = W.T @ X
        out.append(float(np.trace(Y @ L @ Y.T)))
    return np.array(out)


def weights_from_traces(h, p):
    h = np.maximum(np.asarray(h, dtype=float), H_MIN)
    return (p / 2.0) * h ** ((p - 2.0) / 2.0)


def update_view_weights(projections, views, laplacian, p):
    """``alpha_v = (p/2) max(h_v, h_min)^((p-2)/2)``; p = 2 gives all ones."""
    L = laplacian.L if isinstance(laplacian, graph.Laplacian) else laplacian
    h = view_traces(projections, views, L)
    if np.any(h < H_MIN):
        log.info("view trace below %.0e clamped: %s", H_MIN, h.tolist())
    return weights_from_traces(h, p)


def update_indicator(laplacian, c):
    """``F``: the ``c`` smallest eigenvectors of ``L``.  Returns ``(F, values)``."""
    L = laplacian.L if isinstance(laplacian, graph.Laplacian) else laplacian
    values, F = graph.smallest_eigs(L, c)
    return F, values


def adapt_lambda(lam, count, c, factor=2.0):
    """Too many components: halve (by ``factor``); too few: double."""
    if count > c:
        return lam / factor
    if count < c:
        return lam * factor
    return lam


def objective_total(S, L, projections, views, F, mu, lam, gamma, p, eps=projection.EPS):
    """``sum_v [h_v^(p/2) + gamma l21_eps(W_v)] + mu sum s_ij^2 + 2 lam Tr(F^T L F)``."""
    h = np.maximum(view_traces(projections, views, L), 0.0)
    total = float(np.sum(h ** (p / 2.0)))
    total += gamma * sum(projection.smoothed_l21(W, eps) for W in projections)
    total += mu * float(np.sum(np.asarray(S) ** 2))
    total += 2.0 * lam * float(np.trace(F.T @ L @ F))
    return total


def state_objective(state, views, config):
    return objective_total(state.S, state.laplacian.L, state.projections, views, state.F,
                           state.mu, state.lam, config.gamma, config.p, config.eps)


def fit(ds, config, callback=None):
    """Run the alternating solver on ``ds``.

    Non-convergence within ``max_outer`` is reported through
    ``state.status`` rather than raised.  ``callback(state)`` is invoked
    after each outer iteration.
    """
    config.validate(ds)
    views = ds.views
    V, c, k = ds.V, config.c, config.k
    ms = config.view_dims(ds.dims)
    full = config.m == "full"
    timings = {"init": 0.0, "projection": 0.0, "similarity": 0.0, "spectral": 0.0, "weights": 0.0}

    t0 = time.perf_counter()
    alpha = np.full(V, 1.0 / V)
    upd = graph.init_similarity(views, alpha, k)
    S = upd.S
    lap = graph.build_laplacian(S)
    F, evals = update_indicator(lap, c)
    lam = upd.mu if config.lambda0 is None else float(config.lambda0)
    timings["init"] += time.perf_counter() - t0

    state = SolverState(S=S, laplacian=lap, projections=[], F=F, eigenvalues=evals, alpha=alpha,
                        lam=lam, mu=upd.mu, mu_rows=upd.mu_rows, timings=timings,
                        init_mu=upd.mu,
                        init_component_count=graph.count_components(S, config.edge_eps))
    prev_obj = None
    for it in range(config.max_outer):
        t0 = time.perf_counter()
        Ws, inner = [], []
        for v, X in enumerate(views):
            W, hist = projection.fit_projection(X, lap.L, config.gamma, alpha[v], ms[v],
                                                config.eps, config.inner_tol, config.max_inner,
                                                allow_full=full)
            Ws.append(W)
            inner.append(hist)
        t1 = time.perf_counter()
        timings["projection"] += t1 - t0

        P = graph.weighted_view_dists(views, alpha, Ws)
        Q = graph.pairwise_sq_dists(F.T)
        lam_used = lam
        upd = graph.update_similarity(P, Q, lam_used, k, mu_mode=config.mu_mode)
        S = upd.S
        t2 = time.perf_counter()
        timings["similarity"] += t2 - t1

        lap = graph.build_laplacian(S)
        F, evals = update_indicator(lap, c)
        count = graph.count_components(S, config.edge_eps)
        t3 = time.perf_counter()
        timings["spectral"] += t3 - t2

        alpha = update_view_weights(Ws, views, lap, config.p)
        timings["weights"] += time.perf_counter() - t3

        state.S, state.laplacian, state.F, state.eigenvalues = S, lap, F, evals
        state.projections, state.alpha = Ws, alpha
        state.mu, state.mu_rows, state.lam = upd.mu, upd.mu_rows, lam_used
        obj = state_objective(state, views, config)
        state.iterations.append(IterationRecord(obj, lam_used, upd.mu, count,
                                                alpha.tolist(), [len(h) for h in inner]))
        state.inner_histories.append(inner)
        log.debug("iter %d: obj=%.6g lam=%.3g mu=%.3g components=%d", it, obj, lam_used,
                  upd.mu, count)
        if callback is not None:
            callback(state)

        if count == c and prev_obj is not None and \
                abs(prev_obj - obj) <= config.tol * max(abs(prev_obj), np.finfo(float).tiny):
            state.converged = True
            break
        prev_obj = obj
        lam = adapt_lambda(lam, count, c, config.lambda_factor)
        state.lam = lam

    state.status = "converged" if state.converged else "max_outer_reached"
    if not state.converged:
        log.warning("no convergence after %d outer iterations (components=%d, c=%d)",
                    config.max_outer, state.component_count, c)
    return state


@dataclass(frozen=True)
class RankEntry:
    view: int
    feature: int
    score: float


def rank_features(projections):
    """All features ordered by ``||w_vi||_2`` descending; ties by (view, feature)."""
    if isinstance(projections, SolverState):
        projections = projections.projections
    entries = []
    for v, W in enumerate(projections):
        for i, score in enumerate(np.linalg.norm(W, axis=1)):
            entries.append(RankEntry(v, i, float(score)))
    entries.sort(key=lambda e: (-e.score, e.view, e.feature))
    return entries


def select_features(ds, ranking, s):
    """Keep the top ``s`` ranked features; views left empty are dropped."""
    total = sum(ds.dims)
    if not (isinstance(s, (int, np.integer)) and 1 <= s <= total):
        raise InvalidCount(f"s must be an integer in [1, {total}], got {s!r}")
    if len(ranking) != total:
        raise InvalidCount(f"ranking has {len(ranking)} entries, dataset has {total} features")
    keep = [[] for _ in range(ds.V)]
    for e in ranking[:s]:
        keep[e.view].append(e.feature)
    views = []
    for v, idx in enumerate(keep):
        if not idx:
            warnings.warn(f"view {v} lost all features and is dropped", stacklevel=2)
            continue
        views.append(ds.views[v][sorted(idx)])
    return ds.replace(views=views)


def save_ranking(path, ranking):
    with open(path, "w") as fh:
        fh.write("rank,view,feature,score\n")
        for r, e in enumerate(ranking):
            fh.write(f"{r},{e.view},{e.feature},{e.score:.17g}\n")


def load_ranking(path):
    out = []
    with open(path) as fh:
        next(fh)
        for line in fh:
            if line.strip():
                _, v, i, score = line.strip().split(",")
                out.append(RankEntry(int(v), int(i), float(score)))
    return out
