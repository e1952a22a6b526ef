"""Empirical LNE constants: the largest ratio of graph geodesic to chord on a sample."""
import numpy as np
from scipy.sparse.csgraph import dijkstra
from scipy.spatial.distance import cdist
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted

from .._validation import check_points
from ..exceptions import DisconnectedInput
from ..metric import build_graph
from .reports import LipschitzEstimate

ALL_PAIRS_LIMIT = 2000
N_SEEDS = 512
TIE_RTOL = 1e-9


def farthest_point_indices(points, m, start=0):
    """Greedy farthest-point subsample of ``m`` row indices, starting from ``start``."""
    N = points.shape[0]
    if m >= N:
        return np.arange(N)
    chosen = [int(start)]
    d = np.linalg.norm(points - points[start], axis=1)
    for _ in range(m - 1):
        # lowest index among near-ties, so rounding of rotated or scaled copies picks the same point
        nxt = int(np.flatnonzero(d >= d.max() * (1 - TIE_RTOL))[0])
        chosen.append(nxt)
        d = np.minimum(d, np.linalg.norm(points - points[nxt], axis=1))
    return np.sort(np.asarray(chosen, dtype=np.int64))


def _component_estimate(graph, nodes, limit, n_seeds):
    P = graph.points[nodes]
    A = graph.adjacency[nodes][:, nodes]
    if nodes.size <= limit:
        sources = np.arange(nodes.size)
    else:
        sources = farthest_point_indices(P, n_seeds)
    best, witness, scanned = -np.inf, None, 0
    for s in range(0, sources.size, 256):
        src = sources[s:s + 256]
        D = np.atleast_2d(dijkstra(A, directed=False, indices=src))
        E = cdist(P[src], P)
        mask = (E > 0) & np.isfinite(D)
        scanned += int(mask.sum())
        if not np.any(mask):
            continue
        R = np.where(mask, D / np.where(mask, E, 1.0), 0.0)
        i, j = np.unravel_index(np.argmax(R), R.shape)
        if R[i, j] > best:
            best = float(R[i, j])
            a, b = int(nodes[src[i]]), int(nodes[j])
            witness = (min(a, b), max(a, b))
    return max(best, 1.0), witness, scanned


def estimate_lne_constant(graph, on_disconnected="raise", all_pairs_limit=ALL_PAIRS_LIMIT, n_seeds=N_SEEDS):
    """Max of d_inn / d_out over sampled pairs, with the witness pair.

    Components up to ``all_pairs_limit`` nodes are scanned exhaustively;
    larger ones from ``n_seeds`` farthest-point sources.  A disconnected
    graph raises :class:`DisconnectedInput` carrying per-component estimates,
    unless ``on_disconnected="max"``, which returns the largest of them.
    """
    note = f"{graph.rule_label}, h={graph.density}" if graph.density else graph.rule_label
    per = []
    for c in range(graph.n_components):
        nodes = np.flatnonzero(graph.component_id == c)
        if nodes.size < 2:
            per.append(LipschitzEstimate(1.0, None, 0, note))
            continue
        C, w, n = _component_estimate(graph, nodes, all_pairs_limit, n_seeds)
        per.append(LipschitzEstimate(C, w, n, note))
    if len(per) == 1:
        return per[0]
    best = max(per, key=lambda e: e.constant)
    merged = LipschitzEstimate(best.constant, best.witness_pair, sum(e.pairs_scanned for e in per),
                               note + f", {len(per)} components", per)
    if on_disconnected == "max":
        return merged
    exc = DisconnectedInput(f"graph has {len(per)} components; per-component estimates attached")
    exc.per_component = per
    exc.estimate = merged
    raise exc


class LNEEstimator(BaseEstimator):
    """Estimate the LNE constant of a point sample.

    Parameters
    ----------
    density : float or None
        Sampling spacing h; the graph uses epsilon = 3h unless ``epsilon`` is given.
    epsilon, k : graph rule overrides.
    """

    def __init__(self, density=None, epsilon=None, k=None, all_pairs_limit=ALL_PAIRS_LIMIT, n_seeds=N_SEEDS):
        self.density = density
        self.epsilon = epsilon
        self.k = k
        self.all_pairs_limit = all_pairs_limit
        self.n_seeds = n_seeds

    def fit(self, X, y=None):
        if hasattr(X, "points"):
            pts, density = X.points, X.density_target if self.density is None else self.density
        else:
            pts, density = check_points(X), self.density
        self.graph_ = build_graph(pts, epsilon=self.epsilon, k=self.k, density=density)
        est = estimate_lne_constant(self.graph_, "max", self.all_pairs_limit, self.n_seeds)
        self.estimate_ = est
        self.constant_ = est.constant
        self.witness_pair_ = est.witness_pair
        self.n_features_in_ = pts.shape[1]
        return self

    def score(self, X=None, y=None):
        check_is_fitted(self, "constant_")
        return -self.constant_
