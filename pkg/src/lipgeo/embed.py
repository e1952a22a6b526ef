"""Normal-embedding tower: append one distance coordinate per pancake until the sample is LNE.

Stage j+1 appends h_{j+1}(x) = d_P(x, X_{j+1}), the chain distance (in the
stage-j coordinates) to the closure of pancake j+1.  Every graph edge is a
chain hop, so h is 1-Lipschitz along edges and each stage stretches edge
lengths by at most sqrt(2) while shrinking none.
"""
import json
import os
from dataclasses import dataclass, field

import numpy as np
from scipy.sparse.csgraph import dijkstra
from scipy.spatial.distance import cdist
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from .analysis.lne import estimate_lne_constant, farthest_point_indices
from .analysis.reports import LipschitzEstimate
from .exceptions import ClaimViolated, InvalidDecomposition
from .metric import PancakeDecomposition, build_graph, chain_graph, distance_to_subset

DELTA = 0.1
CLAIM_CONSTANT = 3.0
DISTORTION_SOURCES = 512


@dataclass
class EmbeddingTrace:
    stage_points: list
    stage_functions: list
    claim_checks: list
    final_lne: LipschitzEstimate
    initial_lne: LipschitzEstimate
    decomposition: PancakeDecomposition
    graphs: list = field(repr=False, default_factory=list)
    delta: float = DELTA

    @property
    def k(self):
        return len(self.stage_functions)

    @property
    def final_points(self):
        return self.stage_points[-1]

    @property
    def passed(self):
        return all(c["passed"] for c in self.claim_checks)

    def manifest(self):
        return {
            "stages": [{"stage": j, "dimension": int(P.shape[1]), "nodes": int(P.shape[0]), "file": f"stage_{j}.csv"}
                       for j, P in enumerate(self.stage_points)],
            "claim_checks": self.claim_checks,
            "initial_lne": self.initial_lne.to_dict(),
            "final_lne": self.final_lne.to_dict(),
            "delta": self.delta,
            "pancakes": self.k,
            "M": self.decomposition.M,
        }

    def save(self, directory):
        """One CSV per stage (coordinates, then the stage's h column) plus manifest.json."""
        os.makedirs(directory, exist_ok=True)
        for j, P in enumerate(self.stage_points):
            with open(os.path.join(directory, f"stage_{j}.csv"), "w") as fh:
                n = P.shape[1]
                fh.write(",".join(f"x{i + 1}" for i in range(n)) + "\n")
                for row in P:
                    fh.write(",".join(repr(float(v)) for v in row) + "\n")
        with open(os.path.join(directory, "manifest.json"), "w") as fh:
            json.dump(self.manifest(), fh, indent=2, sort_keys=True)


def _claim_check(stage, graph_j, chain_j, graph_next, S, delta):
    """Max of d_P^j(x, y) / |mu x - mu y| and d_inn^{j+1}(x, y) / |mu x - mu y| over x in S, y anywhere."""
    P_next = graph_next.points
    E = cdist(P_next[S], P_next)
    D_pan = np.atleast_2d(dijkstra(chain_j, directed=False, indices=S))
    D_inn = np.atleast_2d(dijkstra(graph_next.adjacency, directed=False, indices=S))
    mask = (E > 0) & np.isfinite(D_inn)
    out = {"stage": stage + 1, "pairs": int(mask.sum())}
    for key, D in (("pancake", D_pan), ("inner", D_inn)):
        R = np.where(mask, D / np.where(mask, E, 1.0), 0.0)
        if mask.any():
            i, j = np.unravel_index(np.argmax(R), R.shape)
            out[f"{key}_ratio"] = float(R[i, j])
            out[f"{key}_witness"] = [int(S[i]), int(j)]
        else:
            out[f"{key}_ratio"] = 0.0
            out[f"{key}_witness"] = None
    out["pancake_bound"] = CLAIM_CONSTANT
    out["inner_bound"] = CLAIM_CONSTANT * (1 + delta)
    out["passed"] = bool(out["pancake_ratio"] <= CLAIM_CONSTANT * (1 + 1e-12)
                         and out["inner_ratio"] <= out["inner_bound"])
    return out


def normal_embed(cloud, graph=None, dec=None, delta=DELTA, strict=True):
    """Run the tower on a sampled set with a pancake decomposition.

    ``dec`` defaults to the cloud's piece labels.  With ``strict`` a failed
    per-stage check raises :class:`ClaimViolated` carrying the partial trace.
    """
    points = cloud.points if hasattr(cloud, "points") else np.asarray(cloud, dtype=np.float64)
    graph = build_graph(cloud) if graph is None else graph
    if not graph.is_connected:
        raise InvalidDecomposition("the sample graph must be connected")
    if dec is None:
        dec = PancakeDecomposition.from_labels(graph, cloud.piece_label)
    dec.validate(graph)
    initial = estimate_lne_constant(graph)
    stage_points, funcs, checks, graphs = [points], [], [], [graph]
    G = graph
    for j in range(dec.k):
        S = dec.closure_nodes(j)
        chain = chain_graph(G.points, dec)
        h = distance_to_subset(G, dec, S, "pancake", chain=chain).filled(np.inf)
        if not np.all(np.isfinite(h)):
            raise InvalidDecomposition(f"pancake {j} is not chain-reachable from every node")
        G_next = G.with_points(np.hstack([G.points, h[:, None]]))
        check = _claim_check(j, G, chain, G_next, S, delta)
        funcs.append(h)
        checks.append(check)
        stage_points.append(G_next.points)
        graphs.append(G_next)
        G = G_next
        if strict and not check["passed"]:
            partial = EmbeddingTrace(stage_points, funcs, checks, None, initial, dec, graphs, delta)
            which = "pancake" if check["pancake_ratio"] > CLAIM_CONSTANT * (1 + 1e-12) else "inner"
            raise ClaimViolated(f"stage {j + 1}: {which} ratio {check[which + '_ratio']:.4g} exceeds its bound",
                                j + 1, check[which + "_witness"], check[which + "_ratio"], partial)
    final = estimate_lne_constant(G)
    return EmbeddingTrace(stage_points, funcs, checks, final, initial, dec, graphs, delta)


def embedding_distortion(trace, max_sources=DISTORTION_SOURCES):
    """Max over sampled pairs of max(d_final / d_orig, d_orig / d_final) in the inner metrics."""
    g0, gk = trace.graphs[0], trace.graphs[-1]
    src = np.arange(len(g0))
    if len(g0) > 2 * max_sources:
        src = farthest_point_indices(g0.points, max_sources)
    D0 = np.atleast_2d(dijkstra(g0.adjacency, directed=False, indices=src))
    Dk = np.atleast_2d(dijkstra(gk.adjacency, directed=False, indices=src))
    mask = (D0 > 0) & np.isfinite(D0)
    if not mask.any():
        return 1.0
    r = Dk[mask] / D0[mask]
    return float(max(1.0, r.max(), 1.0 / r.min()))


def distortion_bound(k, delta=DELTA):
    return 2.0 ** (k / 2.0) * (1 + delta)


class NormalEmbedding(TransformerMixin, BaseEstimator):
    """Estimator wrapper: ``fit(cloud_or_points, labels)`` runs the tower; ``embedding_`` holds the result."""

    def __init__(self, density=None, delta=DELTA, strict=True):
        self.density = density
        self.delta = delta
        self.strict = strict

    def fit(self, X, labels=None):
        if hasattr(X, "points"):
            cloud = X
            labels = X.piece_label if labels is None else labels
        else:
            from .setdef import SampleCloud

            if self.density is None or labels is None:
                raise ValueError("raw points need a density and pancake labels")
            cloud = SampleCloud(np.asarray(X, dtype=np.float64), labels, np.zeros(len(labels)), self.density)
        graph = build_graph(cloud, density=self.density or cloud.density_target)
        dec = PancakeDecomposition.from_labels(graph, labels)
        self.trace_ = normal_embed(cloud, graph, dec, self.delta, self.strict)
        self.embedding_ = self.trace_.final_points
        self.n_features_in_ = cloud.dim
        return self

    def fit_transform(self, X, labels=None):
        return self.fit(X, labels).embedding_

    def transform(self, X):
        check_is_fitted(self, "embedding_")
        X = np.asarray(X, dtype=np.float64)
        base = self.trace_.stage_points[0]
        if X.shape != base.shape or not np.array_equal(X, base):
            raise ValueError("the embedding is defined on the fitted sample only")
        return self.embedding_
