"""Neighborhood graphs and the three metrics on a sampled set: outer, inner, pancake.

Inner distance is the shortest-path length in an epsilon-ball (or k-nearest)
graph with Euclidean edge weights.  The pancake distance is the shortest
path in the chain graph joining every two nodes that share a closure label;
on a finite cloud this realizes the infimum over chains of any length.
"""
from dataclasses import dataclass

import numpy as np
from scipy.sparse import coo_matrix, csr_matrix
from scipy.sparse.csgraph import connected_components, dijkstra
from scipy.spatial import cKDTree
from scipy.spatial.distance import cdist
from sklearn.base import BaseEstimator, RegressorMixin
from sklearn.utils.validation import check_is_fitted

from ._validation import check_points, check_positive
from .exceptions import InvalidDecomposition, NotCLipschitz
from .radius import RadiusFunction  # noqa: F401  (re-exported: radius functions live with the metrics)

EPSILON_FACTOR = 3.0
# pairs within this relative margin of epsilon are edges; lattice samples put many
# pairs exactly at epsilon, and rounding must not decide their fate
EDGE_RTOL = 1e-9
# scipy's csgraph drops explicit zeros; coincident points still need an edge
_ZERO_WEIGHT = np.finfo(np.float64).tiny


class _Unreachable:
    """Distance between points in different components. Never a number."""

    _instance = None

    def __new__(cls):
        if cls._instance is None:
            cls._instance = super().__new__(cls)
        return cls._instance

    def __repr__(self):
        return "UNREACHABLE"

    def __str__(self):
        return "unreachable"

    def __bool__(self):
        return False

    def __reduce__(self):
        return (_Unreachable, ())


UNREACHABLE = _Unreachable()


def as_distance(value):
    """Map a raw shortest-path float to a float or UNREACHABLE."""
    return UNREACHABLE if not np.isfinite(value) else float(value)


@dataclass(eq=False)
class MetricGraph:
    points: np.ndarray
    adjacency: csr_matrix
    rule: str
    rule_param: float
    component_id: np.ndarray
    density: float = None

    def __len__(self):
        return self.points.shape[0]

    @property
    def n_components(self):
        return int(self.component_id.max()) + 1 if len(self) else 0

    @property
    def rule_label(self):
        if self.rule == "epsilon-ball":
            return f"epsilon-ball({self.rule_param:.12g})"
        return f"k-nearest({int(self.rule_param)})"

    @property
    def is_connected(self):
        return self.n_components == 1

    def edges(self):
        """(u, v, weight) arrays with u < v."""
        coo = self.adjacency.tocoo()
        keep = coo.row < coo.col
        w = coo.data[keep].copy()
        w[w == _ZERO_WEIGHT] = 0.0
        return coo.row[keep], coo.col[keep], w

    def with_points(self, points):
        """Same adjacency, Euclidean weights recomputed for new coordinates."""
        points = check_points(points)
        if points.shape[0] != len(self):
            raise ValueError("point count changed")
        u, v, _ = self.edges()
        return _from_edges(points, u, v, self.rule, self.rule_param, self.density)

    def subgraph(self, nodes):
        """Induced subgraph on ``nodes`` (in the given order)."""
        nodes = np.asarray(nodes, dtype=np.int64)
        A = self.adjacency[nodes][:, nodes].tocsr()
        _, comp = connected_components(A, directed=False)
        return MetricGraph(self.points[nodes], A, self.rule, self.rule_param, comp, self.density)

    def to_edge_list(self):
        u, v, w = self.edges()
        lines = [f"# lipgeo-graph v1 rule={self.rule_label}"]
        lines += [f"{a} {b} {x!r}" for a, b, x in zip(u.tolist(), v.tolist(), w.tolist())]
        return "\n".join(lines) + "\n"

    def write_edge_list(self, path):
        with open(path, "w") as fh:
            fh.write(self.to_edge_list())


def read_edge_list(text_or_path, points):
    """Rebuild a graph from the edge-list format and the node coordinates."""
    text = text_or_path
    if hasattr(text_or_path, "__fspath__") or "\n" not in text_or_path:
        with open(text_or_path) as fh:
            text = fh.read()
    lines = text.splitlines()
    header = lines[0]
    if not header.startswith("# lipgeo-graph v1 rule="):
        raise ValueError("missing '# lipgeo-graph v1' header")
    label = header.split("rule=", 1)[1]
    rule, param = label.rstrip(")").split("(")
    body = [ln.split() for ln in lines[1:] if ln.strip()]
    u = np.array([int(b[0]) for b in body], dtype=np.int64)
    v = np.array([int(b[1]) for b in body], dtype=np.int64)
    return _from_edges(check_points(points), u, v, rule, float(param), None)


def _from_edges(points, u, v, rule, param, density):
    N = points.shape[0]
    w = np.linalg.norm(points[u] - points[v], axis=1)
    w = np.where(w == 0, _ZERO_WEIGHT, w)
    A = coo_matrix((np.concatenate([w, w]), (np.concatenate([u, v]), np.concatenate([v, u]))), shape=(N, N)).tocsr()
    _, comp = connected_components(A, directed=False)
    return MetricGraph(points, A, rule, param, comp.astype(np.int64), density)


def build_graph(cloud, epsilon=None, k=None, density=None):
    """Neighborhood graph over a cloud (or raw point array).

    Default rule is the epsilon-ball with epsilon = 3 * density target.
    With ``k`` the symmetrized k-nearest-neighbor rule is used instead.
    """
    points = cloud.points if hasattr(cloud, "points") else check_points(cloud)
    if density is None:
        density = getattr(cloud, "density_target", None)
    if len(points) == 0:
        raise ValueError("cannot build a graph on an empty cloud")
    tree = cKDTree(points)
    if k is not None:
        k = int(k)
        _, nbr = tree.query(points, min(k + 1, len(points)))
        nbr = nbr.reshape(len(points), -1)
        rows = np.repeat(np.arange(len(points)), nbr.shape[1] - 1)
        cols = nbr[:, 1:].ravel()
        u, v = np.minimum(rows, cols), np.maximum(rows, cols)
        pairs = np.unique(np.stack([u, v], axis=1), axis=0)
        return _from_edges(points, pairs[:, 0], pairs[:, 1], "k-nearest", k, density)
    if epsilon is None:
        if density is None:
            raise ValueError("epsilon or a density target is required")
        epsilon = EPSILON_FACTOR * density
    epsilon = check_positive(epsilon, "epsilon")
    reach = epsilon * (1 + EDGE_RTOL)
    pairs = tree.query_pairs(reach, output_type="ndarray")
    if pairs.size:
        # keep the rule exact: edge iff |u - v| <= epsilon (1 + EDGE_RTOL) with our own norm
        d = np.linalg.norm(points[pairs[:, 0]] - points[pairs[:, 1]], axis=1)
        pairs = pairs[d <= reach]
    else:
        pairs = np.zeros((0, 2), dtype=np.int64)
    return _from_edges(points, pairs[:, 0], pairs[:, 1], "epsilon-ball", epsilon, density)


# --------------------------------------------------------------------------- inner distance

def inner_distance_matrix(graph, sources=None):
    """Shortest-path lengths from ``sources`` (default: all nodes); ``inf`` marks unreachable."""
    idx = None if sources is None else np.atleast_1d(np.asarray(sources, dtype=np.int64))
    D = np.atleast_2d(dijkstra(graph.adjacency, directed=False, indices=idx))
    D[(D > 0) & (D < 1e-300)] = 0.0
    return _symmetrize(D, idx)


def _symmetrize(D, idx):
    """Make the source-by-source block exactly symmetric; path sums differ by rounding in the two directions."""
    if idx is None:
        return np.minimum(D, D.T)
    block = D[:, idx]
    D[:, idx] = np.minimum(block, block.T)
    return D


def inner_distance(graph, i, j):
    """Graph geodesic length between nodes i and j, or UNREACHABLE."""
    N = len(graph)
    if not (0 <= i < N and 0 <= j < N):
        raise IndexError("node index out of range")
    if graph.component_id[i] != graph.component_id[j]:
        return UNREACHABLE
    i, j = min(i, j), max(i, j)
    return as_distance(inner_distance_matrix(graph, [i])[0, j])


def outer_distance(graph, i, j):
    return float(np.linalg.norm(graph.points[i] - graph.points[j]))


# --------------------------------------------------------------------------- pancakes

@dataclass(eq=False)
class PancakeDecomposition:
    """Per-node pancake labels plus closure membership at sampling resolution.

    ``closure`` is a boolean (n_nodes, k) matrix.  :meth:`from_labels` puts a
    node in closure i when it belongs to piece i or is a graph neighbor of a
    node of piece i, so that every graph edge is a chain hop.
    """

    piece_of_node: np.ndarray
    closure: np.ndarray
    M: float = 1.0

    @property
    def k(self):
        return self.closure.shape[1]

    def closure_nodes(self, i):
        return np.flatnonzero(self.closure[:, i])

    def closure_membership(self, node):
        return frozenset(np.flatnonzero(self.closure[node]).tolist())

    @classmethod
    def from_labels(cls, graph, labels, M=None):
        labels = np.asarray(labels, dtype=np.int64)
        if labels.shape != (len(graph),):
            raise InvalidDecomposition("one label per graph node is required")
        uniq = np.unique(labels)
        remap = {int(l): i for i, l in enumerate(uniq)}
        lab = np.array([remap[int(l)] for l in labels], dtype=np.int64)
        k = len(uniq)
        closure = np.zeros((len(graph), k), dtype=bool)
        closure[np.arange(len(graph)), lab] = True
        u, v, _ = graph.edges()
        closure[u, lab[v]] = True
        closure[v, lab[u]] = True
        dec = cls(lab, closure, 1.0)
        dec.M = measure_pancake_constant(graph, dec) if M is None else float(M)
        return dec

    def validate(self, graph):
        if self.closure.shape[0] != len(graph):
            raise InvalidDecomposition("decomposition size does not match the graph")
        if not np.all(self.closure.any(axis=1)):
            raise InvalidDecomposition("some node carries no closure label")
        if not np.all(self.closure[np.arange(len(graph)), self.piece_of_node]):
            raise InvalidDecomposition("a node is missing from its own piece's closure")
        if self.M < 1:
            raise InvalidDecomposition("pancake constant M must be >= 1")
        for i in range(self.k):
            nodes = self.closure_nodes(i)
            if nodes.size == 0:
                raise InvalidDecomposition(f"closure {i} is empty")
            if graph.subgraph(nodes).n_components != 1:
                raise InvalidDecomposition(f"closure {i} is not connected at sampling resolution")
        return self


def measure_pancake_constant(graph, dec):
    """Max over closures of d_inn / d_out among the closure's node pairs."""
    M = 1.0
    for i in range(dec.k):
        nodes = dec.closure_nodes(i)
        if nodes.size < 2:
            continue
        D = inner_distance_matrix(graph, nodes)[:, nodes]
        E = cdist(graph.points[nodes], graph.points[nodes])
        mask = (E > 0) & np.isfinite(D)
        if np.any(mask):
            M = max(M, float(np.max(D[mask] / E[mask])))
    return M


def chain_graph(points, dec):
    """Sparse graph joining every two nodes that share a closure label, weighted by |u - v|."""
    N = points.shape[0]
    codes = []
    for i in range(dec.k):
        nodes = dec.closure_nodes(i)
        a, b = np.triu_indices(nodes.size, 1)
        codes.append(nodes[a] * N + nodes[b])
    codes = np.unique(np.concatenate(codes)) if codes else np.zeros(0, np.int64)
    u, v = np.divmod(codes, N)
    swap = u > v
    u[swap], v[swap] = v[swap], u[swap]
    w = np.linalg.norm(points[u] - points[v], axis=1)
    w = np.where(w == 0, _ZERO_WEIGHT, w)
    return coo_matrix((np.concatenate([w, w]), (np.concatenate([u, v]), np.concatenate([v, u]))),
                      shape=(N, N)).tocsr()


def pancake_distance_matrix(graph, dec, sources=None, chain=None):
    chain = chain_graph(graph.points, dec) if chain is None else chain
    idx = None if sources is None else np.atleast_1d(np.asarray(sources, dtype=np.int64))
    D = np.atleast_2d(dijkstra(chain, directed=False, indices=idx))
    D[(D > 0) & (D < 1e-300)] = 0.0
    return _symmetrize(D, idx)


def pancake_distance(graph, dec, i, j):
    """Chain distance between nodes i and j, or UNREACHABLE."""
    if i == j:
        return 0.0
    i, j = min(i, j), max(i, j)
    return as_distance(pancake_distance_matrix(graph, dec, [i])[0, j])


def distance_to_subset(graph, dec, S, metric_kind="inner", chain=None):
    """Multi-source distance from node set S; unreachable nodes come back masked."""
    S = np.unique(np.atleast_1d(np.asarray(S, dtype=np.int64)))
    if S.size == 0:
        raise ValueError("subset S must be nonempty")
    if metric_kind == "inner":
        A = graph.adjacency
    elif metric_kind == "pancake":
        A = chain_graph(graph.points, dec) if chain is None else chain
    else:
        raise ValueError(f"unknown metric kind {metric_kind!r}")
    d = dijkstra(A, directed=False, indices=S, min_only=True)
    d[(d > 0) & (d < 1e-300)] = 0.0
    d[S] = 0.0
    return np.ma.masked_invalid(d)


# --------------------------------------------------------------------------- Lipschitz extension

def lipschitz_constant(points, values):
    """Exhaustive max |f(x) - f(y)| / |x - y| with the witness pair."""
    X = check_points(points)
    f = np.asarray(values, dtype=np.float64).ravel()
    if f.size != X.shape[0]:
        raise ValueError("values must match points")
    if X.shape[0] < 2:
        return 0.0, None
    E = cdist(X, X)
    dF = np.abs(f[:, None] - f[None, :])
    with np.errstate(divide="ignore", invalid="ignore"):
        R = np.where(E > 0, dF / E, 0.0)
    dup = (E == 0) & (dF > 0)
    if np.any(dup):
        i, j = np.argwhere(dup)[0]
        return np.inf, (int(i), int(j))
    i, j = np.unravel_index(np.argmax(R), R.shape)
    return float(R[i, j]), (int(i), int(j))


def mcshane_extend(domain_points, values, C, query, check=True):
    """Lipschitz extension ``min_i values[i] + C * |query - x_i|``.

    Returns a float for a single query point and an array otherwise.
    """
    X = check_points(domain_points)
    f = np.asarray(values, dtype=np.float64).ravel()
    C = float(C)
    if check:
        L, witness = lipschitz_constant(X, f)
        if L > C * (1 + 1e-12):
            raise NotCLipschitz(f"values are {L:.6g}-Lipschitz, more than C={C:g}", witness, L)
    Q = np.asarray(query, dtype=np.float64)
    single = Q.ndim == 1
    Q = check_points(Q, X.shape[1])
    out = np.empty(Q.shape[0])
    for start in range(0, Q.shape[0], 2048):
        block = Q[start:start + 2048]
        out[start:start + 2048] = np.min(f[None, :] + C * cdist(block, X), axis=1)
    return float(out[0]) if single else out


def clamp_radius(extended_value, norm, C):
    """Clamp into the band [norm / C, C * norm]."""
    C = float(C)
    if C < 1:
        raise ValueError("C must be >= 1")
    norm = np.asarray(norm, dtype=np.float64)
    if np.any(norm < 0):
        raise ValueError("norm must be nonnegative")
    out = np.minimum(np.maximum(norm / C, extended_value), C * norm)
    return float(out) if out.ndim == 0 else out


class McShaneExtension(RegressorMixin, BaseEstimator):
    """Lipschitz extension of sampled values to all of R^n.

    Parameters
    ----------
    C : float or None
        Lipschitz constant of the extension.  ``None`` uses the exhaustive
        Lipschitz constant of the training data.
    """

    def __init__(self, C=None):
        self.C = C

    def fit(self, X, y):
        X = check_points(X)
        y = np.asarray(y, dtype=np.float64).ravel()
        L, witness = lipschitz_constant(X, y)
        C = L if self.C is None else float(self.C)
        if L > C * (1 + 1e-12):
            raise NotCLipschitz(f"training values are {L:.6g}-Lipschitz, more than C={C:g}", witness, L)
        self.X_, self.y_, self.C_ = X, y, max(C, 0.0)
        self.n_features_in_ = X.shape[1]
        return self

    def predict(self, X):
        check_is_fitted(self, "X_")
        return mcshane_extend(self.X_, self.y_, self.C_, check_points(X, self.n_features_in_), check=False)


def write_distance_csv(D, path):
    """Distance matrix as CSV; unreachable entries become the string 'unreachable'."""
    with open(path, "w") as fh:
        for row in np.atleast_2d(D):
            fh.write(",".join("unreachable" if not np.isfinite(x) else repr(float(x)) for x in row) + "\n")
