import numpy as np
import pytest

from oracles import cone_geodesic, epsilon_adjacency, floyd_warshall
from lipgeo import corpus
from lipgeo.exceptions import InvalidDecomposition, NotCLipschitz
from lipgeo.metric import (
    UNREACHABLE,
    McShaneExtension,
    PancakeDecomposition,
    build_graph,
    chain_graph,
    clamp_radius,
    distance_to_subset,
    inner_distance,
    inner_distance_matrix,
    lipschitz_constant,
    mcshane_extend,
    measure_pancake_constant,
    pancake_distance,
    pancake_distance_matrix,
    read_edge_list,
)
from lipgeo.setdef import Region, SampleCloud, SetSpec, sample_set


def test_graph_matches_dense_oracle_on_random_cloud(rng):
    P = rng.uniform(-1, 1, size=(150, 3))
    g = build_graph(P, epsilon=0.45)
    D = inner_distance_matrix(g)
    ref = floyd_warshall(epsilon_adjacency(P, 0.45))
    assert np.array_equal(np.isinf(D), np.isinf(ref))
    fin = np.isfinite(ref)
    assert np.max(np.abs(D[fin] - ref[fin])) <= 1e-9


def test_circle_geodesic_close_to_pi():
    cloud = corpus.get("circle").sample(0.005)
    g = build_graph(cloud)
    i = int(np.argmin(np.linalg.norm(cloud.points - [1, 0], axis=1)))
    j = int(np.argmin(np.linalg.norm(cloud.points + [1, 0], axis=1)))
    assert abs(inner_distance(g, i, j) / np.pi - 1) < 0.02


def test_cone_geodesic_against_unrolled_oracle():
    cone = corpus.get("cone")
    cloud = sample_set(cone.spec, Region.annulus(2.0, 3.0, dim=3), 0.03)
    g = build_graph(cloud)
    P = cloud.points
    s = np.linalg.norm(P, axis=1)
    th = np.arctan2(P[:, 1], P[:, 0])
    # short geodesics stay away from the inner boundary
    a = int(np.argmin(np.abs(s - 2.5) + np.abs(th)))
    D = inner_distance_matrix(g, [a])[0]
    ref = cone_geodesic(s[a], th[a], s, th)
    near = ref < 0.8
    rel = np.abs(D[near] - ref[near]) / np.maximum(ref[near], 1e-12)
    # edges are chords, so the graph may undercut the surface geodesic by O(eps^2 / R^2)
    assert np.all(D[near] >= ref[near] * (1 - 1e-3))
    assert np.median(rel[ref[near] > 0.2]) < 0.05


def test_unreachable_and_components():
    P = np.array([[0.0, 0.0], [0.1, 0.0], [5.0, 0.0]])
    g = build_graph(P, epsilon=0.2)
    assert g.n_components == 2 and not g.is_connected
    assert inner_distance(g, 0, 2) is UNREACHABLE
    assert not UNREACHABLE and str(UNREACHABLE) == "unreachable"
    assert inner_distance(g, 0, 1) == pytest.approx(0.1)
    with pytest.raises(IndexError):
        inner_distance(g, 0, 7)


def test_knn_rule_is_symmetric(rng):
    P = rng.normal(size=(80, 2))
    g = build_graph(P, k=4)
    A = g.adjacency
    assert (A != A.T).nnz == 0
    assert g.rule_label == "k-nearest(4)"


def test_edge_list_round_trip(tmp_path, rng):
    P = rng.uniform(size=(60, 2))
    g = build_graph(P, epsilon=0.3)
    g.write_edge_list(tmp_path / "g.txt")
    back = read_edge_list(tmp_path / "g.txt", P)
    assert (back.adjacency != g.adjacency).nnz == 0
    assert back.rule_label == g.rule_label


def test_with_points_keeps_adjacency(rng):
    P = rng.uniform(size=(50, 2))
    g = build_graph(P, epsilon=0.3)
    g2 = g.with_points(2 * P)
    assert np.allclose(inner_distance_matrix(g2), 2 * inner_distance_matrix(g))
    with pytest.raises(ValueError):
        g.with_points(P[:10])


def _lshape(sampled):
    cloud, g = sampled("L-shape")
    return cloud, g, PancakeDecomposition.from_labels(g, cloud.piece_label)


def test_pancake_sandwich_lshape(sampled):
    cloud, g, dec = _lshape(sampled)
    dec.validate(g)
    Din = inner_distance_matrix(g)
    Dp = pancake_distance_matrix(g, dec)
    assert np.all(Dp <= Din * (1 + 1e-12) + 1e-15)
    assert np.all(Din <= dec.M * Dp * (1 + 1e-12) + 1e-15)
    assert 1.0 < dec.M < np.sqrt(2) + 1e-9


def test_pancake_distance_is_a_chain_metric(sampled):
    cloud, g, dec = _lshape(sampled)
    # dense oracle: complete graph on each closure, then all-pairs shortest paths
    W = np.full((len(g), len(g)), np.inf)
    for i in range(dec.k):
        nodes = dec.closure_nodes(i)
        W[np.ix_(nodes, nodes)] = np.linalg.norm(g.points[nodes, None] - g.points[None, nodes], axis=2)
    np.fill_diagonal(W, 0.0)
    ref = floyd_warshall(W)
    assert np.max(np.abs(pancake_distance_matrix(g, dec) - ref)) <= 1e-9
    a = int(np.argmax(cloud.points[:, 0]))
    b = int(np.argmax(cloud.points[:, 1]))
    assert pancake_distance(g, dec, a, b) == pytest.approx(ref[a, b], abs=1e-12)
    assert pancake_distance(g, dec, a, a) == 0.0
    C = chain_graph(g.points, dec)
    assert (C != C.T).nnz == 0


def test_decomposition_validation(sampled):
    cloud, g, dec = _lshape(sampled)
    labels = cloud.piece_label.copy()
    with pytest.raises(InvalidDecomposition):
        PancakeDecomposition.from_labels(g, labels[:-1])
    # a pancake split into two far pieces is disconnected
    far = np.where((cloud.piece_label == 0) & (cloud.points[:, 0] > 0.5), 2, labels)
    far[(cloud.piece_label == 1) & (cloud.points[:, 1] > 0.5)] = 2
    bad = PancakeDecomposition.from_labels(g, far)
    with pytest.raises(InvalidDecomposition):
        bad.validate(g)


def test_measured_pancake_constant_is_brute_force_max(sampled):
    cloud, g, dec = _lshape(sampled)
    Din = inner_distance_matrix(g)
    E = np.linalg.norm(g.points[:, None] - g.points[None], axis=2)
    best = 1.0
    for i in range(dec.k):
        nodes = dec.closure_nodes(i)
        sub_d, sub_e = Din[np.ix_(nodes, nodes)], E[np.ix_(nodes, nodes)]
        m = sub_e > 0
        best = max(best, float(np.max(sub_d[m] / sub_e[m])))
    assert measure_pancake_constant(g, dec) == pytest.approx(best, rel=1e-12)


def test_distance_to_subset_is_one_lipschitz_along_edges(sampled):
    cloud, g, dec = _lshape(sampled)
    S = dec.closure_nodes(0)
    for kind in ("inner", "pancake"):
        d = distance_to_subset(g, dec, S, kind).filled(np.inf)
        assert np.all(d[S] == 0)
        u, v, w = g.edges()
        assert np.all(np.abs(d[u] - d[v]) <= w * (1 + 1e-12))
    with pytest.raises(ValueError):
        distance_to_subset(g, dec, [], "inner")


def test_mcshane_extension_matches_data_and_constant(rng):
    X = rng.uniform(-1, 1, size=(40, 2))
    f = np.sin(X[:, 0]) + 0.5 * X[:, 1]
    L, _ = lipschitz_constant(X, f)
    Q = rng.uniform(-2, 2, size=(400, 2))
    ext = mcshane_extend(X, f, L, Q)
    assert np.allclose(mcshane_extend(X, f, L, X), f)
    allx = np.vstack([X, Q])
    ally = np.concatenate([f, ext])
    assert lipschitz_constant(allx, ally)[0] <= L * (1 + 1e-9)
    with pytest.raises(NotCLipschitz):
        mcshane_extend(X, f, 0.5 * L, Q)
    model = McShaneExtension().fit(X, f)
    assert np.allclose(model.predict(Q), ext)


def test_clamp_radius():
    assert clamp_radius(10.0, 1.0, 2.0) == 2.0
    assert clamp_radius(0.1, 1.0, 2.0) == 0.5
    assert clamp_radius(1.5, 1.0, 2.0) == 1.5
    with pytest.raises(ValueError):
        clamp_radius(1.0, 1.0, 0.5)


def test_duplicate_points_with_different_values():
    X = np.array([[0.0, 0.0], [0.0, 0.0]])
    L, w = lipschitz_constant(X, [0.0, 1.0])
    assert L == np.inf and w == (0, 1)


def test_sample_cloud_from_points_graph_density():
    cloud = SampleCloud.from_points(np.linspace(0, 1, 11)[:, None], 0.1)
    g = build_graph(cloud)
    assert g.rule_param == pytest.approx(0.3)
    assert g.is_connected
    spec = SetSpec(1, [{"parametric": {"box": [[0, 1]], "map": ["u1"]}}])
    assert spec.bounded


def test_pancake_distance_metric_axioms(sampled):
    cloud, g, dec = _lshape(sampled)
    Dp = pancake_distance_matrix(g, dec)
    assert np.array_equal(Dp, Dp.T)
    assert np.all(np.diag(Dp) == 0)
    assert np.all(Dp[~np.eye(len(g), dtype=bool)] > 0)
    for k in range(len(g)):
        assert np.all(Dp <= Dp[:, k, None] + Dp[None, k, :] + 1e-9)


def test_inner_distance_symmetry_is_exact(sampled):
    g = sampled("circle")[1]
    D = inner_distance_matrix(g)
    assert np.array_equal(D, D.T)
    sub = inner_distance_matrix(g, [5, 40, 300])
    assert np.array_equal(sub[:, [5, 40, 300]], sub[:, [5, 40, 300]].T)
    assert inner_distance(g, 3, 200) == inner_distance(g, 200, 3)
