import json

import numpy as np
import pytest

from lipgeo.embed import NormalEmbedding, distortion_bound, embedding_distortion, normal_embed
from lipgeo.exceptions import ClaimViolated, InvalidDecomposition
from lipgeo.metric import PancakeDecomposition, build_graph, inner_distance_matrix
from lipgeo.setdef import SampleCloud


def test_lshape_tower(sampled):
    cloud, g = sampled("L-shape")
    trace = normal_embed(cloud, g)
    assert trace.k == 2 and trace.passed
    assert trace.final_points.shape == (len(cloud), 4)
    for check in trace.claim_checks:
        assert check["pancake_ratio"] <= 3.0
        assert check["inner_ratio"] <= 3.0 * 1.1
    assert 1.0 <= embedding_distortion(trace) <= distortion_bound(2)


def test_each_stage_keeps_edges_and_stretches_at_most_sqrt2(sampled):
    cloud, g = sampled("L-shape")
    trace = normal_embed(cloud, g)
    for a, b in zip(trace.graphs, trace.graphs[1:]):
        assert (a.adjacency != 0).nnz == (b.adjacency != 0).nnz
        _, _, wa = a.edges()
        _, _, wb = b.edges()
        assert np.all(wb >= wa * (1 - 1e-12)) and np.all(wb <= np.sqrt(2) * wa * (1 + 1e-12))


def test_single_pancake_is_a_graph_of_zero(sampled):
    cloud, g = sampled("segment")
    trace = normal_embed(cloud, g)
    assert trace.k == 1
    assert np.all(trace.stage_functions[0] == 0)
    assert np.allclose(inner_distance_matrix(trace.graphs[-1]), inner_distance_matrix(g))


def test_strict_mode_raises_with_partial_trace(sampled):
    cloud, g = sampled("L-shape")
    with pytest.raises(ClaimViolated) as info:
        normal_embed(cloud, g, delta=-0.9)
    assert info.value.stage == 1 and info.value.trace.k == 1
    loose = normal_embed(cloud, g, delta=-0.9, strict=False)
    assert not loose.passed and loose.final_lne is not None


def test_disconnected_input_is_rejected():
    cloud = SampleCloud.from_points(np.array([[0.0, 0.0], [0.1, 0.0], [5.0, 0.0]]), 0.05)
    with pytest.raises(InvalidDecomposition):
        normal_embed(cloud)


def test_trace_save(tmp_path, sampled):
    cloud, g = sampled("L-shape")
    trace = normal_embed(cloud, g)
    trace.save(tmp_path)
    manifest = json.loads((tmp_path / "manifest.json").read_text())
    assert [s["dimension"] for s in manifest["stages"]] == [2, 3, 4]
    rows = (tmp_path / "stage_2.csv").read_text().splitlines()
    assert rows[0] == "x1,x2,x3,x4" and len(rows) == len(cloud) + 1


def test_estimator(sampled):
    cloud, g = sampled("L-shape")
    model = NormalEmbedding().fit(cloud)
    assert model.embedding_.shape == (len(cloud), 4)
    assert np.array_equal(model.transform(cloud.points), model.embedding_)
    with pytest.raises(ValueError):
        model.transform(cloud.points[:5])
    raw = NormalEmbedding(density=cloud.density_target).fit_transform(cloud.points, cloud.piece_label)
    assert np.allclose(raw, model.embedding_)
    dec = PancakeDecomposition.from_labels(build_graph(cloud), cloud.piece_label)
    assert dec.k == 2


def test_stage_invariants(sampled):
    from lipgeo.metric import pancake_distance_matrix

    cloud, g = sampled("L-shape")
    trace = normal_embed(cloud, g)
    dec = trace.decomposition
    for j, h in enumerate(trace.stage_functions):
        prev, cur = trace.stage_points[j], trace.stage_points[j + 1]
        assert np.array_equal(cur[:, :-1], prev)
        assert np.all(h >= 0) and np.all(h[dec.closure_nodes(j)] == 0)
        Dp = pancake_distance_matrix(trace.graphs[j], dec)
        u, v, _ = g.edges()
        assert np.all(np.abs(h[u] - h[v]) <= Dp[u, v] * (1 + 1e-12))
    bound = 3 * trace.k * dec.M * (1 + trace.delta)
    assert trace.final_lne.constant <= bound
