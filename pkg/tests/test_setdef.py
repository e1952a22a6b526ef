import numpy as np
import pytest

from lipgeo.exceptions import EmptySample, EmptySlice, SpecError
from lipgeo.radius import RadiusFunction
from lipgeo.setdef import Region, SampleCloud, SetSpec, canonical_order, sample_link, sample_set, thin

CIRCLE = SetSpec(2, [{"implicit": {"equalities": ["x1^2 + x2^2 - 1"]}}], "circle", bounded=True)


def test_implicit_samples_lie_on_the_variety():
    cloud = sample_set(CIRCLE, Region.ball(2.0, dim=2), 0.02, seed=3)
    r = np.linalg.norm(cloud.points, axis=1)
    assert np.max(np.abs(r - 1)) < 1e-9
    assert np.all(cloud.residual <= 1e-10)
    # spacing: roughly 2 pi / h samples, none closer than the thinning radius
    assert 0.5 * 2 * np.pi / 0.02 < len(cloud) < 2 * 2 * np.pi / 0.02
    d = np.linalg.norm(cloud.points[:, None] - cloud.points[None], axis=2)
    np.fill_diagonal(d, np.inf)
    assert d.min() > 0.8 * 0.02


def test_samples_cover_the_set():
    cloud = sample_set(CIRCLE, Region.ball(2.0, dim=2), 0.02, seed=0)
    theta = np.sort(np.arctan2(cloud.points[:, 1], cloud.points[:, 0]))
    gaps = np.diff(np.concatenate([theta, [theta[0] + 2 * np.pi]]))
    assert gaps.max() < 3 * 0.02


def test_inequalities_and_region_filter():
    spec = SetSpec(2, [{"implicit": {"equalities": ["x1^2 + x2^2 - 1"], "inequalities": ["x2"]}}])
    cloud = sample_set(spec, Region.ball(2.0, dim=2), 0.05)
    assert np.all(cloud.points[:, 1] >= 0)
    annulus = Region.annulus(1.0, 2.0, dim=2)
    plane = SetSpec(2, [{"implicit": {"equalities": []}}])
    c2 = sample_set(plane, annulus, 0.1)
    r = np.linalg.norm(c2.points, axis=1)
    assert r.min() >= 1.0 and r.max() <= 2.0


def test_parametric_pieces_and_labels():
    spec = SetSpec(2, [{"parametric": {"box": [[0, 1]], "map": ["u1", "0"]}},
                       {"parametric": {"box": [[0, 1]], "map": ["0", "u1"]}}])
    cloud = sample_set(spec, Region.ball(2.0, dim=2), 0.05)
    assert set(np.unique(cloud.piece_label)) == {0, 1}
    assert np.all(np.min(np.abs(cloud.points), axis=1) < 1e-12)


def test_sampling_is_deterministic_per_seed():
    a = sample_set(CIRCLE, Region.ball(2.0, dim=2), 0.05, seed=11)
    b = sample_set(CIRCLE, Region.ball(2.0, dim=2), 0.05, seed=11)
    assert a.to_bytes() == b.to_bytes()


def test_empty_sample_and_bad_specs():
    with pytest.raises(EmptySample):
        sample_set(CIRCLE, Region.annulus(3.0, 4.0, dim=2), 0.05)
    with pytest.raises(SpecError):
        SetSpec(2, [{"parametric": {"box": [[0, 1]], "map": ["u1"]}}])
    with pytest.raises(SpecError):
        SetSpec(2, [])
    with pytest.raises(SpecError):
        SetSpec.from_dict({"ambient_dim": 2})
    with pytest.raises(SpecError):
        SetSpec(2, [{"implicit": {"equalities": ["x1 + ("]}}])


def test_spec_dict_round_trip():
    spec = SetSpec.from_dict(CIRCLE.to_dict())
    assert spec.to_dict() == CIRCLE.to_dict()


def test_link_slice_lies_on_level_and_set():
    cone = SetSpec(3, [{"implicit": {"equalities": ["x1^2 + x2^2 - x3^2"], "inequalities": ["x3"]}}])
    cloud = sample_set(cone, Region.annulus(1.5, 2.5, dim=3), 0.05)
    link = sample_link(cone, cloud, RadiusFunction.norm(), 2.0)
    P = link.points
    assert len(link) > 50
    assert np.max(np.abs(np.linalg.norm(P, axis=1) - 2.0)) <= 1e-9
    assert np.max(np.abs(P[:, 0] ** 2 + P[:, 1] ** 2 - P[:, 2] ** 2)) <= 1e-8
    with pytest.raises(EmptySlice):
        sample_link(cone, cloud, RadiusFunction.norm(), 10.0)


def test_cloud_round_trips(tmp_path):
    cloud = sample_set(CIRCLE, Region.ball(2.0, dim=2), 0.1, seed=5)
    cloud.save(tmp_path / "c.cloud")
    back = SampleCloud.load(tmp_path / "c.cloud")
    assert np.array_equal(back.points, cloud.points)
    assert np.array_equal(back.piece_label, cloud.piece_label)
    assert back.density_target == cloud.density_target and back.seed == 5
    cloud.to_csv(tmp_path / "c.csv")
    back = SampleCloud.from_csv(tmp_path / "c.csv", cloud.density_target)
    assert np.array_equal(back.points, cloud.points)
    with pytest.raises(ValueError):
        SampleCloud.from_bytes(b"not a cloud" * 8)


def test_thin_and_canonical_order():
    rng = np.random.default_rng(0)
    P = rng.uniform(size=(500, 2))
    keep = thin(P, 0.05)
    Q = P[keep]
    d = np.linalg.norm(Q[:, None] - Q[None], axis=2)
    np.fill_diagonal(d, np.inf)
    assert d.min() > 0.05
    # every dropped point is within the radius of a kept one
    assert np.max(np.min(np.linalg.norm(P[:, None] - Q[None], axis=2), axis=1)) <= 0.05
    o = canonical_order(P)
    assert np.all(np.diff(P[o, 0]) >= 0)


def test_slice_indices_resolve_in_parent_graph():
    from lipgeo.metric import build_graph

    cone = SetSpec(3, [{"implicit": {"equalities": ["x1^2 + x2^2 - x3^2"], "inequalities": ["x3"]}}])
    cloud = sample_set(cone, Region.annulus(1.5, 2.5, dim=3), 0.05)
    link = sample_link(cone, cloud, RadiusFunction.norm(), 2.0)
    g = build_graph(link.cloud)
    assert link.indices.max() < len(g)
    assert np.array_equal(g.points[link.indices], link.points)
    # refined points were appended, so the original cloud is a prefix of the parent
    assert np.array_equal(link.cloud.points[: len(cloud)], cloud.points)
