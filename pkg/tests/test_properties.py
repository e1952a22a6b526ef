"""Property-based checks of the metric axioms and the exact transform identities."""
import numpy as np
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from lipgeo.analysis import check_isosceles
from lipgeo.metric import build_graph, clamp_radius, inner_distance_matrix, lipschitz_constant, mcshane_extend
from lipgeo.transforms import invert, stereographic_lift, stereographic_project

coords = st.floats(-10, 10, allow_nan=False, allow_infinity=False)
clouds = st.integers(2, 40).flatmap(lambda n: arrays(np.float64, (n, 2), elements=coords))
nonzero = arrays(np.float64, 3, elements=st.floats(-1e6, 1e6)).filter(lambda v: np.linalg.norm(v) > 1e-6)

PROFILE = settings(max_examples=60, deadline=None)


@PROFILE
@given(clouds, st.floats(0.5, 8.0))
def test_graph_distance_is_a_metric_above_euclid(P, eps):
    D = inner_distance_matrix(build_graph(P, epsilon=eps))
    E = np.linalg.norm(P[:, None] - P[None], axis=2)
    assert np.allclose(D, D.T)
    assert np.all(np.diag(D) == 0)
    fin = np.isfinite(D)
    assert np.all(D[fin] >= E[fin] * (1 - 1e-12) - 1e-12)
    # triangle inequality through every midpoint k
    for k in range(len(P)):
        via = D[:, k, None] + D[None, k, :]
        assert np.all(D <= via * (1 + 1e-12) + 1e-12)


@PROFILE
@given(nonzero)
def test_inversion_is_an_involution(x):
    y = invert(x)
    # relative to |x|: subnormal components cannot carry 12 digits on their own
    assert np.linalg.norm(invert(y) - x) <= 1e-12 * np.linalg.norm(x)
    assert abs(np.linalg.norm(x) * np.linalg.norm(y) - 1) <= 1e-12


@PROFILE
@given(arrays(np.float64, 2, elements=st.floats(-1e3, 1e3)))
def test_lift_round_trip(x):
    q = stereographic_lift(x)
    assert abs(np.linalg.norm(q) - 1) <= 1e-12
    back = stereographic_project(q)
    assert np.allclose(back, x, rtol=1e-9, atol=1e-9 * (1 + x @ x))


@PROFILE
@given(clouds, st.floats(0.1, 5.0), arrays(np.float64, (20, 2), elements=coords))
def test_mcshane_extension_keeps_the_constant(P, C, Q):
    f = C * np.linalg.norm(P - P[0], axis=1)  # C-Lipschitz by construction
    if np.unique(P, axis=0).shape[0] < len(P):
        return
    ext = mcshane_extend(P, f, C, Q)
    X = np.vstack([P, Q])
    y = np.concatenate([f, ext])
    keep = np.unique(X, axis=0, return_index=True)[1]
    assert lipschitz_constant(X[keep], y[keep])[0] <= C * (1 + 1e-9)


@PROFILE
@given(st.floats(-100, 100), st.floats(0, 100), st.floats(1, 10))
def test_clamp_stays_in_band(v, r, C):
    c = clamp_radius(v, r, C)
    assert r / C - 1e-12 <= c <= C * r + 1e-12


@PROFILE
@given(arrays(np.float64, (3, 4, 2), elements=coords))
def test_isosceles_bound_follows_from_triangle_inequality(arcs):
    try:
        res = check_isosceles(arcs[0], arcs[1], arcs[2], max_constant=np.inf)
    except Exception:
        return
    assert res.holds
