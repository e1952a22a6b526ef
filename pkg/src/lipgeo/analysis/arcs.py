"""Arc-based criteria: divergence of inner vs outer distance along arc pairs, and the isosceles check."""
from dataclasses import dataclass

import numpy as np
from scipy.optimize import brentq
from scipy.sparse.csgraph import dijkstra
from scipy.spatial import cKDTree

from .._validation import check_t_grid, ordered_map
from ..exceptions import ArcOffSet, Inapplicable, RadiusMisaligned
from ..metric import build_graph
from ..radius import RadiusFunction
from ..setdef import TAU, Region, sample_set
from .reports import DivergenceReport

H_REL = 0.02
GAP_FRACTION = 0.01
REACH = 1.5


def _on_level(gamma, radius_fn, t):
    """Point of a callable arc at radius level t (the arc is reparametrized by phi)."""
    def g(u):
        return float(radius_fn(np.atleast_2d(gamma(u)))[0]) - t

    if g(t) == 0:
        return np.asarray(gamma(t), dtype=np.float64)
    lo, hi = t, t
    for _ in range(60):
        lo, hi = lo / 2, hi * 2
        if g(lo) * g(t) <= 0:
            hi = t
            break
        if g(hi) * g(t) <= 0:
            lo = t
            break
    else:
        raise RadiusMisaligned(f"arc never reaches level t={t:g}")
    u = brentq(g, lo, hi, xtol=1e-15 * max(t, 1e-300), rtol=4 * np.finfo(float).eps, maxiter=200)
    return np.asarray(gamma(u), dtype=np.float64)


def arc_points(gamma, t_grid, radius_fn, slice_tol=None):
    """Arc evaluated on the grid with phi(gamma(t)) = t.

    Callables are reparametrized by the radius function; arrays must already
    be aligned to within ``slice_tol`` (default 1e-9 t).
    """
    if callable(gamma):
        return np.stack([_on_level(gamma, radius_fn, t) for t in t_grid])
    P = np.asarray(gamma, dtype=np.float64)
    if P.shape[0] != len(t_grid):
        raise ValueError("array arcs need one point per grid value")
    level = np.abs(radius_fn(P) - np.asarray(t_grid))
    tol = 1e-9 * np.asarray(t_grid) if slice_tol is None else slice_tol
    bad = np.flatnonzero(level > tol)
    if bad.size:
        raise RadiusMisaligned(f"arc point at t={t_grid[bad[0]]:g} is {level[bad[0]]:.3g} off its level")
    return P


def _check_on_set(spec, P, tol):
    res = spec.residual(P)
    bad = np.flatnonzero(~(res <= tol))
    if bad.size:
        raise ArcOffSet(f"arc point {P[bad[0]].tolist()} has residual {res[bad[0]]:.3g} > {tol:g}")


def _inner_between(spec, a, b, t, center, h, reach, seed):
    region = Region.ball(reach * t + np.linalg.norm(center), center=np.zeros_like(a))
    cloud = sample_set(spec, region, h, seed=seed)
    cloud = cloud.append(np.vstack([a, b]), [-1, -1], [0.0, 0.0])
    g = build_graph(cloud)
    n = len(cloud)
    d = dijkstra(g.adjacency, directed=False, indices=n - 2)[n - 1]
    return float(d)


def detect_arc_divergence(arcs, t_grid, spec=None, graph=None, radius_fn=None, side="infinity",
                          h_rel=H_REL, gap_fraction=GAP_FRACTION, reach=REACH, seed=0, tol=TAU):
    """Fit the growth of d_inn / d_out along two arcs with phi(gamma_1(t)) = phi(gamma_2(t)) = t.

    With ``spec`` the inner distance at each t comes from a fresh sample of
    the ball of radius ``reach * t`` at spacing ``min(h_rel t, gap_fraction *
    |gamma_1(t) - gamma_2(t)|)``, with both arc points inserted as nodes.
    With ``graph`` the arc points are snapped to their nearest nodes, which
    must lie within the graph's density target.
    """
    t_grid = check_t_grid(t_grid)
    radius_fn = RadiusFunction.norm() if radius_fn is None else radius_fn
    g1, g2 = (arc_points(g, t_grid, radius_fn) for g in arcs)
    if spec is None and graph is None:
        raise ValueError("either a set description or a graph is required")
    if spec is not None:
        _check_on_set(spec, g1, tol)
        _check_on_set(spec, g2, tol)
    outer = np.linalg.norm(g1 - g2, axis=1)
    center = radius_fn.center_of(g1.shape[1])

    if spec is not None:
        def one(i):
            if outer[i] == 0:
                return 0.0
            h = min(h_rel * t_grid[i], gap_fraction * outer[i])
            return _inner_between(spec, g1[i], g2[i], t_grid[i], center, h, reach, seed)

        inner = np.asarray(ordered_map(one, range(len(t_grid))))
    else:
        tree = cKDTree(graph.points)
        d1, n1 = tree.query(g1)
        d2, n2 = tree.query(g2)
        h = graph.density or np.inf
        if np.any(d1 > h) or np.any(d2 > h):
            raise ArcOffSet("an arc point is farther than one sample spacing from the graph")
        D = dijkstra(graph.adjacency, directed=False, indices=np.unique(n1))
        row = {int(s): k for k, s in enumerate(np.unique(n1))}
        inner = np.array([D[row[int(a)], b] for a, b in zip(n1, n2)])
        outer = np.linalg.norm(graph.points[n1] - graph.points[n2], axis=1)

    ratio = np.where(outer > 0, inner / np.where(outer > 0, outer, 1.0), 1.0)
    keep = np.isfinite(ratio)
    dropped = [{"t": float(t), "reason": "Unreachable"} for t in t_grid[~keep]]
    return DivergenceReport.from_ratios(t_grid[keep], ratio[keep], side=side, dropped=dropped,
                                        notes={"inner": inner[keep].tolist(), "outer": outer[keep].tolist()})


@dataclass
class IsoscelesResult:
    holds: bool
    ratio: float
    hypothesis_constant: float
    bound: float
    witness_t: float

    def __bool__(self):
        return self.holds

    def to_dict(self):
        return dict(self.__dict__)


def check_isosceles(g1, g2, g3, t_grid=None, max_constant=10.0, slack=1.05):
    """Check |g2 - g3| <= (1 + c) |g1 - g3| given |g1 - g2| <~ |g1 - g3| <~ |g2 - g3| with constant c.

    The hypothesis constant c is measured on the grid (at least 1); above
    ``max_constant`` the check raises :class:`Inapplicable`.  A false result
    can only come from bad data, since the bound follows from the triangle
    inequality.
    """
    A, B, C = (np.atleast_2d(np.asarray(g, dtype=np.float64)) for g in (g1, g2, g3))
    if not (A.shape == B.shape == C.shape):
        raise ValueError("arcs must share a grid")
    t_grid = np.arange(A.shape[0], dtype=np.float64) if t_grid is None else np.asarray(t_grid, dtype=np.float64)
    d12 = np.linalg.norm(A - B, axis=1)
    d13 = np.linalg.norm(A - C, axis=1)
    d23 = np.linalg.norm(B - C, axis=1)

    def quotient(num, den):
        if np.any((den == 0) & (num > 0)):
            return np.inf
        ok = den > 0
        return float(np.max(num[ok] / den[ok])) if np.any(ok) else 0.0

    c = max(1.0, quotient(d12, d13), quotient(d13, d23))
    if not np.isfinite(c) or c > max_constant:
        raise Inapplicable(f"hypothesis constant {c:.3g} exceeds {max_constant:g}")
    ok = d13 > 0
    if not np.any(ok):
        return IsoscelesResult(True, 1.0, c, (1 + c) * slack, None)
    q = np.where(ok, d23 / np.where(ok, d13, 1.0), 0.0)
    k = int(np.argmax(q))
    bound = (1 + c) * slack
    return IsoscelesResult(bool(q[k] <= bound), float(q[k]), c, bound, float(t_grid[k]))
