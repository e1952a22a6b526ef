"""Link slices along a radius grid: LLNE trends, Theorem-2.2-style comparisons, center changes.

Unbounded sets are sampled afresh for every t at a density proportional to
t (``h_t = h_rel * t``, optionally capped by ``h_max``), so every slice is
seen at the same relative resolution.  A precomputed cloud can be passed
instead, in which case all slices come from it.
"""
from dataclasses import dataclass, field

import numpy as np
from scipy.sparse.csgraph import dijkstra

from .._validation import check_t_grid, ordered_map
from ..exceptions import DisconnectedLink, EmptySample, EmptySlice, NotApplicable
from ..metric import build_graph
from ..radius import RadiusFunction
from ..setdef import Region, sample_link, sample_set
from ..transforms import invert, pole_distance_level, stereographic_modify, north_pole
from .lne import estimate_lne_constant, farthest_point_indices
from .reports import DivergenceReport, fit_exponent

H_REL = 0.02
THIN_SHELL = 3.0          # half-width of the LLNE sampling shell, in units of h_t
WIDE_SHELL = (0.25, 1.5)  # radii (relative to t) of the shell used for d_{A,inn}


def _h(t, h_rel, h_max):
    h = h_rel * t
    return h if h_max is None else min(h, h_max)


def _sample_at(spec, radius_fn, t, h, r_lo, r_hi, seed, slice_tol=None):
    center = radius_fn.center_of(spec.ambient_dim)
    region = Region.annulus(max(r_lo, 0.0), r_hi, center=center)
    cloud = sample_set(spec, region, h, seed=seed)
    return sample_link(spec, cloud, radius_fn, t, slice_tol=slice_tol)


def sample_slices(spec, t_grid, radius_fn=None, h_rel=H_REL, h_max=None, seed=0, cloud=None,
                  shell=None, slice_tol=None):
    """One :class:`LinkSlice` per t (or the exception that prevented it), in grid order.

    ``shell=None`` samples a thin shell of half-width ``3 h_t`` around the
    level; ``shell=(a, b)`` samples the annulus ``a t <= |x - p| <= b t``.
    """
    t_grid = check_t_grid(t_grid)
    radius_fn = RadiusFunction.norm() if radius_fn is None else radius_fn

    def one(t):
        try:
            if cloud is not None:
                return sample_link(spec, cloud, radius_fn, t, slice_tol=slice_tol)
            h = _h(t, h_rel, h_max)
            if shell is None:
                lo, hi = t - THIN_SHELL * h, t + THIN_SHELL * h
            else:
                lo, hi = shell[0] * t, shell[1] * t
            return _sample_at(spec, radius_fn, t, h, lo, hi, seed, slice_tol)
        except (EmptySlice, EmptySample) as exc:
            return exc

    return ordered_map(one, t_grid)


def slice_graph(link):
    """Induced subgraph of the slice points in the epsilon-graph of the parent cloud."""
    return build_graph(link.points, density=link.cloud.density_target)


def llne_from_slices(t_grid, slices, side="infinity"):
    """Fit the per-t LNE constants of already sampled slices."""
    ts, ratios, witnesses, connected, dropped = [], [], [], [], []
    for t, link in zip(t_grid, slices):
        if isinstance(link, Exception):
            dropped.append({"t": float(t), "reason": type(link).__name__})
            continue
        g = slice_graph(link)
        est = estimate_lne_constant(g, on_disconnected="max")
        ts.append(float(t))
        ratios.append(est.constant)
        w = est.witness_pair
        witnesses.append(None if w is None else [link.points[w[0]].tolist(), link.points[w[1]].tolist()])
        connected.append(bool(g.is_connected))
    if side == "local":
        order = np.argsort(ts)
        ts, ratios = [ts[i] for i in order], [ratios[i] for i in order]
        witnesses, connected = [witnesses[i] for i in order], [connected[i] for i in order]
    return DivergenceReport.from_ratios(ts, ratios, side=side, witnesses=witnesses,
                                        connected=connected, dropped=dropped)


def estimate_llne(spec, t_grid, radius_fn=None, cloud=None, h_rel=H_REL, h_max=None, seed=0, side="infinity"):
    """Per-t LNE constants of the link slices and their growth verdict."""
    slices = sample_slices(spec, t_grid, radius_fn, h_rel, h_max, seed, cloud)
    return llne_from_slices(t_grid, slices, side)


# --------------------------------------------------------------------------- Theorem 2.2 harness

@dataclass
class LinkEquivalenceReport:
    """K(t) = max over slice pairs of d_{slice,inn} / d_{A,inn}."""

    report: DivergenceReport = None
    left_inequality_exact: bool = None
    left_violations: int = 0
    pairs_checked: int = 0
    disconnected_at: list = field(default_factory=list)
    verdict: str = None

    def to_dict(self):
        return {
            "report": None if self.report is None else self.report.to_dict(),
            "left_inequality_exact": self.left_inequality_exact,
            "left_violations": self.left_violations,
            "pairs_checked": self.pairs_checked,
            "disconnected_at": self.disconnected_at,
            "verdict": self.verdict,
        }


def link_comparison(link, max_sources=None):
    """K and the exact left-inequality check for one slice against its parent cloud's graph."""
    G = build_graph(link.cloud)
    S = G.subgraph(link.indices)
    if not S.is_connected:
        return None
    idx = link.indices
    src = np.arange(idx.size)
    if max_sources is not None and idx.size > max_sources:
        src = farthest_point_indices(link.points, max_sources)
    D_set = np.atleast_2d(dijkstra(G.adjacency, directed=False, indices=idx[src]))[:, idx]
    D_slice = np.atleast_2d(dijkstra(S.adjacency, directed=False, indices=src))
    off = D_set > 0
    violations = int(np.sum(D_set > D_slice))
    K = float(np.max(D_slice[off] / D_set[off])) if np.any(off) else 1.0
    i, j = np.unravel_index(np.argmax(np.where(off, D_slice / np.where(off, D_set, 1), 0)), D_set.shape)
    return K, violations, int(off.sum()), (int(idx[src[i]]), int(idx[j]))


def verify_link_equivalence(spec, t_grid, radius_fn=None, cloud=None, h_rel=H_REL, h_max=None, seed=0,
                            shell=WIDE_SHELL, max_sources=None):
    """Per-t K(t) with the left inequality d_A <= d_slice checked on every scanned pair.

    Raises :class:`DisconnectedLink` (with the partial report attached as
    ``.report``) when some slice graph is disconnected.
    """
    t_grid = check_t_grid(t_grid)
    slices = sample_slices(spec, t_grid, radius_fn, h_rel, h_max, seed, cloud, shell=shell)
    out = LinkEquivalenceReport(left_inequality_exact=True)
    ts, Ks, witnesses, dropped = [], [], [], []
    results = ordered_map(lambda link: None if isinstance(link, Exception) else link_comparison(link, max_sources),
                          slices)
    for t, link, res in zip(t_grid, slices, results):
        if isinstance(link, Exception):
            dropped.append({"t": float(t), "reason": type(link).__name__})
            continue
        if res is None:
            out.disconnected_at.append(float(t))
            continue
        K, viol, n, w = res
        out.left_violations += viol
        out.pairs_checked += n
        ts.append(float(t))
        Ks.append(K)
        witnesses.append([link.cloud.points[w[0]].tolist(), link.cloud.points[w[1]].tolist()])
    out.left_inequality_exact = out.left_violations == 0
    if ts:
        out.report = DivergenceReport.from_ratios(ts, Ks, witnesses=witnesses, dropped=dropped,
                                                  connected=[True] * len(ts))
    if out.disconnected_at:
        exc = DisconnectedLink(f"link slice disconnected at t={out.disconnected_at[0]:g}; no verdict",
                               out.disconnected_at[0])
        exc.report = out
        raise exc
    out.verdict = out.report.verdict if out.report else "inconclusive"
    return out


# --------------------------------------------------------------------------- center independence

@dataclass
class CenterComparison:
    at_origin: DivergenceReport
    at_p: DivergenceReport
    p: list
    consistent: bool
    max_factor: float

    def to_dict(self):
        return {"at_origin": self.at_origin.to_dict(), "at_p": self.at_p.to_dict(), "p": self.p,
                "consistent": self.consistent, "max_factor": self.max_factor}


def compare_center_links(spec, p, t_grid, cloud=None, h_rel=H_REL, h_max=None, seed=0):
    """LLNE curves about 0 and about p; consistent when verdicts agree and constants stay within 2x."""
    p = np.asarray(p, dtype=np.float64)
    r0 = estimate_llne(spec, t_grid, RadiusFunction.norm(), cloud, h_rel, h_max, seed)
    rp = estimate_llne(spec, t_grid, RadiusFunction.about(p), cloud, h_rel, h_max, seed)
    common = sorted(set(r0.t_grid) & set(rp.t_grid))
    a = dict(zip(r0.t_grid, r0.ratio_per_t))
    b = dict(zip(rp.t_grid, rp.ratio_per_t))
    factor = max((max(a[t], b[t]) / min(a[t], b[t]) for t in common), default=float("inf"))
    consistent = r0.verdict == rp.verdict and r0.verdict != "inconclusive"
    if consistent and r0.verdict == "bounded":
        consistent = factor <= 2.0
    return CenterComparison(r0, rp, p.tolist(), bool(consistent), float(factor))


# --------------------------------------------------------------------------- equivalence triple

@dataclass
class TripleReport:
    """Three models of the same asymptotic question and whether they agree."""

    at_infinity: DivergenceReport
    inverted_at_0: DivergenceReport
    modified_at_pole: DivergenceReport
    agree: bool
    exponent_spread: float
    witness_t: float = None

    @property
    def verdicts(self):
        return (self.at_infinity.verdict, self.inverted_at_0.verdict, self.modified_at_pole.verdict)

    def to_dict(self):
        return {"at_infinity": self.at_infinity.to_dict(), "inverted_at_0": self.inverted_at_0.to_dict(),
                "modified_at_pole": self.modified_at_pole.to_dict(), "verdicts": list(self.verdicts),
                "agree": self.agree, "exponent_spread": self.exponent_spread, "witness_t": self.witness_t}


EXPONENT_MATCH = 0.2


def _reslice(cloud, radius_fn, level, density):
    """Selection-only slice of a transformed cloud at a tight tolerance."""
    cloud = cloud.transformed(lambda X: X, density_target=density)
    return sample_link(None, cloud, radius_fn, level, slice_tol=1e-8 * level)


def verify_equivalence_triple(spec, t_grid, h_rel=H_REL, h_max=None, seed=0, slices=None):
    """Compare LNE-at-infinity of X, LNE-at-0 of its inversion and LNE-at-the-pole of its lift.

    The inverted and lifted slices are the images of the world slices, cut
    again from the transformed clouds; their graphs use epsilon scaled by the
    local conformal factor of the map (1/t^2 for the inversion, 2/(1+t^2)
    for the lift), under which both maps send a sphere S_t to a sphere.
    """
    if spec.bounded:
        raise NotApplicable(f"{spec.name!r} is bounded; the infinity-side verdicts are vacuous")
    t_grid = check_t_grid(t_grid)
    if slices is None:
        slices = sample_slices(spec, t_grid, None, h_rel, h_max, seed)
    world = llne_from_slices(t_grid, slices, "infinity")
    n = spec.ambient_dim
    pole = north_pole(n)
    inv_t, inv_s, hat_t, hat_s = [], [], [], []
    for t, link in zip(t_grid, slices):
        if isinstance(link, Exception):
            continue
        h = link.cloud.density_target
        part = link.cloud.subset(link.indices)
        inv_cloud = part.transformed(invert)
        inv_t.append(_reslice(inv_cloud, RadiusFunction.norm(), 1.0 / t, h / t**2))
        inv_s.append(1.0 / t)
        hat_cloud = stereographic_modify(part, unbounded=False)
        s = float(pole_distance_level(t))
        hat_t.append(_reslice(hat_cloud, RadiusFunction.about(pole), s, h * 2.0 / (1.0 + t * t)))
        hat_s.append(s)
    inverted = llne_from_slices(inv_s, inv_t, "local")
    modified = llne_from_slices(hat_s, hat_t, "local")
    reports = (world, inverted, modified)
    exps = [r.fitted_exponent for r in reports]
    spread = float(max(exps) - min(exps))
    same = len({r.verdict for r in reports}) == 1
    agree = same and (world.verdict == "bounded" or spread <= EXPONENT_MATCH)
    witness = None
    if not agree:
        # t where the three curves differ most (inverted grids are reversed)
        a = np.asarray(world.ratio_per_t)
        b = np.asarray(inverted.ratio_per_t)[::-1]
        c = np.asarray(modified.ratio_per_t)[::-1]
        m = min(a.size, b.size, c.size)
        gap = np.max(np.stack([a[:m], b[:m], c[:m]]), axis=0) / np.min(np.stack([a[:m], b[:m], c[:m]]), axis=0)
        witness = float(world.t_grid[int(np.argmax(gap))]) if m else None
    return TripleReport(world, inverted, modified, bool(agree), spread, witness)


__all__ = [
    "sample_slices", "llne_from_slices", "estimate_llne", "verify_link_equivalence", "link_comparison",
    "compare_center_links", "verify_equivalence_triple", "LinkEquivalenceReport", "CenterComparison",
    "TripleReport", "fit_exponent",
]
