"""Built-in example sets with known verdicts and the oracle behind each known value."""
from dataclasses import dataclass, field

import numpy as np

from .setdef import Region, SetSpec


@dataclass
class CorpusEntry:
    name: str
    spec: SetSpec
    region: Region
    density: float
    description: str
    expected: dict = field(default_factory=dict)
    provenance: dict = field(default_factory=dict)
    t_grid: tuple = None
    arcs: tuple = None

    def sample(self, density=None, seed=0):
        from .setdef import sample_set

        return sample_set(self.spec, self.region, self.density if density is None else density, seed=seed)

    def to_row(self):
        return {
            "name": self.name,
            "ambient_dim": self.spec.ambient_dim,
            "pieces": len(self.spec.pieces),
            "bounded": bool(self.spec.bounded),
            "expected": dict(self.expected),
            "provenance": dict(self.provenance),
            "description": self.description,
        }


def _implicit(eqs, ineqs=()):
    return {"implicit": {"equalities": list(eqs), "inequalities": list(ineqs)}}


def _param(box, exprs):
    return {"parametric": {"box": [list(b) for b in box], "map": list(exprs)}}


def _build():
    entries = [
        CorpusEntry(
            "cone", SetSpec(3, [_implicit(["x1^2 + x2^2 - x3^2"], ["x3"])], "cone", bounded=False),
            Region.annulus(1.0, 4.0, dim=3), 0.05,
            "round cone {x^2 + y^2 = z^2, z >= 0}; LNE with circular links",
            {"lne_constant": 1.27, "slice_lne": float(np.pi / 2), "llne": "bounded", "link_equivalence": "bounded",
             "triple": "bounded", "arc_divergence": "bounded"},
            {"lne_constant": "[DERIVED] geodesics on the unrolled cone against chords",
             "slice_lne": "[DERIVED] antipodal ratio pi/2 of a round circle",
             "llne": "[DERIVED] every sphere section is a round circle"},
            (4.0, 64.0),
            (lambda t: np.array([t, 0.0, t]) / np.sqrt(2), lambda t: np.array([0.0, t, t]) / np.sqrt(2)),
        ),
        CorpusEntry(
            "tangent-pair",
            SetSpec(2, [_param([(0, 1)], ["u1", "0"]), _param([(0, 1)], ["u1", "u1^2"])], "tangent-pair"),
            Region.ball(2.0, dim=2), 1e-3,
            "segment and parabola arc tangent at the origin; not LNE at 0",
            {"lne_constant_min": 10.0, "arc_divergence": "diverging", "arc_exponent": 1.0},
            {"lne_constant_min": "[DERIVED] ratio about 2t/t^2 at abscissa t",
             "arc_divergence": "[DERIVED] analytic 2t/t^2 along (t,0), (t,t^2)"},
            (0.02, 0.2),
            (lambda t: np.array([t, 0.0]), lambda t: np.array([t, t * t])),
        ),
        CorpusEntry(
            "tangent-sheets-infinity",
            SetSpec(3, [_implicit(["x3"], ["x1"]), _implicit(["x3^2 - x1"], ["x3"])],
                    "tangent-sheets-infinity", bounded=False),
            Region.annulus(1.0, 8.0, dim=3), 0.1,
            "half-plane {z=0, x>=0} and sheet {z^2=x, z>=0} times the y-axis; connected link, "
            "sheets only sqrt(t) apart at radius t",
            {"llne": "diverging", "llne_exponent": 0.5, "triple": "diverging"},
            {"llne": "[DERIVED] link ratio about pi t / sqrt(t)", "llne_exponent": "[DERIVED] pi sqrt(t) growth"},
            (1.0, 100.0),
        ),
        CorpusEntry(
            "L-shape",
            SetSpec(2, [_param([(0, 1)], ["u1", "0"]), _param([(0, 1)], ["0", "u1"])], "L-shape"),
            Region.ball(2.0, dim=2), 0.02,
            "two unit segments meeting at a right angle; two pancakes",
            {"lne_constant": float(np.sqrt(2)), "pancakes": 2},
            {"lne_constant": "[DERIVED] (a+b)/sqrt(a^2+b^2) is largest at a=b",
             "pancakes": "[TRIVIAL] each leg is convex"},
        ),
        CorpusEntry(
            "parabola", SetSpec(2, [_implicit(["x2 - x1^2"])], "parabola", bounded=False),
            Region.annulus(1e4, 2e4, dim=2), 100.0,
            "parabola y = x^2; single tangent direction at infinity",
            {"tangent_cone": [[0.0, 1.0]], "llne": "bounded"},
            {"tangent_cone": "[DERIVED] (t, t^2)/|(t, t^2)| -> (0, 1)"},
            (4.0, 64.0),
        ),
        CorpusEntry(
            "plane-annulus", SetSpec(2, [_implicit([])], "plane-annulus", bounded=False),
            Region.annulus(1.0, 4.0, dim=2), 0.05,
            "the Euclidean plane, sampled on annuli",
            {"lne_constant": 1.0, "link_equivalence": "bounded", "link_K": float(np.pi / 2), "llne": "bounded"},
            {"link_K": "[DERIVED] half circle pi t over diameter 2t"},
            (4.0, 64.0),
        ),
        CorpusEntry(
            "circle", SetSpec(2, [_implicit(["x1^2 + x2^2 - 1"])], "circle", bounded=True),
            Region.ball(2.0, dim=2), 0.01,
            "unit circle",
            {"lne_constant": float(np.pi / 2), "triple": "not-applicable"},
            {"lne_constant": "[DERIVED] antipodal ratio pi/2"},
        ),
        CorpusEntry(
            "segment", SetSpec(2, [_param([(-1, 1)], ["0.6*u1", "0.8*u1"])], "segment"),
            Region.ball(2.0, dim=2), 0.01,
            "straight segment through the origin",
            {"lne_constant": 1.0},
            {"lne_constant": "[TRIVIAL] inner equals outer on a convex set"},
        ),
        CorpusEntry(
            "parallel-rays",
            SetSpec(2, [_implicit(["x2"], ["x1"]), _implicit(["x2 - 1"], ["x1"])], "parallel-rays", bounded=False),
            Region.annulus(1.0, 8.0, dim=2), 0.05,
            "two parallel rays at distance 1; the link at infinity is two points",
            {"link_equivalence": "disconnected-link"},
            {"link_equivalence": "[TRIVIAL] two components by construction"},
            (4.0, 64.0),
        ),
    ]
    return {e.name: e for e in entries}


CORPUS = _build()

# absolute spacing caps used when a feature of fixed size must stay resolved at every t
H_MAX = {"parallel-rays": 0.05}


def get(name):
    try:
        return CORPUS[name]
    except KeyError:
        raise KeyError(f"unknown corpus entry {name!r}; known: {sorted(CORPUS)}") from None


def list_corpus():
    return [e.to_row() for e in CORPUS.values()]
