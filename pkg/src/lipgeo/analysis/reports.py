"""Result records shared by the analysis routines."""
from dataclasses import asdict, dataclass, field

import numpy as np

DIVERGING_MIN_EXPONENT = 0.2
DIVERGING_MIN_R2 = 0.9
BOUNDED_MAX_SPREAD = 1.5


@dataclass
class LipschitzEstimate:
    """Sample supremum of d_inn / d_out, with the pair attaining it."""

    constant: float
    witness_pair: tuple
    pairs_scanned: int
    resolution_note: str
    components: list = field(default_factory=list)

    def to_dict(self):
        out = asdict(self)
        out["witness_pair"] = None if self.witness_pair is None else list(self.witness_pair)
        out["components"] = [c.to_dict() if hasattr(c, "to_dict") else c for c in self.components]
        return out


def fit_exponent(t, ratio, local=False):
    """Least-squares slope of log ratio against log t, and r^2.

    At infinity ratio ~ t^alpha; near a point ratio ~ t^(-alpha), so the
    local exponent is the negated slope.
    """
    t, ratio = np.asarray(t, dtype=np.float64), np.asarray(ratio, dtype=np.float64)
    if t.size < 2:
        return 0.0, 0.0
    lx, ly = np.log(t), np.log(ratio)
    slope, intercept = np.polyfit(lx, ly, 1)
    ss_tot = float(np.sum((ly - ly.mean()) ** 2))
    ss_res = float(np.sum((ly - (slope * lx + intercept)) ** 2))
    r2 = 1.0 if ss_tot == 0 else 1.0 - ss_res / ss_tot
    return float(-slope if local else slope), float(r2)


def classify(ratio, alpha, r2):
    ratio = np.asarray(ratio, dtype=np.float64)
    if ratio.size == 0:
        return "inconclusive"
    if ratio.max() / ratio.min() <= BOUNDED_MAX_SPREAD:
        return "bounded"
    if alpha >= DIVERGING_MIN_EXPONENT and r2 >= DIVERGING_MIN_R2:
        return "diverging"
    return "inconclusive"


@dataclass
class DivergenceReport:
    """Per-t ratios along a grid with their growth fit and verdict."""

    t_grid: list
    ratio_per_t: list
    fitted_exponent: float
    verdict: str
    r_squared: float
    side: str = "infinity"
    witnesses: list = field(default_factory=list)
    connected: list = field(default_factory=list)
    dropped: list = field(default_factory=list)
    notes: dict = field(default_factory=dict)

    @classmethod
    def from_ratios(cls, t_grid, ratios, side="infinity", **extra):
        t_grid = [float(t) for t in t_grid]
        ratios = [float(r) for r in ratios]
        alpha, r2 = fit_exponent(t_grid, ratios, local=(side == "local"))
        return cls(t_grid, ratios, alpha, classify(ratios, alpha, r2), r2, side, **extra)

    @property
    def spread(self):
        r = np.asarray(self.ratio_per_t)
        return float(r.max() / r.min()) if r.size else float("nan")

    def to_dict(self):
        out = asdict(self)
        out["spread"] = self.spread
        return out

    def curve_rows(self):
        return list(zip(self.t_grid, self.ratio_per_t))
