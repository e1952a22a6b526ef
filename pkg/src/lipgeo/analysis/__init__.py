"""LNE and LLNE estimation, arc criteria, tangent cones and the link/equivalence harnesses."""
from .arcs import IsoscelesResult, arc_points, check_isosceles, detect_arc_divergence
from .cones import TangentCone, tangent_cone_at_infinity
from .links import (
    CenterComparison,
    LinkEquivalenceReport,
    TripleReport,
    compare_center_links,
    estimate_llne,
    link_comparison,
    llne_from_slices,
    sample_slices,
    verify_equivalence_triple,
    verify_link_equivalence,
)
from .lne import LNEEstimator, estimate_lne_constant, farthest_point_indices
from .reports import DivergenceReport, LipschitzEstimate, classify, fit_exponent

__all__ = [
    "CenterComparison", "DivergenceReport", "IsoscelesResult", "LNEEstimator", "LinkEquivalenceReport",
    "LipschitzEstimate", "TangentCone", "TripleReport", "arc_points", "check_isosceles", "classify",
    "compare_center_links", "detect_arc_divergence", "estimate_llne", "estimate_lne_constant",
    "farthest_point_indices", "fit_exponent", "link_comparison", "llne_from_slices", "sample_slices",
    "tangent_cone_at_infinity", "verify_equivalence_triple", "verify_link_equivalence",
]
