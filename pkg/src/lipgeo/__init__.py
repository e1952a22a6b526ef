"""Inner, outer and pancake metrics on sampled sets, inversion and stereographic transforms, LNE diagnostics."""
from .exceptions import *  # noqa: F401,F403
from .metric import (
    UNREACHABLE,
    McShaneExtension,
    MetricGraph,
    PancakeDecomposition,
    build_graph,
    clamp_radius,
    distance_to_subset,
    inner_distance,
    mcshane_extend,
    pancake_distance,
)
from .radius import RadiusFunction
from .setdef import LinkSlice, Region, SampleCloud, SetSpec, sample_link, sample_set
from .transforms import (
    Inversion,
    RadiusNormalizer,
    SampledMap,
    StereographicLift,
    conjugate_by_inversion,
    invert,
    radius_normalize,
    stereographic_lift,
    stereographic_modify,
    stereographic_project,
)

__version__ = "0.1.0"
