"""Tangent directions at infinity from the outermost band of a sample."""
from dataclasses import dataclass

import numpy as np
from scipy.spatial import cKDTree

from ..exceptions import EmptyBand
from ..setdef import canonical_order


@dataclass
class TangentCone:
    directions: np.ndarray
    weights: np.ndarray
    angular_radius: float
    band: tuple

    def __len__(self):
        return self.directions.shape[0]

    def to_dict(self):
        return {"directions": self.directions.tolist(), "weights": self.weights.tolist(),
                "angular_radius": self.angular_radius, "band": list(self.band)}


def tangent_cone_at_infinity(cloud, radius_band, density=None):
    """Cluster the directions x/|x| of points with |x| in ``radius_band``.

    Leader clustering in lexicographic order with chordal radius 3h/t_min;
    centers are normalized member means, weights are member fractions.
    """
    t_min, t_max = map(float, radius_band)
    P = cloud.points if hasattr(cloud, "points") else np.asarray(cloud, dtype=np.float64)
    h = density if density is not None else getattr(cloud, "density_target", None)
    if h is None:
        raise ValueError("a density is needed to set the clustering radius")
    r = np.linalg.norm(P, axis=1)
    inside = (r >= t_min) & (r <= t_max) & (r > 0)
    if not np.any(inside):
        raise EmptyBand(f"no sample with norm in [{t_min:g}, {t_max:g}]")
    U = P[inside] / r[inside, None]
    U = U[canonical_order(U)]
    radius = 3.0 * h / t_min
    near = cKDTree(U).query_ball_point(U, radius)
    owner = np.full(U.shape[0], -1)
    leaders = []
    for i in range(U.shape[0]):
        if owner[i] >= 0:
            continue
        owner[i] = len(leaders)
        for j in near[i]:
            if owner[j] < 0:
                owner[j] = len(leaders)
        leaders.append(i)
    k = len(leaders)
    sums = np.zeros((k, U.shape[1]))
    np.add.at(sums, owner, U)
    counts = np.bincount(owner, minlength=k).astype(np.float64)
    norms = np.linalg.norm(sums, axis=1, keepdims=True)
    centers = np.where(norms > 0, sums / np.where(norms > 0, norms, 1), U[leaders])
    return TangentCone(centers, counts / counts.sum(), radius, (t_min, t_max))
