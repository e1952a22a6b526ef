"""Inversion, stereographic projections and radius normalization, plus sampled maps.

All point maps accept a single vector or an (N, n) array and return the same
shape.  Bounds checked here are sampled-pair suprema, never true suprema.
"""
import csv
from dataclasses import dataclass, field

import numpy as np
from scipy.spatial.distance import cdist
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from ._validation import check_points
from .exceptions import (
    ClaimedConstantViolated,
    NotOnSphere,
    OriginNotInvertible,
    OriginNotNormalizable,
    PoleNotProjectable,
    RadiusOutOfBand,
)
from .metric import McShaneExtension, clamp_radius

ORIGIN_GUARD = 1e-300
SPHERE_TOL = 1e-9
POLE_LABEL = -1

TRANSFORM_NAMES = ("invert", "stereo", "stereo-inverse", "normalize", "conjugate")


def _rows(x):
    a = np.asarray(x, dtype=np.float64)
    return a.reshape(1, -1) if a.ndim == 1 else a, a.ndim == 1


def _out(a, single):
    return a[0] if single else a


def invert(x):
    """Inversion x -> x / |x|^2."""
    X, single = _rows(x)
    r = np.linalg.norm(X, axis=1, keepdims=True)
    if np.any(r < ORIGIN_GUARD):
        raise OriginNotInvertible("the origin (or a point within 1e-300 of it) has no inverse")
    return _out((X / r) / r, single)


def _check_sphere(Q):
    dev = np.abs(np.linalg.norm(Q, axis=1) - 1.0)
    if np.any(dev > SPHERE_TOL):
        raise NotOnSphere(f"point is {dev.max():.3g} away from the unit sphere")


def stereographic_project(q):
    """Projection from the north pole: (x, t) -> x / (1 - t)."""
    Q, single = _rows(q)
    _check_sphere(Q)
    denom = 1.0 - Q[:, -1:]
    if np.any(denom <= 0):
        raise PoleNotProjectable("the north pole e_{n+1} has no image")
    return _out(Q[:, :-1] / denom, single)


def stereographic_project_south(q):
    """Projection from the south pole: (x, t) -> x / (1 + t)."""
    Q, single = _rows(q)
    _check_sphere(Q)
    denom = 1.0 + Q[:, -1:]
    if np.any(denom <= 0):
        raise PoleNotProjectable("the south pole -e_{n+1} has no image")
    return _out(Q[:, :-1] / denom, single)


def stereographic_lift(x):
    """Inverse of :func:`stereographic_project`: x -> (2x, |x|^2 - 1) / (|x|^2 + 1)."""
    X, single = _rows(x)
    r = np.linalg.norm(X, axis=1, keepdims=True)
    out = np.empty((X.shape[0], X.shape[1] + 1))
    zero = r[:, 0] == 0
    nz = ~zero
    rn = r[nz]
    inv = 1.0 / rn
    # written in r and 1/r so that neither r^2 nor 1/r^2 overflows
    out[nz, :-1] = 2.0 * (X[nz] / rn) / (rn + inv)
    out[nz, -1:] = (rn - inv) / (rn + inv)
    out[zero, :-1] = 0.0
    out[zero, -1] = -1.0
    return _out(out, single)


def north_pole(n):
    e = np.zeros(n + 1)
    e[-1] = 1.0
    return e


def pole_distance_level(t):
    """Distance from the north pole to the lift of any point with |x| = t."""
    t = np.asarray(t, dtype=np.float64)
    return 2.0 / np.sqrt(1.0 + t * t)


def stereographic_modify(cloud, unbounded=None, density_target=None):
    """Lift a cloud to S^n; append the north pole (label -1) when the source set is unbounded."""
    Q = stereographic_lift(cloud.points)
    Q = Q / np.linalg.norm(Q, axis=1, keepdims=True)
    labels = cloud.piece_label.copy()
    residual = cloud.residual.copy()
    if unbounded:
        Q = np.vstack([Q, north_pole(cloud.dim)])
        labels = np.append(labels, POLE_LABEL)
        residual = np.append(residual, 0.0)
    from .setdef import SampleCloud

    return SampleCloud(Q, labels, residual, cloud.density_target if density_target is None else density_target,
                       cloud.seed, None, cloud.name)


def radius_normalize(x, phi_tilde, C=None):
    """Map x to (phi_tilde(x) / |x|) x, so that |result| = phi_tilde(x)."""
    X, single = _rows(x)
    phi = np.atleast_1d(np.asarray(phi_tilde, dtype=np.float64))
    r = np.linalg.norm(X, axis=1)
    if np.any(r == 0):
        raise OriginNotNormalizable("radius normalization is undefined at the origin")
    if C is not None:
        lo, hi = r / C, C * r
        if np.any(phi < lo * (1 - 1e-12)) or np.any(phi > hi * (1 + 1e-12)):
            raise RadiusOutOfBand(f"radius values leave the band [|x|/C, C|x|] for C={C:g}")
    return _out(X * (phi / r)[:, None], single)


# --------------------------------------------------------------------------- sampled maps

def _pair_ratios(A, B, block=1024):
    """Max and min of |B_i - B_j| / |A_i - A_j| over distinct pairs, with witnesses."""
    hi, lo, w_hi, w_lo = -np.inf, np.inf, None, None
    N = A.shape[0]
    for s in range(0, N, block):
        dA = cdist(A[s:s + block], A)
        dB = cdist(B[s:s + block], B)
        rows = np.arange(s, min(s + block, N))
        mask = (dA > 0) & (np.arange(N)[None, :] > rows[:, None])
        if not np.any(mask):
            continue
        R = np.where(mask, dB / np.where(mask, dA, 1.0), np.nan)
        i, j = np.unravel_index(np.nanargmax(R), R.shape)
        if R[i, j] > hi:
            hi, w_hi = float(R[i, j]), (int(rows[i]), int(j))
        i, j = np.unravel_index(np.nanargmin(R), R.shape)
        if R[i, j] < lo:
            lo, w_lo = float(R[i, j]), (int(rows[i]), int(j))
    return hi, lo, w_hi, w_lo


@dataclass(eq=False)
class SampledMap:
    """A map known on finitely many points: ``image_points[i] = F(domain_points[i])``."""

    domain_points: np.ndarray
    image_points: np.ndarray
    claimed_C: float = None
    excluded: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=np.int64))

    def __post_init__(self):
        self.domain_points = check_points(self.domain_points, name="domain_points")
        self.image_points = check_points(self.image_points, name="image_points")
        if len(self.domain_points) != len(self.image_points):
            raise ValueError("domain and image must have equal lengths")

    def __len__(self):
        return len(self.domain_points)

    def lipschitz_constant(self):
        """Empirical Lipschitz constant and witness pair."""
        hi, _, w, _ = _pair_ratios(self.domain_points, self.image_points)
        return hi, w

    def bilipschitz_constant(self, fix_origin=False):
        """Smallest C with (1/C)|x-y| <= |F(x)-F(y)| <= C|x-y| on sampled pairs.

        ``fix_origin`` adds the pair (0, 0) to the sample, for maps known to fix the origin.
        """
        A, B = self.domain_points, self.image_points
        if fix_origin:
            A = np.vstack([A, np.zeros(A.shape[1])])
            B = np.vstack([B, np.zeros(B.shape[1])])
        hi, lo, w_hi, w_lo = _pair_ratios(A, B)
        if lo <= 0:
            return np.inf, w_lo
        if hi >= 1.0 / lo:
            return max(1.0, hi), w_hi
        return max(1.0, 1.0 / lo), w_lo

    def verify(self, fix_origin=False):
        if self.claimed_C is None:
            return self
        C, w = self.bilipschitz_constant(fix_origin=fix_origin)
        if C > self.claimed_C * (1 + 1e-12):
            raise ClaimedConstantViolated(
                f"measured bi-Lipschitz constant {C:.6g} exceeds claimed {self.claimed_C:.6g}", w, C)
        return self

    def to_csv(self, path):
        n, m = self.domain_points.shape[1], self.image_points.shape[1]
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow([f"d{i + 1}" for i in range(n)] + [f"i{i + 1}" for i in range(m)])
            for a, b in zip(self.domain_points, self.image_points):
                w.writerow([repr(float(v)) for v in a] + [repr(float(v)) for v in b])

    @classmethod
    def from_csv(cls, path, claimed_C=None):
        with open(path, newline="") as fh:
            rows = list(csv.reader(fh))
        n = sum(1 for h in rows[0] if h.startswith("d"))
        data = np.array([[float(v) for v in r] for r in rows[1:]])
        return cls(data[:, :n], data[:, n:], claimed_C)


def conjugation_bound(C):
    """Lipschitz bound 4C^3 + C + 2C^4 for the inversion conjugate of a C-bi-Lipschitz map fixing 0."""
    return 4 * C**3 + C + 2 * C**4


def conjugate_by_inversion(F, r0=None):
    """Sample x -> invert(F(invert(x))) on the inverted domain.

    Domain points within the guard radius ``r0`` (default 1e-6 times the
    domain diameter) are excluded and listed in ``excluded``.  The claimed
    constant of ``F`` is checked first (with the origin as a fixed point);
    the result carries ``claimed_C = 4C^3 + C + 2C^4``.
    """
    if F.claimed_C is None:
        raise ValueError("conjugation needs a claimed bi-Lipschitz constant on F")
    F.verify(fix_origin=True)
    D = F.domain_points
    if r0 is None:
        span = np.ptp(D, axis=0)
        r0 = 1e-6 * float(np.linalg.norm(span)) if np.any(span) else 1e-6
    keep = np.linalg.norm(D, axis=1) >= r0
    excluded = np.flatnonzero(~keep)
    new_domain = invert(D[keep])
    new_image = invert(F.image_points[keep])
    return SampledMap(new_domain, new_image, conjugation_bound(F.claimed_C), excluded)


def psi_inverse_check(points, phi_tilde, C, r0):
    """Difference-quotient form of the bound Lip(psi^-1) <= 9 C^2 K away from a ball.

    ``points`` are sampled with |x| >= r0, ``phi_tilde`` are the clamped radius
    values on them.  K is measured as the co-Lipschitz constant of the
    inversion conjugate of psi.  Returns a dict with the measured quantities.
    """
    X = check_points(points)
    far = np.linalg.norm(X, axis=1) >= r0
    X, phi = X[far], np.asarray(phi_tilde, dtype=np.float64)[far]
    psi = radius_normalize(X, phi, C)
    # psi^-1 as a sampled map from psi(X) back to X
    inv_lip, _ = SampledMap(psi, X).lipschitz_constant()
    conj_inv_lip, _ = SampledMap(invert(psi), invert(X)).lipschitz_constant()
    bound = 9 * C**2 * conj_inv_lip
    return {"lip_psi_inverse": inv_lip, "K": conj_inv_lip, "bound": bound, "holds": inv_lip <= bound}


# --------------------------------------------------------------------------- estimators

class Inversion(TransformerMixin, BaseEstimator):
    """Inversion in the unit sphere as a stateless transformer (its own inverse)."""

    def fit(self, X, y=None):
        self.n_features_in_ = check_points(X).shape[1]
        return self

    def transform(self, X):
        return invert(check_points(X))

    def inverse_transform(self, X):
        return invert(check_points(X))


class StereographicLift(TransformerMixin, BaseEstimator):
    """R^n -> S^n by inverse stereographic projection from the north pole."""

    def fit(self, X, y=None):
        self.n_features_in_ = check_points(X).shape[1]
        return self

    def transform(self, X):
        return stereographic_lift(check_points(X))

    def inverse_transform(self, Q):
        return stereographic_project(check_points(Q))


class RadiusNormalizer(TransformerMixin, BaseEstimator):
    """Radial map x -> (phi~(x)/|x|) x built from radius values sampled on a set.

    ``fit(X, phi)`` extends the sampled radius values with a Lipschitz
    extension of constant ``C`` and clamps the extension into [|x|/C, C|x|].
    """

    def __init__(self, C=None):
        self.C = C

    def fit(self, X, phi):
        X = check_points(X)
        phi = np.asarray(phi, dtype=np.float64).ravel()
        r = np.linalg.norm(X, axis=1)
        ok = r > 0
        band = float(max(1.0, np.max(phi[ok] / r[ok]), np.max(r[ok] / phi[ok]))) if np.any(ok) else 1.0
        ext = McShaneExtension().fit(X, phi)
        self.C_ = float(max(band, ext.C_, 1.0)) if self.C is None else float(self.C)
        self.extension_ = McShaneExtension(self.C_).fit(X, phi)
        self.n_features_in_ = X.shape[1]
        return self

    def radius(self, X):
        check_is_fitted(self, "extension_")
        X = check_points(X, self.n_features_in_)
        return clamp_radius(self.extension_.predict(X), np.linalg.norm(X, axis=1), self.C_)

    def transform(self, X):
        X = check_points(X, self.n_features_in_)
        return radius_normalize(X, self.radius(X), self.C_)


def random_bilipschitz_map(dim, rng, wobble=0.25, perturbation=0.1, scale=None):
    """A seeded bi-Lipschitz map of R^dim fixing 0.

    x -> s (1 + c sin(log|x|)) R x + a (tanh(W x + b) - tanh(b)) with a random
    rotation R, c <= ``wobble`` and a |W| <= ``perturbation``.  Its constant
    is not computed here; measure it on a sample.
    """
    Q, Rm = np.linalg.qr(rng.normal(size=(dim, dim)))
    Q = Q * np.sign(np.diag(Rm))
    c = rng.uniform(0.0, wobble)
    W = rng.normal(size=(dim, dim))
    W /= np.linalg.norm(W, 2)
    b = rng.normal(size=dim)
    a = rng.uniform(0.0, perturbation)
    s = rng.uniform(0.7, 1.4) if scale is None else float(scale)

    def F(X):
        X, single = _rows(X)
        r = np.linalg.norm(X, axis=1, keepdims=True)
        with np.errstate(divide="ignore", invalid="ignore"):
            g = np.where(r > 0, 1.0 + c * np.sin(np.log(np.where(r > 0, r, 1.0))), 1.0)
        out = s * g * (X @ Q.T) + a * (np.tanh(X @ W.T + b) - np.tanh(b))
        return _out(out, single)

    return F
