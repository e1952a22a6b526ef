"""Radius functions: Lipschitz functions comparable to the Euclidean norm."""
import numpy as np

from ._validation import check_points, check_vector


class RadiusFunction:
    """A radius function phi with (1/C)|x| <= phi(x) <= C|x|.

    Three kinds are supported: ``"norm"`` (distance to the origin),
    ``"norm-from-p"`` (distance to a fixed center) and ``"table"`` (values
    given on a cloud, no extension off the cloud).
    """

    def __init__(self, kind="norm", center=None, values=None, C=1.0):
        if kind not in ("norm", "norm-from-p", "table"):
            raise ValueError(f"unknown radius function kind {kind!r}")
        if C < 1:
            raise ValueError("equivalence constant C must be >= 1")
        self.kind = kind
        self.center = None if center is None else check_vector(center, "center")
        self.values = None if values is None else np.asarray(values, dtype=np.float64).ravel()
        self.C = float(C)
        if kind == "norm-from-p" and self.center is None:
            raise ValueError("norm-from-p requires a center")
        if kind == "table" and self.values is None:
            raise ValueError("table radius function requires values")

    @classmethod
    def norm(cls):
        return cls("norm")

    @classmethod
    def about(cls, p, C=1.0):
        return cls("norm-from-p", center=p, C=C)

    @classmethod
    def table(cls, values, C):
        return cls("table", values=values, C=C)

    def __repr__(self):
        if self.kind == "norm-from-p":
            return f"RadiusFunction.about({self.center.tolist()})"
        return f"RadiusFunction({self.kind!r}, C={self.C})"

    def center_of(self, dim):
        if self.center is not None:
            if self.center.size != dim:
                raise ValueError(f"radius center has dimension {self.center.size}, expected {dim}")
            return self.center
        return np.zeros(dim)

    @property
    def has_gradient(self):
        return self.kind != "table"

    def __call__(self, X):
        if self.kind == "table":
            X = np.asarray(X)
            if X.shape[0] != self.values.size:
                raise ValueError("table radius function evaluated off its cloud")
            return self.values.copy()
        X = check_points(X)
        return np.linalg.norm(X - self.center_of(X.shape[1]), axis=1)

    def gradient(self, X):
        if self.kind == "table":
            raise ValueError("table radius functions have no gradient")
        X = check_points(X)
        d = X - self.center_of(X.shape[1])
        r = np.linalg.norm(d, axis=1, keepdims=True)
        with np.errstate(invalid="ignore", divide="ignore"):
            return np.where(r > 0, d / r, 0.0)

    def measured_constant(self, X):
        """Smallest C with (1/C)|x| <= phi(x) <= C|x| on the rows of X (origin rows skipped)."""
        X = check_points(X)
        phi = self(X)
        r = np.linalg.norm(X, axis=1)
        ok = (r > 0) & (phi > 0)
        if not np.any(ok):
            return 1.0
        ratio = phi[ok] / r[ok]
        return float(max(1.0, ratio.max(), 1.0 / ratio.min()))

    def check(self, X):
        """True when the declared constant bounds every sampled point."""
        return self.measured_constant(X) <= self.C * (1 + 1e-12)

    def to_dict(self):
        out = {"kind": self.kind, "C": self.C}
        if self.center is not None:
            out["center"] = self.center.tolist()
        return out
