"""Declarative set descriptions and tolerance-certified point samples.

A :class:`SetSpec` is a union of pieces, each an implicit polynomial system,
a parametrized patch or a literal point list.  :func:`sample_set` turns it
into a :class:`SampleCloud` whose points satisfy their piece's equalities to
``TAU`` (after normalisation by ``max(1, |x|)**degree``), and
:func:`sample_link` extracts a level set of a radius function.
"""
import csv
import struct
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.spatial import cKDTree

from ._validation import check_points, check_positive, check_vector
from .exceptions import EmptySample, EmptySlice, NoConvergence, SpecError
from .expressions import compile_system, variable_names

TAU = 1e-10
# greedy thinning radius as a fraction of the density target; mean spacing then lands near h
THIN_FACTOR = 0.8
CLOUD_MAGIC = b"LIPGEO-CLOUD\0\0\0\0"
_MAX_GRID = 20_000_000
_CHUNK = 1_000_000


# --------------------------------------------------------------------------- pieces

def _as_tuple(seq):
    if isinstance(seq, str):
        return (seq,)
    return tuple(seq)


@dataclass(frozen=True)
class Implicit:
    """Zero set of ``equalities`` intersected with ``{g >= 0}`` for each inequality."""

    equalities: tuple = ()
    inequalities: tuple = ()

    def __post_init__(self):
        object.__setattr__(self, "equalities", _as_tuple(self.equalities))
        object.__setattr__(self, "inequalities", _as_tuple(self.inequalities))

    def to_dict(self):
        return {"implicit": {"equalities": list(self.equalities), "inequalities": list(self.inequalities)}}


@dataclass(frozen=True)
class Parametric:
    """Image of the interval box ``box`` under ``map`` (one expression per ambient coordinate)."""

    box: tuple
    map: tuple
    params: tuple = None

    def __post_init__(self):
        box = tuple((float(lo), float(hi)) for lo, hi in self.box)
        if not box or any(not lo <= hi for lo, hi in box):
            raise SpecError("parametric box must be a non-empty list of [lo, hi] with lo <= hi")
        object.__setattr__(self, "box", box)
        object.__setattr__(self, "map", _as_tuple(self.map))
        params = variable_names("u", len(box)) if self.params is None else _as_tuple(self.params)
        if len(params) != len(box):
            raise SpecError("parametric piece needs one parameter name per box interval")
        object.__setattr__(self, "params", params)

    def to_dict(self):
        return {"parametric": {"params": list(self.params), "box": [list(b) for b in self.box], "map": list(self.map)}}


@dataclass(frozen=True, eq=False)
class CloudLiteral:
    points: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "points", check_points(self.points, name="literal points"))

    def to_dict(self):
        return {"cloud": {"points": self.points.tolist()}}


def piece_from_dict(d):
    if not isinstance(d, dict) or len(d) != 1:
        raise SpecError(f"a piece must be a mapping with exactly one of implicit/parametric/cloud, got {d!r}")
    (kind, body), = d.items()
    body = body or {}
    if kind == "implicit":
        return Implicit(body.get("equalities", ()), body.get("inequalities", ()))
    if kind == "parametric":
        if "box" not in body or "map" not in body:
            raise SpecError("parametric piece requires 'box' and 'map'")
        return Parametric(body["box"], body["map"], body.get("params"))
    if kind == "cloud":
        return CloudLiteral(body.get("points", []))
    raise SpecError(f"unknown piece kind {kind!r}")


@dataclass(eq=False)
class SetSpec:
    """Union of pieces in R^n; variables are named ``x1..xn``."""

    ambient_dim: int
    pieces: list
    name: str = "set"
    bounded: bool = None

    def __post_init__(self):
        if int(self.ambient_dim) != self.ambient_dim or self.ambient_dim < 1:
            raise SpecError("ambient_dim must be a positive integer")
        self.ambient_dim = int(self.ambient_dim)
        self.pieces = [piece_from_dict(p) if isinstance(p, dict) else p for p in self.pieces]
        if not self.pieces:
            raise SpecError("a SetSpec needs at least one piece")
        for p in self.pieces:
            self._check_piece(p)
        if self.bounded is None and all(not isinstance(p, Implicit) for p in self.pieces):
            self.bounded = True

    @property
    def variables(self):
        return variable_names("x", self.ambient_dim)

    def _check_piece(self, p):
        n = self.ambient_dim
        if isinstance(p, Implicit):
            self.equalities(p)
            self.inequalities(p)
        elif isinstance(p, Parametric):
            if len(p.map) != n:
                raise SpecError(f"parametric map has {len(p.map)} components, expected {n}")
            self.param_map(p)
        elif isinstance(p, CloudLiteral):
            if p.points.shape[1] != n:
                raise SpecError(f"literal cloud has dimension {p.points.shape[1]}, expected {n}")
        else:
            raise SpecError(f"unsupported piece {p!r}")

    def equalities(self, piece):
        return compile_system(piece.equalities, self.variables)

    def inequalities(self, piece):
        return compile_system(piece.inequalities, self.variables)

    @staticmethod
    def param_map(piece):
        return compile_system(piece.map, piece.params)

    @property
    def is_bounded(self):
        return bool(self.bounded)

    def residual(self, points, piece_label=None):
        """Normalised equality residual of each point against its piece (or the best piece).

        Parametric and literal pieces report the Euclidean distance to the
        piece; inequality violations make the residual infinite.
        """
        X = check_points(points, self.ambient_dim)
        labels = range(len(self.pieces)) if piece_label is None else [piece_label]
        best = np.full(X.shape[0], np.inf)
        for i in labels:
            best = np.minimum(best, _piece_residual(self, self.pieces[i], X))
        return best

    def to_dict(self):
        out = {"name": self.name, "ambient_dim": self.ambient_dim, "pieces": [p.to_dict() for p in self.pieces]}
        if self.bounded is not None:
            out["bounded"] = bool(self.bounded)
        return out

    @classmethod
    def from_dict(cls, d):
        if not isinstance(d, dict):
            raise SpecError("set description must be a mapping")
        for key in ("ambient_dim", "pieces"):
            if key not in d:
                raise SpecError(f"set description is missing {key!r}")
        return cls(d["ambient_dim"], list(d["pieces"]), d.get("name", "set"), d.get("bounded"))


def _piece_residual(spec, piece, X):
    if isinstance(piece, Implicit):
        eq = spec.equalities(piece)
        res = np.max(np.abs(eq.value(X)) / eq.scale(X), axis=1, initial=0.0)
        ineq = spec.inequalities(piece).value(X)
        bad = np.any(ineq < 0, axis=1) if ineq.shape[1] else np.zeros(X.shape[0], bool)
        return np.where(bad, np.inf, res)
    if isinstance(piece, CloudLiteral):
        d, _ = cKDTree(piece.points).query(X)
        return d
    return _parametric_distance(spec.param_map(piece), np.array(piece.box), X)


def _parametric_distance(F, box, X, coarse=24, iters=30):
    """Distance from rows of X to the image of ``box`` under F (grid seed + Gauss-Newton)."""
    k = box.shape[0]
    axes = [np.linspace(lo, hi, coarse) for lo, hi in box]
    U = np.stack([g.ravel() for g in np.meshgrid(*axes, indexing="ij")], axis=1)
    Y = F.value(U)
    _, idx = cKDTree(Y).query(X)
    u = U[idx].copy()
    for _ in range(iters):
        r = F.value(u) - X
        J = F.jacobian(u)
        step = np.einsum("nkm,nm->nk", np.linalg.pinv(J, rcond=1e-12), r)
        u = np.clip(u - step, box[:, 0], box[:, 1])
    return np.linalg.norm(F.value(u) - X, axis=1)


# --------------------------------------------------------------------------- regions

@dataclass(frozen=True)
class Region:
    """Closed annulus ``r_inner <= |x - center| <= r_outer`` (a ball when r_inner = 0)."""

    center: tuple
    r_outer: float
    r_inner: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "center", tuple(float(c) for c in check_vector(self.center, "center")))
        check_positive(self.r_outer, "r_outer")
        if not 0 <= self.r_inner <= self.r_outer:
            raise ValueError("need 0 <= r_inner <= r_outer")

    @classmethod
    def ball(cls, radius, center=None, dim=None):
        center = np.zeros(dim) if center is None else center
        return cls(tuple(np.asarray(center, float)), float(radius), 0.0)

    @classmethod
    def annulus(cls, r_inner, r_outer, center=None, dim=None):
        center = np.zeros(dim) if center is None else center
        return cls(tuple(np.asarray(center, float)), float(r_outer), float(r_inner))

    @property
    def dim(self):
        return len(self.center)

    def contains(self, X):
        r = np.linalg.norm(np.asarray(X) - np.asarray(self.center), axis=1)
        return (r >= self.r_inner) & (r <= self.r_outer)

    def to_dict(self):
        return {"center": list(self.center), "r_inner": self.r_inner, "r_outer": self.r_outer}


# --------------------------------------------------------------------------- clouds

@dataclass(eq=False)
class SampleCloud:
    points: np.ndarray
    piece_label: np.ndarray
    residual: np.ndarray
    density_target: float
    seed: int = 0
    params: np.ndarray = None
    name: str = ""

    def __post_init__(self):
        self.points = np.asarray(self.points, dtype=np.float64).reshape(len(self.points), -1)
        self.piece_label = np.asarray(self.piece_label, dtype=np.int64)
        self.residual = np.asarray(self.residual, dtype=np.float64)

    def __len__(self):
        return self.points.shape[0]

    @property
    def dim(self):
        return self.points.shape[1]

    @classmethod
    def from_points(cls, points, density, seed=0, name=""):
        P = check_points(points)
        return cls(P, np.zeros(len(P), np.int64), np.zeros(len(P)), float(density), seed, None, name)

    def subset(self, idx):
        idx = np.asarray(idx)
        params = None if self.params is None else self.params[idx]
        return replace(self, points=self.points[idx], piece_label=self.piece_label[idx],
                       residual=self.residual[idx], params=params)

    def transformed(self, fn, density_target=None):
        """Apply a point map to every point; labels and residual bookkeeping are carried over."""
        return replace(self, points=np.asarray(fn(self.points), dtype=np.float64),
                       density_target=self.density_target if density_target is None else density_target,
                       params=None)

    def append(self, points, piece_label, residual, params=None):
        points = np.asarray(points, dtype=np.float64).reshape(-1, self.dim)
        if self.params is not None or params is not None:
            width = max(_width(self.params), _width(params))
            merged = np.vstack([_pad(self.params, len(self), width), _pad(params, len(points), width)])
        else:
            merged = None
        return replace(self, points=np.vstack([self.points, points]),
                       piece_label=np.concatenate([self.piece_label, np.asarray(piece_label, np.int64)]),
                       residual=np.concatenate([self.residual, np.asarray(residual, np.float64)]),
                       params=merged)

    # ---- persistence
    def to_csv(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow([f"x{i + 1}" for i in range(self.dim)] + ["piece_label", "residual"])
            for p, lab, res in zip(self.points, self.piece_label, self.residual):
                w.writerow([repr(float(v)) for v in p] + [int(lab), repr(float(res))])

    @classmethod
    def from_csv(cls, path, density, seed=0):
        with open(path, newline="") as fh:
            rows = list(csv.reader(fh))
        header, body = rows[0], rows[1:]
        n = len(header) - 2
        data = np.array([[float(v) for v in r] for r in body]).reshape(-1, n + 2)
        return cls(data[:, :n], data[:, n].astype(np.int64), data[:, n + 1], float(density), seed)

    def to_bytes(self):
        head = CLOUD_MAGIC + struct.pack("<QQdq", len(self), self.dim, self.density_target, int(self.seed))
        return (head + self.points.astype("<f8").tobytes() + self.piece_label.astype("<i8").tobytes()
                + self.residual.astype("<f8").tobytes())

    @classmethod
    def from_bytes(cls, blob):
        if blob[:16] != CLOUD_MAGIC:
            raise ValueError("not a lipgeo cloud container (bad magic header)")
        N, n, density, seed = struct.unpack_from("<QQdq", blob, 16)
        off = 16 + 32
        pts = np.frombuffer(blob, "<f8", N * n, off).reshape(N, n)
        off += 8 * N * n
        lab = np.frombuffer(blob, "<i8", N, off)
        off += 8 * N
        res = np.frombuffer(blob, "<f8", N, off)
        return cls(pts.astype(np.float64), lab.astype(np.int64), res.astype(np.float64), density, seed)

    def save(self, path):
        with open(path, "wb") as fh:
            fh.write(self.to_bytes())

    @classmethod
    def load(cls, path):
        with open(path, "rb") as fh:
            return cls.from_bytes(fh.read())


def _width(a):
    return 0 if a is None else a.shape[1]


def _pad(a, rows, width):
    out = np.full((rows, width), np.nan)
    if a is not None:
        out[:, : a.shape[1]] = a
    return out


@dataclass(eq=False)
class LinkSlice:
    """Sampled level set ``{phi = t}``; ``indices`` point into ``cloud`` (the augmented parent)."""

    center: np.ndarray
    t: float
    radius_kind: str
    indices: np.ndarray
    level_residual: np.ndarray
    cloud: SampleCloud
    slice_tol: float

    @property
    def points(self):
        return self.cloud.points[self.indices]

    def __len__(self):
        return len(self.indices)


# --------------------------------------------------------------------------- sampling

def canonical_order(points):
    """Indices sorting rows lexicographically (first coordinate most significant)."""
    return np.lexsort(points.T[::-1])


def thin(points, radius):
    """Greedy deterministic thinning in the given row order: kept points are pairwise > radius apart."""
    N = points.shape[0]
    if N == 0:
        return np.zeros(0, dtype=np.int64)
    tree = cKDTree(points)
    neighbours = tree.query_ball_point(points, radius, return_sorted=False)
    blocked = np.zeros(N, dtype=bool)
    keep = []
    for i in range(N):
        if not blocked[i]:
            keep.append(i)
            blocked[neighbours[i]] = True
    return np.asarray(keep, dtype=np.int64)


def _rng(seed, *stream):
    return np.random.default_rng(np.random.SeedSequence([int(seed) & 0xFFFFFFFF, *stream]))


def _newton(residual_fn, jacobian_fn, X0, tol_fn, max_move, max_iter=60):
    """Batched minimum-norm Newton projection. Returns (X, converged mask)."""
    X = X0.copy()
    active = np.arange(X.shape[0])
    converged = np.zeros(X.shape[0], dtype=bool)
    for _ in range(max_iter):
        if active.size == 0:
            break
        Xa = X[active]
        F = residual_fn(Xa)
        ok = np.all(np.abs(F) <= 0.01 * tol_fn(Xa), axis=1)
        converged[active[ok]] = True
        active = active[~ok]
        if active.size == 0:
            break
        Xa, F = Xa[~ok], F[~ok]
        J = jacobian_fn(Xa)
        if J.shape[1] == 1:
            g = J[:, 0, :]
            gg = np.einsum("ij,ij->i", g, g)
            with np.errstate(all="ignore"):
                step = (F[:, 0] / gg)[:, None] * g
        else:
            step = np.einsum("nkm,nm->nk", np.linalg.pinv(J, rcond=1e-13), F)
        Xa = Xa - step
        moved = np.linalg.norm(Xa - X0[active], axis=1)
        alive = np.all(np.isfinite(Xa), axis=1) & (moved <= max_move)
        X[active] = Xa
        active = active[alive]
    # accept points that stalled at the tolerance (rounding floor)
    F = residual_fn(X)
    final = np.all(np.abs(F) <= tol_fn(X), axis=1) & np.all(np.isfinite(X), axis=1)
    final &= np.linalg.norm(X - X0, axis=1) <= max_move
    return X, final


def _grid_chunks(region, h, rng):
    c = np.asarray(region.center)
    n = c.size
    offset = rng.uniform(0.0, h, size=n)
    axes = [np.arange(c[i] - region.r_outer - h + offset[i], c[i] + region.r_outer + h, h) for i in range(n)]
    total = float(np.prod([len(a) for a in axes]))
    if total > _MAX_GRID * 50:
        raise ValueError(f"seed grid of {total:.3g} points is too large; increase density")
    inner = int(np.prod([len(a) for a in axes[1:]])) if n > 1 else 1
    rows = max(1, _CHUNK // max(inner, 1))
    for start in range(0, len(axes[0]), rows):
        mesh = np.meshgrid(axes[0][start:start + rows], *axes[1:], indexing="ij")
        yield np.stack([m.ravel() for m in mesh], axis=1)


def _sample_implicit(spec, piece, region, h, rng, tol):
    eq = spec.equalities(piece)
    c = np.asarray(region.center)
    out, worst, seeded = [], 0.0, 0
    for G in _grid_chunks(region, h, rng):
        r = np.linalg.norm(G - c, axis=1)
        G = G[(r >= region.r_inner - 2 * h) & (r <= region.r_outer + 2 * h)]
        if G.size == 0:
            continue
        if eq.m:
            F = eq.value(G)
            grad = np.linalg.norm(eq.jacobian(G), axis=2)
            near = np.all(np.abs(F) <= 1.5 * h * grad + 1e-300, axis=1)
            G = G[near]
            if G.size == 0:
                continue
            seeded += G.shape[0]
            X, ok = _newton(eq.value, eq.jacobian, G, lambda Y: tol * eq.scale(Y), max_move=3 * h)
            if np.any(~ok):
                res = np.max(np.abs(eq.value(X[~ok])) / eq.scale(X[~ok]), axis=1)
                res = res[np.isfinite(res)]
                if res.size:
                    worst = max(worst, float(res.min()))
            X = X[ok]
        else:
            seeded += G.shape[0]
            X = G
        out.append(X)
    X = np.vstack(out) if out else np.zeros((0, spec.ambient_dim))
    if seeded and X.shape[0] == 0 and eq.m:
        raise NoConvergence(f"projection onto piece {piece.equalities} never reached residual {tol}", worst)
    ineq = spec.inequalities(piece)
    if ineq.m and X.shape[0]:
        X = X[np.all(ineq.value(X) >= 0, axis=1)]
    X = X[region.contains(X)]
    if eq.m and X.shape[0]:
        res = np.max(np.abs(eq.value(X)) / eq.scale(X), axis=1)
    else:
        res = np.zeros(X.shape[0])
    return X, res, None


def _sample_parametric(spec, piece, region, h, rng):
    F = spec.param_map(piece)
    box = np.array(piece.box)
    k = box.shape[0]
    coarse = [np.linspace(lo, hi, 9 if k > 1 else 65) for lo, hi in box]
    U = np.stack([g.ravel() for g in np.meshgrid(*coarse, indexing="ij")], axis=1)
    stretch = float(np.nanmax(np.linalg.norm(F.jacobian(U), ord=2, axis=(1, 2))))
    stretch = max(stretch, 1e-12)
    spacing = h / (2.0 * stretch)
    counts = [max(2, int(np.ceil((hi - lo) / spacing)) + 1) for lo, hi in box]
    while float(np.prod(counts)) > _MAX_GRID:
        counts = [max(2, c // 2) for c in counts]
    axes = [np.linspace(lo, hi, c) for (lo, hi), c in zip(box, counts)]
    U = np.stack([g.ravel() for g in np.meshgrid(*axes, indexing="ij")], axis=1)
    X = F.value(U)
    keep = region.contains(X) & np.all(np.isfinite(X), axis=1)
    return X[keep], np.zeros(int(keep.sum())), U[keep]


def sample_set(spec, region, density, seed=0, tol=TAU):
    """Sample ``spec`` inside ``region`` at inter-sample spacing ``density``.

    Implicit pieces: jittered grid seeds near the variety are projected by a
    minimum-norm Newton iteration and filtered by the inequalities (strictly)
    and the region.  Parametric pieces: a parameter grid refined to the map's
    largest stretch.  The union is sorted lexicographically and thinned
    greedily so that kept points are pairwise more than ``0.8 * density`` apart.
    """
    h = check_positive(density, "density")
    if region.dim != spec.ambient_dim:
        raise ValueError(f"region dimension {region.dim} != ambient dimension {spec.ambient_dim}")
    pts, labels, res, params = [], [], [], []
    for i, piece in enumerate(spec.pieces):
        rng = _rng(seed, i)
        if isinstance(piece, Implicit):
            X, r, U = _sample_implicit(spec, piece, region, h, rng, tol)
        elif isinstance(piece, Parametric):
            X, r, U = _sample_parametric(spec, piece, region, h, rng)
        else:
            X = piece.points[region.contains(piece.points)]
            r, U = np.zeros(X.shape[0]), None
        pts.append(X)
        labels.append(np.full(X.shape[0], i, dtype=np.int64))
        res.append(r)
        params.append(U)
    P = np.vstack(pts)
    if P.shape[0] == 0:
        raise EmptySample(f"no point of {spec.name!r} found in region {region.to_dict()}")
    width = max(_width(u) for u in params)
    U = np.vstack([_pad(u, x.shape[0], width) for u, x in zip(params, pts)]) if width else None
    L, R = np.concatenate(labels), np.concatenate(res)
    order = canonical_order(P)
    kept = order[thin(P[order], THIN_FACTOR * h)]
    kept = kept[canonical_order(P[kept])]
    return SampleCloud(P[kept], L[kept], R[kept], h, int(seed), None if U is None else U[kept], spec.name)


def _refine_parametric(spec, piece, U0, radius_fn, t, tol, box_slack=1e-12):
    F = spec.param_map(piece)
    box = np.array(piece.box)
    U = U0.copy()
    for _ in range(60):
        X = F.value(U)
        g = radius_fn(X) - t
        if np.all(np.abs(g) <= 0.01 * tol):
            break
        grad = np.einsum("nmk,nm->nk", F.jacobian(U), radius_fn.gradient(X))
        gg = np.einsum("ij,ij->i", grad, grad)
        with np.errstate(all="ignore"):
            U = U - (g / gg)[:, None] * grad
    X = F.value(U)
    ok = np.all(np.isfinite(X), axis=1) & (np.abs(radius_fn(np.nan_to_num(X)) - t) <= tol)
    ok &= np.all((U >= box[:, 0] - box_slack) & (U <= box[:, 1] + box_slack), axis=1)
    return X, U, ok


def sample_link(spec, cloud, radius_fn, t, slice_tol=None, tol=TAU):
    """Sample the level set ``{phi = t}`` of the set behind ``cloud``.

    Cloud points with ``|phi - t| <= slice_tol`` are selected and, when the
    set description is available, pushed onto the level by Newton steps along
    the set.  Refined points are appended to the parent cloud, so the slice
    graph is an induced subgraph of the set graph.  ``spec=None`` (clouds
    produced by transforms) keeps the selection as is.
    """
    t = check_positive(t, "t")
    h = cloud.density_target
    slice_tol = h if slice_tol is None else check_positive(slice_tol, "slice_tol")
    phi = radius_fn(cloud.points)
    selected = np.flatnonzero(np.abs(phi - t) <= slice_tol)
    center = radius_fn.center_of(cloud.dim)
    kind = "general-radius-function" if radius_fn.kind == "table" else "euclidean-sphere-at-p"
    if selected.size == 0:
        raise EmptySlice(f"no sample within {slice_tol:.3g} of level t={t:g}", t)
    if spec is None or not radius_fn.has_gradient:
        return LinkSlice(center, t, kind, selected, np.abs(phi[selected] - t), cloud, slice_tol)

    level_tol = tol * max(1.0, t)
    keep_idx, new_pts, new_lab, new_res, new_par = [], [], [], [], []
    for label in np.unique(cloud.piece_label[selected]):
        sel = selected[cloud.piece_label[selected] == label]
        piece = spec.pieces[int(label)]
        X0 = cloud.points[sel]
        if isinstance(piece, Implicit):
            eq = spec.equalities(piece)

            def value(Y, eq=eq):
                return np.hstack([eq.value(Y), (radius_fn(Y) - t)[:, None]])

            def jac(Y, eq=eq):
                return np.concatenate([eq.jacobian(Y), radius_fn.gradient(Y)[:, None, :]], axis=1)

            def tol_fn(Y, eq=eq):
                return np.hstack([tol * eq.scale(Y), np.full((Y.shape[0], 1), level_tol)])

            X, ok = _newton(value, jac, X0, tol_fn, max_move=2 * slice_tol + h)
            ineq = spec.inequalities(piece)
            if ineq.m:
                ok &= np.all(ineq.value(np.nan_to_num(X)) >= 0, axis=1)
            X = X[ok]
            res = np.max(np.abs(eq.value(X)) / eq.scale(X), axis=1, initial=0.0) if X.size else np.zeros(0)
            U = None
        elif isinstance(piece, Parametric) and cloud.params is not None:
            k = len(piece.box)
            U0 = cloud.params[sel][:, :k]
            X, U, ok = _refine_parametric(spec, piece, U0, radius_fn, t, level_tol)
            X, U = X[ok], U[ok]
            res = np.zeros(X.shape[0])
        else:
            keep_idx.append(sel)
            continue
        new_pts.append(X)
        new_lab.append(np.full(X.shape[0], label, dtype=np.int64))
        new_res.append(res)
        new_par.append(U)

    indices = [np.concatenate(keep_idx)] if keep_idx else []
    if new_pts and sum(p.shape[0] for p in new_pts):
        P = np.vstack(new_pts)
        L = np.concatenate(new_lab)
        R = np.concatenate(new_res)
        width = max(_width(u) for u in new_par)
        U = np.vstack([_pad(u, x.shape[0], width) for u, x in zip(new_par, new_pts)]) if width else None
        order = canonical_order(P)
        kept = order[thin(P[order], 0.5 * h)]
        kept = kept[canonical_order(P[kept])]
        start = len(cloud)
        cloud = cloud.append(P[kept], L[kept], R[kept], None if U is None else U[kept])
        indices.append(np.arange(start, len(cloud)))
    if not indices or sum(i.size for i in indices) == 0:
        raise EmptySlice(f"no refined point reached level t={t:g}", t)
    idx = np.concatenate(indices)
    level = np.abs(radius_fn(cloud.points[idx]) - t)
    good = level <= slice_tol
    idx, level = idx[good], level[good]
    if idx.size == 0:
        raise EmptySlice(f"no refined point reached level t={t:g}", t)
    return LinkSlice(center, t, kind, idx, level, cloud, slice_tol)
