"""Surface tension models, the Wulff construction and droplet shape fits.

The dual-temperature estimator computes two-point correlations of the
Ising model at beta* = 0.5*log(coth beta) with a site-by-site (helical)
transfer matrix on an infinite cylinder whose axis runs along the lattice
direction (k1, k2).  The correlation of two spins a lattice vector N*(k1, k2)
apart decays like exp(-tau * N * |k|); tau is read off a log-linear fit and
extrapolated in the cylinder width.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Optional, Sequence

import numpy as np
from scipy.interpolate import CubicSpline
from scipy.ndimage import distance_transform_edt
from scipy.spatial import ConvexHull, HalfspaceIntersection, cKDTree
from skimage.draw import polygon as raster_polygon
from skimage.measure import points_in_poly

from .sampler import BETA_C
from .skeleton import Polygon, _point_segment_dist, wulff_functional

__all__ = [
    "SurfaceTension",
    "WulffShape",
    "TauEstimate",
    "TauFitError",
    "dual_beta",
    "estimate_tau",
    "axis_tau_closed_form",
    "build_wulff",
    "hausdorff",
    "fit_shape",
    "ShapeFit",
    "rasterize",
]

DEFAULT_DIRECTIONS = ((1, 0), (4, 1), (3, 1), (2, 1), (3, 2), (1, 1))


class TauFitError(RuntimeError):
    """The correlation decay was not clean enough to read off a rate."""


def dual_beta(beta: float) -> float:
    """Dual inverse temperature 0.5*log(coth beta)."""
    if not beta > 0:
        raise ValueError("beta must be positive")
    if beta > 20:
        # coth(b) - 1 ~ 2 exp(-2b); keep precision for large beta
        return 0.5 * math.log1p(2.0 / math.expm1(2.0 * beta))
    return 0.5 * math.log(1.0 / math.tanh(beta))


def axis_tau_closed_form(beta: float) -> float:
    """Exact axis surface tension 2*beta + log(tanh beta), for cross-checks only."""
    return 2.0 * beta + math.log(math.tanh(beta))


# --- helical transfer matrix -------------------------------------------------

def _helix(k1, k2, m):
    """Back offsets (d1, d2) of the two earlier neighbours and the helix data.

    Coordinates j = k.x (axial) and i = (-b, a).x with k1*a + k2*b = 1 are a
    unimodular change of basis; the helix index is h = i + m*j.  The
    solution (a, b) is reduced so that |k2*a - k1*b| <= |k|^2 / 2, which
    keeps the helix circumference close to m*|k|.
    """
    best = None
    kk = k1 * k1 + k2 * k2
    for a in range(-8, 9):
        for b in range(-8, 9):
            if k1 * a + k2 * b != 1 or 2 * abs(k2 * a - k1 * b) > kk:
                continue
            d1, d2 = m * k1 - b, m * k2 + a
            if d1 < 1 or d2 < 1 or d1 == d2:
                continue
            key = (max(d1, d2), abs(a) + abs(b))
            if best is None or key < best[0]:
                best = (key, a, b, d1, d2)
    if best is None:
        raise ValueError(f"no helical embedding for direction ({k1},{k2}) at width {m}")
    _, a, b, d1, d2 = best
    return a, b, d1, d2


def _canonical(direction):
    # tau is invariant under sign flips and the diagonal reflection
    a, b = abs(int(direction[0])), abs(int(direction[1]))
    return max(a, b), min(a, b)


def helix_window(direction, width) -> int:
    k1, k2 = _canonical(direction)
    return max(_helix(k1, k2, width)[2:])


class _HelixTM:
    def __init__(self, K, d1, d2):
        C = max(d1, d2)
        self.C = C
        self.half = 1 << (C - 1)
        s = np.arange(1 << C, dtype=np.int64)
        spin = lambda bit: 2 * ((s >> bit) & 1) - 1
        field_ = spin(d1 - 1) + spin(d2 - 1)
        self.wp = np.exp(K * field_)
        self.wm = np.exp(-K * field_)
        self.spin0 = spin(0).astype(float)

    def step(self, v):
        out = np.empty_like(v)
        o = out.reshape(self.half, 2)
        o[:, 1] = (v * self.wp).reshape(2, self.half).sum(axis=0)
        o[:, 0] = (v * self.wm).reshape(2, self.half).sum(axis=0)
        return out

    def step_t(self, y):
        y2 = y.reshape(self.half, 2)
        return self.wp * np.tile(y2[:, 1], 2) + self.wm * np.tile(y2[:, 0], 2)

    def fixed_point(self, op, tol=1e-14, max_steps=200000):
        v = np.full(1 << self.C, 1.0 / (1 << self.C))
        lam = 0.0
        for t in range(max_steps):
            w = op(v)
            lam_new = w.sum()
            w /= lam_new
            if t % 16 == 0 and np.abs(w - v).max() < tol * np.abs(w).max():
                return w, lam_new
            v = w
            lam = lam_new
        raise TauFitError("transfer matrix power iteration did not converge")


def _correlations(K, direction, width, Ns):
    """log <sigma_0 sigma_{N k}> on a helical cylinder of the given width."""
    k1, k2 = direction
    a, b, d1, d2 = _helix(k1, k2, width)
    tm = _HelixTM(K, d1, d2)
    left, lam = tm.fixed_point(tm.step)
    right, _ = tm.fixed_point(tm.step_t)
    alpha = k2 * a - k1 * b
    per_N = alpha + width * (k1 * k1 + k2 * k2)
    targets = sorted(set(int(N) * per_N for N in Ns))
    base = float(right @ left)
    u = tm.spin0 * left
    log_scale = 0.0
    log_lam = math.log(lam)
    out = {}
    pos = 0
    for D in targets:
        while pos < D:
            u = tm.step(u)
            nrm = np.abs(u).max()
            u /= nrm
            log_scale += math.log(nrm)
            pos += 1
        num = float(right @ (tm.spin0 * u))
        if num <= 0:
            raise TauFitError(f"non-positive correlation at separation {D}")
        out[D] = log_scale + math.log(num) - D * log_lam - math.log(base)
    # axial distance covered by one N step on the (slightly tilted) helix
    kk = k1 * k1 + k2 * k2
    wlen = math.sqrt(width * width * kk + 2 * width * alpha + a * a + b * b)
    axial = (width * kk + alpha) / wlen
    return np.array([N * axial for N in Ns]), np.array([out[int(N) * per_N] for N in Ns])


@dataclass(frozen=True)
class TauEstimate:
    tau: float
    error: float
    per_width: dict
    direction: tuple
    beta: float

    def __float__(self):
        return self.tau


def estimate_tau(beta: float, direction=(1, 0), strip_width=12, lengths=None,
                 widths: Optional[Sequence[int]] = None, max_window: int = 16,
                 min_r2: float = 0.999) -> TauEstimate:
    """Surface tension in lattice direction ``direction`` from dual correlations.

    ``widths`` defaults to every feasible width up to ``strip_width`` whose
    transfer window fits in ``max_window`` bits (largest three kept).  Each
    width gives a rate from a log-linear fit over separations ``lengths``
    (multiples of the direction vector; by default far enough out that a
    single transfer-matrix eigenvalue dominates); the rates are extrapolated
    linearly in 1/width from the two widest strips, with the spread as error
    bar.
    """
    if beta <= BETA_C:
        raise ValueError(f"beta={beta} must exceed beta_c={BETA_C:.6f}")
    given = (int(direction[0]), int(direction[1]))
    k1, k2 = _canonical(direction)
    if math.gcd(k1, k2) != 1:
        raise ValueError("direction must be a primitive lattice vector")
    if strip_width > 12 and widths is None:
        raise ValueError("strip_width is limited to 12")
    K = dual_beta(beta)
    if widths is None:
        widths = [m for m in range(3, strip_width + 1) if helix_window((k1, k2), m) <= max_window][-3:]
    widths = sorted(int(m) for m in widths)
    if not widths or widths[0] < 3:
        raise ValueError("need widths >= 3 that fit the transfer window")
    kn = math.hypot(k1, k2)
    per_width = {}
    for m in widths:
        if lengths is None:
            # past the Ornstein-Zernike crossover: axial distance ~ 2-3 circumference^2
            circ = m * kn
            n_lo = max(1, math.ceil(2.0 * circ * circ / kn))
            n_hi = max(n_lo + 9, math.ceil(3.0 * circ * circ / kn))
            Ns = np.unique(np.linspace(n_lo, n_hi, 10).round().astype(int))
        else:
            Ns = np.array(sorted(set(int(n) for n in lengths)))
        if len(Ns) < 3 or Ns[0] < 1:
            raise ValueError("need at least three positive lengths")
        x, y = _correlations(K, (k1, k2), m, Ns)
        A = np.vstack([x, np.ones_like(x)]).T
        coef, *_ = np.linalg.lstsq(A, y, rcond=None)
        resid = y - A @ coef
        ss = ((y - y.mean()) ** 2).sum()
        r2 = 1.0 - (resid @ resid) / ss if ss > 0 else 0.0
        if r2 < min_r2:
            raise TauFitError(f"decay fit R^2={r2:.5f} below {min_r2} at width {m}")
        per_width[m] = -float(coef[0])
    if len(widths) == 1:
        m = widths[0]
        return TauEstimate(per_width[m], float("nan"), per_width, given, float(beta))
    m1, m2 = widths[-2], widths[-1]
    t1, t2 = per_width[m1], per_width[m2]
    extrap = (m2 * t2 - m1 * t1) / (m2 - m1)
    return TauEstimate(float(extrap), float(abs(extrap - t2)), per_width, given, float(beta))


# --- surface tension models ----------------------------------------------------

@dataclass
class SurfaceTension:
    """tau(theta) for a normal angle theta; pi/2-periodic for lattice models."""

    model: str
    func: Callable = field(repr=False)
    params: dict = field(default_factory=dict)
    grid_size: int = 4096

    def tau(self, theta):
        return self.func(np.asarray(theta, dtype=float))

    __call__ = tau

    @property
    def tau_min(self) -> float:
        th = np.linspace(0, 2 * np.pi, self.grid_size, endpoint=False)
        return float(np.min(self.tau(th)))

    def scaled(self, c: float) -> "SurfaceTension":
        f = self.func
        return SurfaceTension(f"{self.model}*{c:g}", lambda th: c * f(th), dict(self.params), self.grid_size)

    def rotated(self, phi: float) -> "SurfaceTension":
        f = self.func
        return SurfaceTension(f"{self.model}@{phi:g}", lambda th: f(th - phi), dict(self.params), self.grid_size)

    @classmethod
    def constant(cls, tau0: float) -> "SurfaceTension":
        if not tau0 > 0:
            raise ValueError("surface tension must be positive")
        return cls("constant", lambda th: np.full(np.shape(th), float(tau0)), {"tau0": float(tau0)})

    @classmethod
    def tabulated(cls, thetas, values, period: float = 2 * np.pi) -> "SurfaceTension":
        """Periodic cubic spline through (theta, tau) samples on [0, period)."""
        th = np.mod(np.asarray(thetas, dtype=float), period)
        val = np.asarray(values, dtype=float)
        order = np.argsort(th)
        th, val = th[order], val[order]
        if np.any(val <= 0):
            raise ValueError("surface tension must be positive")
        spline = CubicSpline(np.append(th, th[0] + period), np.append(val, val[0]), bc_type="periodic")
        st = cls("tabulated", lambda x: spline(np.mod(x - th[0], period) + th[0]),
                 {"thetas": th.tolist(), "values": val.tolist(), "period": period})
        if st.tau_min <= 0:
            raise ValueError("interpolated surface tension is not positive")
        return st

    @classmethod
    def dual_estimated(cls, beta: float, directions=DEFAULT_DIRECTIONS, strip_width: int = 12,
                       **kwargs) -> "SurfaceTension":
        """Transfer-matrix estimates on directions in [0, pi/4], mirrored and splined.

        Uses the lattice symmetries: reflection in the diagonal maps angle t
        to pi/2 - t, and the pi/2 rotation makes the result pi/2-periodic.
        """
        ests = [estimate_tau(beta, d, strip_width=strip_width, **kwargs) for d in directions]
        pts = {}
        for e in ests:
            t = math.atan2(e.direction[1], e.direction[0])
            pts[round(t, 12)] = e.tau
            pts[round(np.pi / 2 - t, 12)] = e.tau
        pts.pop(round(np.pi / 2, 12), None)
        th = np.array(sorted(pts))
        st = cls.tabulated(th, [pts[t] for t in th], period=np.pi / 2)
        st.model = "dual_estimated"
        st.params.update(beta=float(beta), estimates=[
            {"direction": list(e.direction), "tau": e.tau, "error": e.error} for e in ests
        ])
        return st

    def to_csv(self, path, n: int = 360) -> None:
        th = np.linspace(0, 2 * np.pi, n, endpoint=False)
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["theta", "tau"])
            for t, v in zip(th, self.tau(th)):
                w.writerow([repr(float(t)), repr(float(v))])

    @classmethod
    def from_csv(cls, path) -> "SurfaceTension":
        with open(path, newline="") as fh:
            rows = list(csv.DictReader(fh))
        return cls.tabulated([float(r["theta"]) for r in rows], [float(r["tau"]) for r in rows])


# --- Wulff shape -----------------------------------------------------------------

@dataclass
class WulffShape:
    polygon: Polygon
    w1: float
    tau_ref: SurfaceTension
    n_directions: int

    @property
    def area(self) -> float:
        return abs(self.polygon.signed_area)

    @property
    def diameter(self) -> float:
        v = self.polygon.vertices
        return float(np.sqrt(((v[:, None] - v[None]) ** 2).sum(-1)).max())

    def scaled(self, factor: float, shift=(0.0, 0.0)) -> Polygon:
        return Polygon(self.polygon.vertices * factor + np.asarray(shift, dtype=float))

    def to_json(self) -> str:
        return json.dumps({"vertices": self.polygon.vertices.tolist(), "w1": self.w1,
                           "n_directions": self.n_directions, "tau_model": self.tau_ref.model})

    def save(self, path) -> None:
        Path(path).write_text(self.to_json() + "\n")


def build_wulff(tau: SurfaceTension, n_directions: int = 4096) -> WulffShape:
    """Intersect the half-planes r.n(theta) <= tau(theta); rescale to unit area."""
    if n_directions < 8 or n_directions % 4:
        raise ValueError("n_directions must be a multiple of 4 and at least 8")
    th = 2 * np.pi * np.arange(n_directions) / n_directions
    tv = np.asarray(tau.tau(th), dtype=float)
    if np.any(tv <= 0) or not np.all(np.isfinite(tv)):
        raise ValueError("surface tension must be positive and finite")
    halfspaces = np.column_stack([np.cos(th), np.sin(th), -tv])
    hs = HalfspaceIntersection(halfspaces, np.zeros(2))
    pts = hs.intersections
    hull = ConvexHull(pts)
    V = pts[hull.vertices]
    area = hull.volume
    V = V / math.sqrt(area)
    poly = Polygon(V)
    w1 = wulff_functional(poly, tau)
    return WulffShape(poly, float(w1), tau, int(n_directions))


# --- Hausdorff distances ---------------------------------------------------------

def _is_convex(P: Polygon) -> bool:
    V = P.vertices
    if len(V) < 3:
        return True
    d1 = np.roll(V, -1, axis=0) - V
    d2 = np.roll(d1, -1, axis=0)
    cr = d1[:, 0] * d2[:, 1] - d1[:, 1] * d2[:, 0]
    return bool(np.all(cr >= -1e-12) or np.all(cr <= 1e-12))


def _dist_to_region(X, P: Polygon):
    """Distance from points to a filled polygon (zero inside)."""
    a, b = P.edges
    d = _point_segment_dist(np.asarray(X, dtype=float), a, b).min(axis=1)
    if len(P.vertices) >= 3:
        inside = points_in_poly(np.asarray(X, dtype=float), P.vertices)
        d = np.where(inside, 0.0, d)
    return d


def _samples(P: Polygon, h: float):
    V = P.vertices
    a, b = P.edges
    pts = [V]
    for p, q in zip(a, b):
        n = max(1, int(math.ceil(np.linalg.norm(q - p) / h)))
        t = np.linspace(0, 1, n, endpoint=False)[:, None]
        pts.append(p + t * (q - p))
    lo, hi = V.min(axis=0), V.max(axis=0)
    gx = np.arange(lo[0], hi[0] + h, h)
    gy = np.arange(lo[1], hi[1] + h, h)
    G = np.array(np.meshgrid(gx, gy, indexing="ij")).reshape(2, -1).T
    if len(V) >= 3 and len(G):
        pts.append(G[points_in_poly(G, V)])
    return np.concatenate(pts)


def _directed(A, B, h):
    if isinstance(B, Polygon):
        if isinstance(A, Polygon):
            # the distance to a convex set is convex: its max over A sits on a vertex
            X = A.vertices if _is_convex(B) else _samples(A, h)
        else:
            X = A
        return float(_dist_to_region(X, B).max())
    X = _samples(A, h) if isinstance(A, Polygon) else A
    d, _ = cKDTree(B).query(X)
    return float(d.max())


def hausdorff(A, B, resolution: float = 1e-3) -> float:
    """Symmetric Hausdorff distance between point sets and/or filled polygons.

    Point sets are (k, 2) arrays.  Polygons stand for their closed filled
    region.  The computation is exact except for a supremum taken over a
    polygon against a point set or a non-convex polygon, which is sampled
    with spacing ``resolution`` (a lower bound within that spacing).
    """
    def norm(X):
        if isinstance(X, Polygon):
            return X
        X = np.asarray(X, dtype=float).reshape(-1, 2)
        if X.size == 0:
            raise ValueError("Hausdorff distance of an empty set")
        return X

    A, B = norm(A), norm(B)
    return max(_directed(A, B, resolution), _directed(B, A, resolution))


# --- shape fitting -----------------------------------------------------------------

def _raster_convex(V, shape=None):
    """Sites of a convex polygon by row intervals: O(rows x edges) instead of O(box x edges)."""
    A, B = V, np.roll(V, -1, axis=0)
    r0 = int(math.ceil(V[:, 0].min() - 1e-9))
    r1 = int(math.floor(V[:, 0].max() + 1e-9))
    if shape is not None:
        r0, r1 = max(r0, 0), min(r1, shape[0] - 1)
    if r1 < r0:
        return np.empty((0, 2), dtype=np.int64)
    rows = np.arange(r0, r1 + 1, dtype=float)[:, None]
    dx = B[:, 0] - A[:, 0]
    with np.errstate(divide="ignore", invalid="ignore"):
        t = (rows - A[:, 0]) / dx
    hit = (t >= 0) & (t <= 1) & (dx != 0)
    y = A[:, 1] + np.where(hit, t, 0.0) * (B[:, 1] - A[:, 1])
    lo = np.ceil(np.where(hit, y, np.inf).min(axis=1) - 1e-9).astype(np.int64)
    hi = np.floor(np.where(hit, y, -np.inf).max(axis=1) + 1e-9).astype(np.int64)
    if shape is not None:
        lo, hi = np.maximum(lo, 0), np.minimum(hi, shape[1] - 1)
    count = np.maximum(hi - lo + 1, 0)
    rr = np.repeat(np.arange(r0, r1 + 1, dtype=np.int64), count)
    start = np.repeat(lo - np.concatenate([[0], np.cumsum(count)[:-1]]), count)
    cc = start + np.arange(count.sum(), dtype=np.int64)
    return np.column_stack([rr, cc])


def rasterize(P: Polygon, shape=None):
    """Lattice sites (row, col) whose centres lie in the filled polygon."""
    V = P.vertices
    if len(V) >= 3 and _is_convex(P):
        return _raster_convex(V, shape)
    rr, cc = raster_polygon(V[:, 0], V[:, 1], shape=shape)
    return np.column_stack([rr, cc])


def _decimate(V, max_vertices):
    """Every k-th vertex, so that at most ``max_vertices`` remain (an inscribed polygon)."""
    k = max(1, int(math.ceil(len(V) / max_vertices)))
    return V[::k]


def _dist_to_convex(X, A, B, normals, offsets):
    """Distance from points to a filled convex polygon with edges A->B and outward half-planes."""
    inside = np.all(X @ normals.T <= offsets + 1e-12, axis=1)
    d = _point_segment_dist(X, A, B).min(axis=1)
    return np.where(inside, 0.0, d)


@dataclass(frozen=True)
class ShapeFit:
    best_distance: float
    best_shift: tuple
    evaluations: int


def _region_sites(region):
    R = np.asarray(region)
    if R.dtype == bool:
        R = np.argwhere(R)
    R = R.reshape(-1, 2).astype(np.int64)
    if R.size == 0:
        raise ValueError("region is empty")
    return R


def _hull_points(R):
    """Vertices of the convex hull of a site set (all sites when degenerate)."""
    if len(R) < 3:
        return R.astype(float)
    try:
        return R[ConvexHull(R).vertices].astype(float)
    except Exception:  # collinear sites: qhull refuses, every site is extreme enough
        return R.astype(float)


def fit_shape(region, W: WulffShape, grid_steps: int = 8, rel_tol: float = 1e-3,
              max_vertices: int = 256) -> ShapeFit:
    """Minimize over shifts z the Hausdorff distance between a site set and z + sqrt|V| W.

    Distances are taken at lattice resolution.  From the shape to the
    region: the scaled Wulff polygon is rasterized to the sites whose
    centres it contains (at least the site nearest its centre) and looked
    up in a distance transform of the region.  From the region to the
    shape: the distance to a convex set is convex, so its maximum over the
    sites is attained at a vertex of their convex hull.  Coarse grid over
    centroid +- diam/4 with ``grid_steps`` points per side, then a compass
    pattern search down to ``rel_tol * sqrt|V|``.  The returned distance is attained, so
    it bounds the infimum from above.  The Wulff polygon is thinned to at
    most ``max_vertices`` (inscribed, relative error about (pi/max_vertices)^2/2).
    """
    R = _region_sites(region)
    n = len(R)
    scale = math.sqrt(n)
    base = _decimate(W.polygon.vertices, max_vertices) * scale
    A0, B0 = base, np.roll(base, -1, axis=0)
    e = B0 - A0
    orient = 1.0 if (A0[:, 0] * B0[:, 1] - A0[:, 1] * B0[:, 0]).sum() > 0 else -1.0
    normals = orient * np.column_stack([e[:, 1], -e[:, 0]])
    offsets0 = (normals * A0).sum(axis=1)
    extent = base.max(axis=0) - base.min(axis=0)
    H = _hull_points(R)
    span = float(np.sqrt(((H[:, None] - H[None]) ** 2).sum(-1)).max()) if len(H) > 1 else 0.0
    diam = max(span, W.diameter * scale, 1.0)
    centroid = R.mean(axis=0)
    pad = int(math.ceil(diam / 4 + extent.max() + 3))
    origin = R.min(axis=0) - pad
    size = tuple(int(v) for v in (R.max(axis=0) - origin + pad + 1))
    Rl = R - origin
    region_mask = np.zeros(size, dtype=bool)
    region_mask[Rl[:, 0], Rl[:, 1]] = True
    dist_to_region = distance_transform_edt(~region_mask)
    evals = 0

    def cost(z):
        nonlocal evals
        evals += 1
        z = np.asarray(z, dtype=float)
        verts = base + (z - origin)
        S = _raster_convex(verts, size)
        if len(S) == 0:
            S = np.clip(np.round(verts.mean(axis=0)).astype(int), 0, np.array(size) - 1)[None]
        d1 = dist_to_region[S[:, 0], S[:, 1]].max()
        d2 = _dist_to_convex(H - z, A0, B0, normals, offsets0).max()
        return float(max(d1, d2))

    step = diam / (4 * grid_steps)
    offs = np.arange(-grid_steps, grid_steps + 1) * step
    best = (math.inf, centroid)
    for dx in offs:
        for dy in offs:
            z = centroid + (dx, dy)
            c = cost(z)
            if c < best[0] - 1e-12:
                best = (c, z)
    h = step / 2
    tol = rel_tol * scale
    while h > tol:
        moved = False
        for d in ((h, 0), (-h, 0), (0, h), (0, -h)):
            z = best[1] + d
            c = cost(z)
            if c < best[0] - 1e-12:
                best = (c, z)
                moved = True
        if not moved:
            h /= 2
    return ShapeFit(best[0], (float(best[1][0]), float(best[1][1])), evals)
