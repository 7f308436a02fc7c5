"""Coarse-grained skeletons of large contours and polygon geometry.

Points live in the plane with ordinary (undoubled) coordinates, the same
(row, col) frame as ``Contour.points``; dual-lattice points therefore have
half-integer coordinates.  Contours are treated as polylines through their
dual vertices.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, List, Sequence

import numpy as np
from scipy.spatial import cKDTree

from .contour import Contour

__all__ = [
    "Skeleton",
    "Polygon",
    "SkeletonError",
    "build_skeleton",
    "check_compatible",
    "order_compatible",
    "passage_indices",
    "hausdorff_polylines",
    "polygon_of",
    "winding_region",
    "wulff_functional",
    "skeleton_record",
    "skeleton_from_record",
]

TOL = 1e-9


class SkeletonError(ValueError):
    """Invalid skeleton or an impossible construction request."""


@dataclass(eq=False)
class Skeleton:
    """Cyclic sequence of points with consecutive gaps in [scale, 2*scale]."""

    points: np.ndarray
    scale: float

    def __post_init__(self):
        self.points = np.asarray(self.points, dtype=float).reshape(-1, 2)
        if self.points.shape[0] < 2:
            raise SkeletonError("a skeleton needs at least two points")
        if not self.scale > 0:
            raise SkeletonError("scale must be positive")
        g = self.gaps()
        if g.min() < self.scale - TOL or g.max() > 2 * self.scale + TOL:
            raise SkeletonError(
                f"gaps {g.min():.4g}..{g.max():.4g} outside [{self.scale:.4g}, {2 * self.scale:.4g}]"
            )

    def __len__(self):
        return self.points.shape[0]

    def gaps(self) -> np.ndarray:
        """Cyclic gaps; a two-point skeleton has its single gap listed twice."""
        return np.linalg.norm(np.roll(self.points, -1, axis=0) - self.points, axis=1)

    def translated(self, shift) -> "Skeleton":
        return Skeleton(self.points + np.asarray(shift, dtype=float), self.scale)

    def reversed(self) -> "Skeleton":
        return Skeleton(self.points[::-1].copy(), self.scale)


@dataclass(eq=False)
class Polygon:
    """Closed polygonal curve; may be degenerate or self-intersecting."""

    vertices: np.ndarray

    def __post_init__(self):
        self.vertices = np.asarray(self.vertices, dtype=float).reshape(-1, 2)
        if self.vertices.shape[0] < 2:
            raise ValueError("a polygon needs at least two vertices")
        if not self.length > 0:
            raise ValueError("polygon has zero length")

    @property
    def edges(self):
        """(start, end) arrays of the closed edge list."""
        return self.vertices, np.roll(self.vertices, -1, axis=0)

    @property
    def length(self) -> float:
        a, b = self.edges
        return float(np.linalg.norm(b - a, axis=1).sum())

    @property
    def signed_area(self) -> float:
        a, b = self.edges
        return 0.5 * float((a[:, 0] * b[:, 1] - b[:, 0] * a[:, 1]).sum())


# --- distances ---------------------------------------------------------------

def _point_segment_dist(X, A, B):
    """(m, k) distances from points X to segments [A_k, B_k]."""
    d = B - A
    dd = (d * d).sum(axis=1)
    safe = np.where(dd > 0, dd, 1.0)
    rel = X[:, None, :] - A[None, :, :]
    t = np.clip((rel * d[None]).sum(axis=2) / safe, 0.0, 1.0)
    t = np.where(dd > 0, t, 0.0)
    diff = rel - t[..., None] * d[None]
    return np.sqrt((diff * diff).sum(axis=2))


def _dist_to(X, A, B):
    return _point_segment_dist(X, A, B).min(axis=1)


class _Segments:
    """Exact point-to-polyline distance with a midpoint KD-tree prefilter.

    A segment of half-length h whose midpoint is at distance r from x is at
    distance >= r - h, so only midpoints within (nearest-midpoint distance
    + h_max) can hold the minimum.
    """

    def __init__(self, A, B):
        self.A = np.asarray(A, dtype=float)
        self.B = np.asarray(B, dtype=float)
        self.half = float(np.linalg.norm(self.B - self.A, axis=1).max()) / 2
        self.tree = cKDTree((self.A + self.B) / 2) if len(self.A) > 32 else None

    def dist(self, X):
        X = np.asarray(X, dtype=float).reshape(-1, 2)
        if self.tree is None or len(X) == 0:
            return _dist_to(X, self.A, self.B)
        d0, _ = self.tree.query(X)
        cand = self.tree.query_ball_point(X, d0 + self.half + 1e-9)
        rows = np.repeat(np.arange(len(X)), [len(c) for c in cand])
        cols = np.fromiter((j for c in cand for j in c), dtype=np.int64, count=len(rows))
        A, B = self.A[cols], self.B[cols]
        d = B - A
        dd = (d * d).sum(axis=1)
        rel = X[rows] - A
        t = np.clip((rel * d).sum(axis=1) / np.where(dd > 0, dd, 1.0), 0.0, 1.0)
        diff = rel - t[:, None] * d
        dist = np.sqrt((diff * diff).sum(axis=1))
        out = np.full(len(X), np.inf)
        np.minimum.at(out, rows, dist)
        return out

    def span_bound(self, p, q):
        """Upper bound of the distance over each segment [p_i, q_i].

        Distance to one fixed segment is convex along [p, q], so it is at
        most the larger endpoint value; any subset of segments gives a bound.
        """
        if self.tree is None:
            D = np.maximum(_point_segment_dist(p, self.A, self.B), _point_segment_dist(q, self.A, self.B))
            return D.min(axis=1)
        k = min(8, len(self.A))
        _, idx = self.tree.query((p + q) / 2, k=k)
        A, B = self.A[idx], self.B[idx]
        d = B - A
        dd = np.where((d * d).sum(axis=2) > 0, (d * d).sum(axis=2), 1.0)

        def dist(X):
            rel = X[:, None, :] - A
            t = np.clip((rel * d).sum(axis=2) / dd, 0.0, 1.0)
            diff = rel - t[..., None] * d
            return np.sqrt((diff * diff).sum(axis=2))

        return np.maximum(dist(p), dist(q)).min(axis=1)


def _directed_within(P, Q, r, max_depth=60):
    """Whether every point of closed polyline P is within r of polyline Q.

    Branch and bound: on a segment [p, q] the distance to Q is 1-Lipschitz,
    so its maximum is at most (f(p) + f(q) + |q - p|) / 2.
    """
    Q = Q if isinstance(Q, _Segments) else _Segments(*Q)
    p = P
    q = np.roll(P, -1, axis=0)
    fp = Q.dist(p)
    if fp.max() > r + TOL:
        return False
    fq = np.roll(fp, -1)
    for _ in range(max_depth):
        seg = np.linalg.norm(q - p, axis=1)
        open_ = (fp + fq + seg) / 2 > r + TOL
        if open_.any():
            open_[open_] = Q.span_bound(p[open_], q[open_]) > r + TOL
        if not open_.any():
            return True
        p, q, fp, fq = p[open_], q[open_], fp[open_], fq[open_]
        mid = (p + q) / 2
        fm = Q.dist(mid)
        if fm.max() > r + TOL:
            return False
        p = np.concatenate([p, mid])
        q = np.concatenate([mid, q])
        fp, fq = np.concatenate([fp, fm]), np.concatenate([fm, fq])
    return True


def _directed_sup(P, Q, max_depth=50):
    """sup over closed polyline P of the distance to polyline Q (to ~1e-9)."""
    Q = Q if isinstance(Q, _Segments) else _Segments(*Q)
    p = P
    q = np.roll(P, -1, axis=0)
    fp = Q.dist(p)
    fq = np.roll(fp, -1)
    best = float(fp.max())
    for _ in range(max_depth):
        seg = np.linalg.norm(q - p, axis=1)
        open_ = (fp + fq + seg) / 2 > best + TOL
        if open_.any():
            open_[open_] = Q.span_bound(p[open_], q[open_]) > best + TOL
        if not open_.any():
            break
        p, q, fp, fq = p[open_], q[open_], fp[open_], fq[open_]
        mid = (p + q) / 2
        fm = Q.dist(mid)
        best = max(best, float(fm.max()))
        p = np.concatenate([p, mid])
        q = np.concatenate([mid, q])
        fp, fq = np.concatenate([fp, fm]), np.concatenate([fm, fq])
    return best


def _closed_edges(V):
    return V, np.roll(V, -1, axis=0)


def hausdorff_polylines(P, Q) -> float:
    """Hausdorff distance between two closed polylines given by vertex arrays."""
    P = np.asarray(P, dtype=float)
    Q = np.asarray(Q, dtype=float)
    return max(_directed_sup(P, _closed_edges(Q)), _directed_sup(Q, _closed_edges(P)))


# --- construction --------------------------------------------------------------

def _piece_ok(V, i, j, s):
    """Edge from vertex i to vertex j (cyclic, j may exceed len) is admissible."""
    n = len(V)
    a, b = V[i % n], V[j % n]
    gap = math.dist(a, b)
    if gap < s - TOL or gap > 2 * s + TOL:
        return False
    idx = np.arange(i, j + 1) % n
    # distance to a segment is convex, so unit bonds need only their endpoints
    return bool(_dist_to(V[idx], a[None], b[None]).max() <= s + TOL)


def _close_by_search(V, fixed, s):
    """Shortest admissible index path from fixed[-1] to len(V) (the start)."""
    n = len(V)
    src = fixed[-1]
    prev = {src: None}
    frontier = [src]
    while frontier:
        nxt = []
        for i in frontier:
            d = np.linalg.norm(V[np.arange(i + 1, n + 1) % n] - V[i], axis=1)
            for off in np.flatnonzero((d >= s - TOL) & (d <= 2 * s + TOL)):
                j = i + 1 + int(off)
                if j in prev or not _piece_ok(V, i, j, s):
                    continue
                prev[j] = i
                if j == n:
                    path = []
                    while j is not None:
                        path.append(j)
                        j = prev[j]
                    return fixed[:-1] + path[::-1][:-1]
                nxt.append(j)
        frontier = nxt
    return None


def build_skeleton(gamma: Contour, s: float) -> Skeleton:
    """Greedy s-skeleton of a contour.

    Starting from a vertex that has some vertex at distance >= s, walk the
    contour and take the first vertex at distance >= s from the last chosen
    point.  When the closing gap ends up shorter than s, the last point is
    dropped; if the resulting closure is still inadmissible the tail is
    re-chosen by a breadth-first search over admissible vertex-to-vertex
    edges.
    """
    if s < 1:
        raise SkeletonError("skeleton scale must be at least 1 (one lattice spacing)")
    if gamma.diameter < s - TOL:
        raise SkeletonError(f"contour diameter {gamma.diameter:.4g} is below s={s}")
    V0 = gamma.points
    n = len(V0)
    start = 0
    for t in range(n):
        if np.linalg.norm(V0 - V0[t], axis=1).max() >= s - TOL:
            start = t
            break
    V = np.roll(V0, -start, axis=0)
    idx = [0]
    cur = 0
    closed = False
    for t in range(1, n + 1):
        if math.dist(V[t % n], V[cur]) >= s - TOL:
            if t == n:
                closed = True
                break
            idx.append(t)
            cur = t
    if not closed and len(idx) > 1:
        idx.pop()
    ok = len(idx) >= 2 and all(
        _piece_ok(V, a, b, s) for a, b in zip(idx, idx[1:] + [n])
    )
    if not ok:
        sol = None
        for back in range(1, len(idx) + 1):
            sol = _close_by_search(V, idx[: len(idx) - back + 1], s)
            if sol is not None and len(sol) >= 2:
                break
            sol = None
        if sol is None:
            raise SkeletonError("no admissible skeleton found")
        idx = sol
    return Skeleton(V[np.array(idx)], s)


# --- compatibility ---------------------------------------------------------------

def passage_indices(gamma: Contour, S: Skeleton):
    """Vertex indices where ``gamma`` meets the skeleton points in cyclic order.

    Returns the earliest matching index list (first entry is where the walk
    starts), or None when the points are not met in order.
    """
    V = gamma.vertices
    n = len(V)
    doubled = 2.0 * S.points
    if np.any(np.abs(doubled - np.round(doubled)) > 1e-9):
        return None
    doubled = np.round(doubled).astype(np.int64)
    occ = []
    for p in doubled:
        hits = np.flatnonzero((V[:, 0] == p[0]) & (V[:, 1] == p[1]))
        if hits.size == 0:
            return None
        occ.append(hits)
    for first in occ[0]:
        pos = 0
        out = [int(first)]
        for hits in occ[1:]:
            rel = (hits - first) % n
            later = rel[rel > pos]
            if later.size == 0:
                break
            pos = int(later.min())
            out.append(int((first + pos) % n))
        else:
            return out
    return None


def order_compatible(gamma: Contour, S: Skeleton) -> bool:
    """Skeleton points are contour vertices met in the same cyclic order."""
    return passage_indices(gamma, S) is not None


def check_compatible(gamma: Contour, S: Skeleton) -> bool:
    """Ordered passage through the skeleton points and Hausdorff distance <= s."""
    if not order_compatible(gamma, S):
        return False
    G = gamma.points.astype(float)
    P = S.points
    r = S.scale
    return _directed_within(G, _closed_edges(P), r) and _directed_within(P, _closed_edges(G), r)


# --- polygons ----------------------------------------------------------------------

def polygon_of(S: Skeleton) -> Polygon:
    return Polygon(S.points.copy())


def _is_half_integer(V) -> bool:
    d = 2.0 * np.asarray(V)
    return bool(np.all(np.abs(d - np.round(d)) < 1e-12) and np.all(np.abs(d) < 2 ** 40))


def winding_region(polygons: Iterable[Polygon]) -> float:
    """Area of the set of points with odd crossing parity w.r.t. all polygons.

    Vertical slab decomposition: between consecutive breakpoints (vertex
    abscissae and pairwise edge intersections) the edges are ordered, and
    the odd-parity region is the union of trapezoids between edge pairs.
    Arithmetic is exact in rationals for half-integer vertices.
    """
    polys = [p if isinstance(p, Polygon) else Polygon(p) for p in polygons]
    if not polys:
        return 0.0
    exact = all(_is_half_integer(p.vertices) for p in polys) and sum(len(p.vertices) for p in polys) <= 400
    num = (lambda v: Fraction(int(round(2 * v)), 2)) if exact else float
    edges = []
    for p in polys:
        a, b = p.edges
        for (x1, y1), (x2, y2) in zip(a.tolist(), b.tolist()):
            x1, y1, x2, y2 = num(x1), num(y1), num(x2), num(y2)
            if x1 == x2:
                continue
            if x1 > x2:
                x1, y1, x2, y2 = x2, y2, x1, y1
            edges.append((x1, y1, x2, y2))
    if not edges:
        return 0.0
    xs = {e[0] for e in edges} | {e[2] for e in edges}
    for k in range(len(edges)):
        x1, y1, x2, y2 = edges[k]
        for m in range(k + 1, len(edges)):
            u1, v1, u2, v2 = edges[m]
            lo, hi = max(x1, u1), min(x2, u2)
            if lo >= hi:
                continue
            # difference of the two lines over the shared x-range
            sa = (y2 - y1) / (x2 - x1)
            sb = (v2 - v1) / (u2 - u1)
            if sa == sb:
                continue
            x = (v1 - sb * u1 - y1 + sa * x1) / (sa - sb)
            if lo < x < hi:
                xs.add(x)
    xs = sorted(xs)
    total = 0
    for xl, xr in zip(xs, xs[1:]):
        xm = (xl + xr) / 2
        span = []
        for x1, y1, x2, y2 in edges:
            if x1 <= xl and x2 >= xr:
                sl = (y2 - y1) / (x2 - x1)
                span.append((y1 + sl * (xm - x1), y1 + sl * (xl - x1), y1 + sl * (xr - x1)))
        span.sort()
        for k in range(0, len(span) - 1, 2):
            lo_e, hi_e = span[k], span[k + 1]
            total += (xr - xl) * ((hi_e[1] - lo_e[1]) + (hi_e[2] - lo_e[2])) / 2
    return float(total)


def _tau_values(tau, theta):
    f = tau.tau if hasattr(tau, "tau") else tau
    if callable(f):
        return np.asarray(f(theta), dtype=float) * np.ones_like(theta)
    return np.full_like(theta, float(f))


def wulff_functional(P, tau) -> float:
    """Sum over edges of tau(normal angle) times edge length.

    ``P`` is a Polygon, a Skeleton, or an iterable of them; ``tau`` is a
    SurfaceTension, a callable of the angle, or a constant.  Only the normal
    line matters because tau(theta + pi) = tau(theta).
    """
    if isinstance(P, (Polygon, Skeleton)):
        P = [P]
    total = 0.0
    for item in P:
        poly = polygon_of(item) if isinstance(item, Skeleton) else item
        a, b = poly.edges
        d = b - a
        ln = np.hypot(d[:, 0], d[:, 1])
        keep = ln > 0
        theta = np.mod(np.arctan2(d[keep, 1], d[keep, 0]) - np.pi / 2, 2 * np.pi)
        tv = _tau_values(tau, theta)
        if np.any(tv <= 0):
            raise ValueError("surface tension must be strictly positive")
        total += float(tv @ ln[keep])
    return total


def skeleton_record(S: Skeleton) -> dict:
    return {"points": S.points.tolist(), "scale": S.scale}


def skeleton_from_record(rec) -> Skeleton:
    if isinstance(rec, str):
        rec = json.loads(rec)
    return Skeleton(np.array(rec["points"], dtype=float), float(rec["scale"]))
