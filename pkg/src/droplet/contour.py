"""Peierls contours: extraction with the south-east/north-west rounding rule
and per-contour geometry.

Contour vertices are dual-lattice points in doubled integer coordinates: the
dual site between rows i, i+1 and columns j, j+1 is ``(2i+1, 2j+1)``.  Rows
grow southward and columns eastward.  At a dual vertex where four bonds
meet, the southern arm is joined to the eastern one and the northern arm to
the western one, which cuts off the north-west and south-east sites.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import List, Optional

import numpy as np

from . import _kernels
from .lattice import Boundary, SpinGrid

__all__ = [
    "Contour",
    "ContourSet",
    "extract_contours",
    "external_contours",
    "contour_metrics",
    "s_large",
    "interior_magnetization",
    "parity_minus_set",
    "is_closed_and_simple",
    "contours_from_key",
    "contour_from_sites",
    "bond_set",
    "contour_record",
]


@dataclass(eq=False)
class Contour:
    vertices: np.ndarray
    diam2: int
    external: Optional[bool] = None

    def __post_init__(self):
        self.vertices = np.asarray(self.vertices, dtype=np.int64)

    def __eq__(self, other):
        return isinstance(other, Contour) and np.array_equal(self.vertices, other.vertices)

    def __hash__(self):
        return hash(self.vertices.tobytes())

    def __len__(self):
        return self.length

    @property
    def length(self) -> int:
        """Number of dual bonds."""
        return int(self.vertices.shape[0])

    @property
    def diameter(self) -> float:
        return math.sqrt(self.diam2) / 2.0

    @property
    def points(self) -> np.ndarray:
        """Vertices in ordinary (undoubled) coordinates."""
        return self.vertices / 2.0

    @cached_property
    def signed_area(self) -> float:
        v = self.vertices
        w = np.roll(v, -1, axis=0)
        return float((v[:, 0] * w[:, 1] - w[:, 0] * v[:, 1]).sum()) / 8.0

    @cached_property
    def _mask(self):
        v = self.vertices
        w = np.roll(v, -1, axis=0)
        horiz = v[:, 0] == w[:, 0]
        a = (v[horiz, 0] + 1) // 2
        b = (np.minimum(v[horiz, 1], w[horiz, 1]) + 1) // 2
        a0, b0 = int(a.min()), int(b.min())
        toggles = np.zeros((int(a.max()) - a0 + 1, int(b.max()) - b0 + 1), dtype=np.int64)
        np.add.at(toggles, (a - a0, b - b0), 1)
        mask = (np.cumsum(toggles, axis=0)[:-1] % 2).astype(bool)
        return (a0, b0), mask

    def interior_mask(self):
        """``((row0, col0), mask)``: interior sites inside a bounding box."""
        return self._mask

    @property
    def interior_area(self) -> int:
        return int(self._mask[1].sum())

    @cached_property
    def interior_sites(self) -> np.ndarray:
        """(k, 2) array of interior lattice sites (row, col), row-major order."""
        (a0, b0), mask = self._mask
        idx = np.argwhere(mask)
        return idx + np.array([a0, b0])

    def site_set(self) -> frozenset:
        return frozenset(map(tuple, self.interior_sites.tolist()))

    def contains_site(self, i: int, j: int) -> bool:
        (a0, b0), mask = self._mask
        r, c = i - a0, j - b0
        return 0 <= r < mask.shape[0] and 0 <= c < mask.shape[1] and bool(mask[r, c])

    @cached_property
    def bbox(self):
        """Site bounding box (rmin, rmax, cmin, cmax) of the interior, inclusive."""
        v = self.vertices
        return (int(v[:, 0].min() + 1) // 2, int(v[:, 0].max() - 1) // 2,
                int(v[:, 1].min() + 1) // 2, int(v[:, 1].max() - 1) // 2)


@dataclass
class ContourSet:
    contours: List[Contour]
    side: int
    boundary: Boundary = Boundary.PLUS
    _external_done: bool = field(default=False, repr=False)

    def __iter__(self):
        return iter(self.contours)

    def __len__(self):
        return len(self.contours)

    def __getitem__(self, i):
        return self.contours[i]

    def derived(self, contours) -> "ContourSet":
        return ContourSet(list(contours), self.side, self.boundary, self._external_done)


def _trace(hb: np.ndarray, vb: np.ndarray) -> List[Contour]:
    nb = int(hb.sum() + vb.sum())
    verts = np.empty((max(nb, 1), 2), dtype=np.int64)
    starts = np.empty(nb + 2, dtype=np.int64)
    diam2 = np.empty(nb + 1, dtype=np.int64)
    nc = _kernels.trace_kernel(hb, vb, verts, starts, diam2)
    return [Contour(verts[starts[c]:starts[c + 1]].copy(), int(diam2[c])) for c in range(nc)]


def bond_set(grid: SpinGrid):
    """Dual bond indicator arrays (hb, vb); see ``_kernels.bonds_from_padded``."""
    return _kernels.bonds_from_padded(grid.padded())


def extract_contours(grid: SpinGrid, mark_external: bool = True) -> ContourSet:
    """All Peierls contours of a plus- or minus-boundary grid."""
    if grid.boundary is Boundary.FREE:
        raise ValueError("contours are only defined for plus or minus boundary conditions")
    hb, vb = bond_set(grid)
    cs = ContourSet(_trace(hb, vb), grid.side, grid.boundary)
    if mark_external:
        _mark_external(cs)
    return cs


def _mark_external(cs: ContourSet) -> None:
    cons = cs.contours
    if not cons:
        cs._external_done = True
        return
    box = np.array([c.bbox for c in cons])
    # larger area first: only a contour with a bigger box can contain another
    for k, c in enumerate(cons):
        r0, r1, c0, c1 = box[k]
        cand = np.flatnonzero(
            (box[:, 0] <= r0) & (box[:, 1] >= r1) & (box[:, 2] <= c0) & (box[:, 3] >= c1)
        )
        i, j = c.interior_sites[0]
        c.external = not any(q != k and cons[q].contains_site(i, j) for q in cand)
    cs._external_done = True


def external_contours(cs: ContourSet) -> ContourSet:
    """Contours not enclosed by any other contour of the set."""
    if not cs._external_done:
        _mark_external(cs)
        return cs.derived(c for c in cs if c.external)
    # flags may refer to a larger parent set; recheck within this set
    sub = ContourSet([Contour(c.vertices, c.diam2) for c in cs], cs.side, cs.boundary)
    _mark_external(sub)
    keep = [c for c, t in zip(cs.contours, sub.contours) if t.external]
    return cs.derived(keep)


def contour_metrics(gamma: Contour) -> dict:
    return {
        "length": gamma.length,
        "area": gamma.interior_area,
        "sites": gamma.site_set(),
        "diameter": gamma.diameter,
    }


def s_large(cs: ContourSet, s: float) -> ContourSet:
    """Contours of diameter at least ``s``."""
    if s <= 0:
        raise ValueError("s must be positive")
    thr = (2.0 * s) ** 2 * (1.0 - 1e-12)
    return cs.derived(c for c in cs if c.diam2 >= thr)


def interior_magnetization(grid: SpinGrid, gamma: Contour) -> int:
    sites = gamma.interior_sites
    return int(grid.spins[sites[:, 0], sites[:, 1]].sum(dtype=np.int64))


def parity_minus_set(cs: ContourSet) -> np.ndarray:
    """Sites enclosed by an odd number of contours."""
    L = cs.side
    out = np.zeros((L, L), dtype=bool)
    for c in cs:
        (a0, b0), mask = c.interior_mask()
        h, w = mask.shape
        out[a0:a0 + h, b0:b0 + w] ^= mask
    return out


_DIRS = {(-2, 0): 0, (0, 2): 1, (2, 0): 2, (0, -2): 3}


def is_closed_and_simple(gamma: Contour) -> bool:
    """Closed unit-step dual path, each bond once, self-touching only as a rounded bounce."""
    v = gamma.vertices
    n = len(v)
    if n < 4 or n % 2:
        return False
    if np.any(v % 2 == 0):
        return False
    w = np.roll(v, -1, axis=0)
    steps = w - v
    try:
        out_dirs = [_DIRS[(int(dx), int(dy))] for dx, dy in steps]
    except KeyError:
        return False
    bonds = {tuple(sorted((tuple(a), tuple(b)))) for a, b in zip(v.tolist(), w.tolist())}
    if len(bonds) != n:
        return False
    visits = {}
    for t in range(n):
        came = (out_dirs[t - 1] + 2) % 4
        visits.setdefault(tuple(v[t]), []).append(frozenset((came, out_dirs[t])))
    for arms in visits.values():
        if len(arms) == 1:
            continue
        if len(arms) > 2 or set(arms) != {frozenset((0, 3)), frozenset((1, 2))}:
            return False
    return True


def contours_from_key(L: int, key: int) -> tuple:
    """Contours of a packed bond mask (h bonds first, then v bonds)."""
    nh = (L + 1) * L
    bits = np.array([(key >> t) & 1 for t in range(2 * L * (L + 1))], dtype=bool)
    hb = bits[:nh].reshape(L + 1, L).copy()
    vb = bits[nh:].reshape(L, L + 1).copy()
    return tuple(_trace(hb, vb))


def contour_from_sites(L: int, sites) -> Contour:
    """The single contour of a plus-boundary grid whose minus set is ``sites``."""
    spins = np.ones((L, L), dtype=np.int8)
    for i, j in sites:
        spins[i, j] = -1
    cs = extract_contours(SpinGrid(L, Boundary.PLUS, spins), mark_external=False)
    if len(cs) != 1:
        raise ValueError(f"sites produce {len(cs)} contours, expected one")
    return cs[0]


def contour_record(gamma: Contour, **extra) -> str:
    rec = {
        "vertices": gamma.vertices.tolist(),
        "length": gamma.length,
        "area": gamma.interior_area,
        "diameter": gamma.diameter,
        "external": gamma.external,
    }
    rec.update(extra)
    return json.dumps(rec, sort_keys=True)
