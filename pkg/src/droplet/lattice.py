"""Spin configurations on an L x L box, boundary conditions and magnetization.

Sites are addressed by array index ``(row, col)``.  Row index grows to the
south and column index to the east; the contour code relies on this
orientation for its rounding rule.
"""

from __future__ import annotations

import enum
import math
import struct
import zlib
from dataclasses import dataclass
from pathlib import Path

import numpy as np

__all__ = [
    "Boundary",
    "SpinGrid",
    "DeficitSpec",
    "new_grid",
    "total_magnetization",
    "deficit_target",
    "allowed_magnetization",
    "write_snapshot",
    "read_snapshot",
    "SnapshotError",
]


class Boundary(str, enum.Enum):
    PLUS = "plus"
    MINUS = "minus"
    FREE = "free"

    @property
    def spin(self) -> int:
        """Value of the frozen boundary spin (0 for free boundary)."""
        return {"plus": 1, "minus": -1, "free": 0}[self.value]

    @property
    def code(self) -> int:
        return {"plus": 0, "minus": 1, "free": 2}[self.value]

    @classmethod
    def from_code(cls, code: int) -> "Boundary":
        return [cls.PLUS, cls.MINUS, cls.FREE][code]


@dataclass
class SpinGrid:
    """An L x L array of +-1 spins together with its boundary condition."""

    side: int
    boundary: Boundary
    spins: np.ndarray

    def __post_init__(self):
        self.boundary = Boundary(self.boundary)
        self.spins = np.ascontiguousarray(self.spins, dtype=np.int8)
        if self.side < 1:
            raise ValueError("side must be positive")
        if self.spins.shape != (self.side, self.side):
            raise ValueError(f"spins must have shape {(self.side, self.side)}, got {self.spins.shape}")
        if not np.all(np.abs(self.spins) == 1):
            raise ValueError("spins must be -1 or +1")

    @property
    def magnetization(self) -> int:
        return total_magnetization(self)

    @property
    def n_minus(self) -> int:
        return int(np.count_nonzero(self.spins < 0))

    def copy(self) -> "SpinGrid":
        return SpinGrid(self.side, self.boundary, self.spins.copy())

    def flipped(self) -> "SpinGrid":
        """Global spin flip; the boundary condition is left untouched."""
        return SpinGrid(self.side, self.boundary, -self.spins)

    def padded(self) -> np.ndarray:
        """Spins surrounded by one ring of boundary spins."""
        p = np.full((self.side + 2, self.side + 2), self.boundary.spin, dtype=np.int8)
        p[1:-1, 1:-1] = self.spins
        return p

    def energy(self) -> int:
        """Nearest-neighbour Hamiltonian -sum s_x s_y including boundary bonds."""
        p = self.padded().astype(np.int64)
        horiz = p[1:-1, :-1] * p[1:-1, 1:]
        vert = p[:-1, 1:-1] * p[1:, 1:-1]
        return int(-(horiz.sum() + vert.sum()))

    def __eq__(self, other):
        if not isinstance(other, SpinGrid):
            return NotImplemented
        return (
            self.side == other.side
            and self.boundary == other.boundary
            and np.array_equal(self.spins, other.spins)
        )


@dataclass(frozen=True)
class DeficitSpec:
    v: float
    m_star: float
    target_M: int
    side: int


def new_grid(L, boundary="plus", fill="all_plus", *, k=None, seed=None) -> SpinGrid:
    """Build a grid.

    ``fill`` is one of ``all_plus``, ``all_minus``, ``random`` (iid uniform
    spins) or ``k_minus`` (exactly ``k`` minus spins at uniformly random
    positions).  ``seed`` may be an int or a ``numpy.random.Generator``.
    """
    if L < 1:
        raise ValueError("L must be positive")
    n = L * L
    if fill == "all_plus":
        spins = np.ones((L, L), dtype=np.int8)
    elif fill == "all_minus":
        spins = -np.ones((L, L), dtype=np.int8)
    elif fill == "random":
        rng = np.random.default_rng(seed)
        spins = rng.choice(np.array([-1, 1], dtype=np.int8), size=(L, L))
    elif fill == "k_minus":
        if k is None:
            raise ValueError("k_minus fill needs k")
        if not 0 <= k <= n:
            raise ValueError(f"k must lie in [0, {n}], got {k}")
        rng = np.random.default_rng(seed)
        flat = np.ones(n, dtype=np.int8)
        flat[rng.choice(n, size=k, replace=False)] = -1
        spins = flat.reshape(L, L)
    else:
        raise ValueError(f"unknown fill {fill!r}")
    return SpinGrid(L, Boundary(boundary), spins)


def total_magnetization(grid: SpinGrid) -> int:
    return int(grid.spins.sum(dtype=np.int64))


def allowed_magnetization(M: int, L: int) -> bool:
    n = L * L
    return -n <= M <= n and (M - n) % 2 == 0


def deficit_target(m_star: float, L: int, v: float) -> DeficitSpec:
    """Allowed magnetization nearest to ``m_star*L^2 - 2*m_star*v``.

    Allowed values share the parity of L^2; ties go to the smaller magnitude.
    """
    if not 0 < m_star <= 1:
        raise ValueError("m_star must lie in (0, 1]")
    n = L * L
    if v <= 0:
        raise ValueError("v must be positive")
    if v >= n:
        raise ValueError(f"deficit volume v={v} must be below L^2={n}")
    ideal = m_star * n - 2.0 * m_star * v
    parity = n % 2
    lo = parity + 2 * math.floor((ideal - parity) / 2.0)
    hi = lo + 2
    d_lo, d_hi = ideal - lo, hi - ideal
    if math.isclose(d_lo, d_hi, rel_tol=0.0, abs_tol=1e-12):
        target = lo if abs(lo) < abs(hi) else hi
    else:
        target = lo if d_lo < d_hi else hi
    target = int(min(max(target, -n), n))
    return DeficitSpec(v=float(v), m_star=float(m_star), target_M=target, side=L)


# Snapshot files: 16-byte little-endian header then bit-packed spins.
_MAGIC = b"ISD1"
_HEADER = struct.Struct("<4sIB3xI")


class SnapshotError(ValueError):
    pass


def _pack(grid: SpinGrid) -> bytes:
    bits = (grid.spins.ravel() > 0).astype(np.uint8)
    return np.packbits(bits, bitorder="little").tobytes()


def snapshot_bytes(grid: SpinGrid) -> bytes:
    """Encode a grid; bit i of the payload (LSB first) is row-major site i, 1 meaning +1."""
    payload = _pack(grid)
    header = _HEADER.pack(_MAGIC, grid.side, grid.boundary.code, zlib.crc32(payload))
    return header + payload


def grid_from_bytes(data: bytes) -> SpinGrid:
    if len(data) < _HEADER.size:
        raise SnapshotError("truncated header")
    magic, L, code, crc = _HEADER.unpack_from(data)
    if magic != _MAGIC:
        raise SnapshotError(f"bad magic {magic!r}")
    nbytes = (L * L + 7) // 8
    payload = data[_HEADER.size:_HEADER.size + nbytes]
    if len(payload) != nbytes:
        raise SnapshotError("truncated payload")
    if zlib.crc32(payload) != crc:
        raise SnapshotError("checksum mismatch")
    bits = np.unpackbits(np.frombuffer(payload, dtype=np.uint8), count=L * L, bitorder="little")
    spins = np.where(bits == 1, 1, -1).astype(np.int8).reshape(L, L)
    return SpinGrid(L, Boundary.from_code(code), spins)


def write_snapshot(grid: SpinGrid, path) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_bytes(snapshot_bytes(grid))


def read_snapshot(path) -> SpinGrid:
    return grid_from_bytes(Path(path).read_bytes())
