import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from droplet.lattice import (
    Boundary,
    SnapshotError,
    SpinGrid,
    allowed_magnetization,
    deficit_target,
    grid_from_bytes,
    new_grid,
    read_snapshot,
    snapshot_bytes,
    total_magnetization,
    write_snapshot,
)


def test_new_grid_fills():
    assert new_grid(2, "plus", "all_plus").magnetization == 4
    assert new_grid(3, "plus", "all_minus").magnetization == -9
    assert new_grid(4, "plus", "k_minus", k=5, seed=1).magnetization == 6


def test_new_grid_rejects_bad_k():
    with pytest.raises(ValueError):
        new_grid(3, fill="k_minus", k=10)
    with pytest.raises(ValueError):
        new_grid(3, fill="k_minus")
    with pytest.raises(ValueError):
        new_grid(0)


def test_total_magnetization_examples():
    assert total_magnetization(new_grid(5, fill="all_plus")) == 25
    assert total_magnetization(new_grid(5, fill="all_minus")) == -25
    g = new_grid(4)
    g.spins[0, :3] = -1
    assert total_magnetization(g) == 10


def test_spin_values_validated():
    with pytest.raises(ValueError):
        SpinGrid(2, Boundary.PLUS, np.array([[1, 0], [1, 1]], dtype=np.int8))


@settings(max_examples=60, deadline=None)
@given(L=st.integers(1, 9), k=st.integers(0, 81), seed=st.integers(0, 2**32 - 1),
       bc=st.sampled_from(["plus", "minus", "free"]))
def test_grid_invariants_and_flip(L, k, seed, bc):
    k = min(k, L * L)
    g = new_grid(L, bc, "k_minus", k=k, seed=seed)
    assert set(np.unique(g.spins)) <= {-1, 1}
    M = g.magnetization
    assert M == L * L - 2 * k
    assert allowed_magnetization(M, L)
    assert total_magnetization(g.flipped()) == -M
    r = new_grid(L, bc, "random", seed=seed)
    assert allowed_magnetization(r.magnetization, L)


def test_deficit_target_examples():
    assert deficit_target(1.0, 4, 3).target_M == 10
    assert deficit_target(0.8, 10, 10).target_M == 64
    assert deficit_target(0.9, 3, 1).target_M == 7
    with pytest.raises(ValueError):
        deficit_target(0.9, 3, 9)


def test_deficit_target_tie_goes_to_smaller_magnitude():
    # ideal value 1.0 with odd parity excluded: L=2 gives even parity, ideal 1 -> {0, 2}
    dspec = deficit_target(0.5, 2, 1.0)
    assert dspec.target_M == 0


@settings(max_examples=80, deadline=None)
@given(m=st.floats(0.05, 1.0), L=st.integers(2, 40), a=st.floats(0.01, 0.99), b=st.floats(0.01, 0.99))
def test_deficit_target_properties(m, L, a, b):
    n = L * L
    v1, v2 = sorted((a * n, b * n))
    s1, s2 = deficit_target(m, L, v1), deficit_target(m, L, v2)
    for dspec, v in ((s1, v1), (s2, v2)):
        assert allowed_magnetization(dspec.target_M, L)
        assert abs(dspec.target_M - (m * n - 2 * m * v)) <= 1 + 1e-9
    assert s2.target_M <= s1.target_M


def test_snapshot_roundtrip(tmp_path):
    g = new_grid(13, "minus", "random", seed=7)
    data = snapshot_bytes(g)
    assert len(data) == 16 + (13 * 13 + 7) // 8
    assert data[:4] == b"ISD1"
    assert grid_from_bytes(data) == g
    write_snapshot(g, tmp_path / "g.isd")
    assert read_snapshot(tmp_path / "g.isd") == g


def test_snapshot_checksum_detects_corruption():
    data = bytearray(snapshot_bytes(new_grid(8, fill="random", seed=3)))
    data[-1] ^= 1
    with pytest.raises(SnapshotError):
        grid_from_bytes(bytes(data))
