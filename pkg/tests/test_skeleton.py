import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import area_gap_ok, sampled_grids, skeleton_violations
from droplet.contour import contour_from_sites, extract_contours, s_large
from droplet.skeleton import (
    Polygon,
    Skeleton,
    SkeletonError,
    build_skeleton,
    check_compatible,
    hausdorff_polylines,
    order_compatible,
    polygon_of,
    skeleton_from_record,
    skeleton_record,
    winding_region,
    wulff_functional,
)
from droplet.wulff import SurfaceTension, build_wulff


def block(L, r0, c0, h, w):
    return contour_from_sites(L, [(i, j) for i in range(r0, r0 + h) for j in range(c0, c0 + w)])


def test_skeleton_validates_gaps():
    Skeleton([[0, 0], [5, 0], [5, 5], [0, 5]], 4.0)
    with pytest.raises(SkeletonError):
        Skeleton([[0, 0], [1, 0], [1, 1]], 4.0)
    with pytest.raises(SkeletonError):
        Skeleton([[0, 0]], 1.0)


def test_polygon_examples():
    sq = polygon_of(Skeleton([[0, 0], [5, 0], [5, 5], [0, 5]], 4.0))
    assert sq.length == pytest.approx(20.0)
    two = polygon_of(Skeleton([[0, 0], [3, 4]], 3.0))
    assert two.length == pytest.approx(10.0)
    tri = Polygon([[0, 0], [1, 0], [3, 0]])
    assert tri.length == pytest.approx(6.0)
    with pytest.raises(ValueError):
        Polygon([[1, 1], [1, 1]])


def test_block_skeleton_is_compatible():
    g = block(16, 3, 3, 10, 10)
    S = build_skeleton(g, 4.0)
    gaps = S.gaps()
    assert gaps.min() >= 4.0 - 1e-9 and gaps.max() <= 8.0 + 1e-9
    assert check_compatible(g, S)
    assert hausdorff_polylines(g.points, S.points) <= 4.0 + 1e-9
    assert skeleton_violations(g, S, 4.0) == []


def test_unit_square_skeleton():
    g = contour_from_sites(3, [(1, 1)])
    S = build_skeleton(g, 1.0)
    assert len(S) >= 2
    assert np.all((S.gaps() >= 1 - 1e-9) & (S.gaps() <= 2 + 1e-9))
    assert check_compatible(g, S)


def test_too_small_contour_rejected():
    with pytest.raises(SkeletonError):
        build_skeleton(contour_from_sites(3, [(1, 1)]), 2.0)


def test_reversed_and_translated_fail():
    g = block(20, 2, 2, 6, 11)
    S = build_skeleton(g, 3.0)
    assert len(S) >= 3
    assert check_compatible(g, S)
    assert not order_compatible(g, S.reversed())
    assert not check_compatible(g, S.reversed())
    assert not check_compatible(g, S.translated((9.0, 0.0)))


def test_hausdorff_condition_is_checked():
    # skeleton on the body corners, ignoring a long finger: order holds, distance fails
    body = [(i, j) for i in range(10, 20) for j in range(10)]
    finger = [(i, 4) for i in range(10)]
    g = contour_from_sites(22, body + finger)
    S = Skeleton(np.array([[9.5, -0.5], [9.5, 9.5], [19.5, 9.5], [19.5, -0.5]]), 5.0)
    assert order_compatible(g, S) or order_compatible(g, S.reversed())
    assert not check_compatible(g, S) and not check_compatible(g, S.reversed())


def test_winding_examples():
    sq = Polygon([[0, 0], [3, 0], [3, 3], [0, 3]])
    assert winding_region([sq]) == pytest.approx(9.0)
    assert winding_region([sq, sq]) == 0.0
    # figure eight through the origin: lobes of areas 2 and 3
    eight = Polygon([[0, 0], [2, 0], [0, 2], [0, 0], [-3, 0], [0, -2]])
    assert winding_region([eight]) == pytest.approx(5.0)
    bowtie = Polygon([[-2, -1], [2, 1], [2, -1], [-2, 1]])
    assert winding_region([bowtie]) == pytest.approx(4.0)
    assert bowtie.signed_area == pytest.approx(0.0)


def test_winding_matches_ray_parity():
    rng = np.random.default_rng(4)
    V = rng.integers(-6, 7, size=(9, 2)) / 2.0
    P = Polygon(V)
    exact = winding_region([P])
    # crossing parity on a fine grid of cell centres
    h = 0.02
    xs = np.arange(-3.0 + h / 2, 3.0, h)
    X, Y = np.meshgrid(xs, xs, indexing="ij")
    inside = np.zeros_like(X, dtype=bool)
    a, b = P.edges
    for (x1, y1), (x2, y2) in zip(a, b):
        if x1 == x2:
            continue
        lo, hi = min(x1, x2), max(x1, x2)
        yline = y1 + (y2 - y1) * (X - x1) / (x2 - x1)
        inside ^= (X >= lo) & (X < hi) & (Y < yline)
    approx = inside.sum() * h * h
    assert exact == pytest.approx(approx, abs=0.05 * max(1.0, exact))


def test_float_vertices_fallback():
    r = Polygon([[0.1, 0.2], [3.3, 0.2], [3.3, 2.9], [0.1, 2.9]])
    assert winding_region([r]) == pytest.approx(3.2 * 2.7, rel=1e-12)


def test_wulff_functional_examples():
    sq = Polygon([[0, 0], [1, 0], [1, 1], [0, 1]])
    assert wulff_functional(sq, 1.0) == pytest.approx(4.0)
    assert wulff_functional(sq, lambda th: 1.0 + 0.0 * th) == pytest.approx(4.0)
    S = Skeleton([[0, 0], [5, 0], [5, 5], [0, 5]], 4.0)
    assert wulff_functional(S, 2.5) == pytest.approx(2.5 * 20)
    assert wulff_functional([S, S], 1.0) == pytest.approx(40.0)
    with pytest.raises(ValueError):
        wulff_functional(sq, 0.0)
    tau = SurfaceTension.constant(1.3)
    W = build_wulff(tau, 512)
    assert wulff_functional(W.polygon, tau) == pytest.approx(W.w1, abs=1e-6)


def test_minimal_tension_bound():
    tau = SurfaceTension.tabulated(np.linspace(0, np.pi / 2, 5, endpoint=False), [1.0, 1.1, 1.2, 1.1, 1.05],
                                   period=np.pi / 2)
    rng = np.random.default_rng(0)
    for _ in range(20):
        P = Polygon(rng.normal(size=(6, 2)) * 5)
        assert wulff_functional(P, tau) >= tau.tau_min * P.length - 1e-9


def test_record_roundtrip():
    S = Skeleton([[0.5, 0.5], [5.5, 0.5], [5.5, 5.5]], 4.0)
    back = skeleton_from_record(skeleton_record(S))
    assert np.array_equal(back.points, S.points) and back.scale == S.scale


@settings(max_examples=40, deadline=None)
@given(h=st.integers(1, 12), w=st.integers(1, 12), s=st.floats(1.0, 6.0))
def test_rectangles_property(h, w, s):
    g = block(h + w + 4, 1, 2, h, w)
    if g.diameter < s:
        with pytest.raises(SkeletonError):
            build_skeleton(g, s)
        return
    S = build_skeleton(g, s)
    assert skeleton_violations(g, S, s) == []
    assert check_compatible(g, S)


@pytest.mark.parametrize("beta", [0.5, 0.7])
def test_sampled_grid_fuzz(beta):
    bad = []
    for t, grid in enumerate(sampled_grids(beta, 32, 12, seed=t_seed(beta), thermalization=50)):
        cs = extract_contours(grid, mark_external=False)
        for s in (2.0, 5.0):
            large = list(s_large(cs, s))
            skels = [build_skeleton(c, s) for c in large]
            for c, S in zip(large, skels):
                if not check_compatible(c, S):
                    bad.append((t, s, "check_compatible"))
                bad += [(t, s, v) for v in skeleton_violations(c, S, s)]
            if sum(len(S) for S in skels) <= 200:
                assert area_gap_ok(large, skels, s)
    assert bad == []


def t_seed(beta):
    return int(beta * 1000)


def test_two_point_and_collinear_distance():
    assert hausdorff_polylines(np.array([[0.0, 0.0], [3.0, 0.0]]), np.array([[0.0, 0.0], [0.0, 0.0]])) == pytest.approx(3.0)
    assert math.isclose(hausdorff_polylines(np.array([[0.0, 0], [1, 0]]), np.array([[0.0, 0], [1, 0]])), 0.0)
