"""Shared helpers: sampled grids and an independent skeleton checker."""

import math

import numpy as np

from droplet.lattice import new_grid
from droplet.sampler import make_rng, metropolis_sweep, wolff_step
from droplet.skeleton import passage_indices, winding_region, polygon_of


def sampled_grids(beta, L, n, seed, thermalization=200, stride=5):
    """Plus-boundary equilibrium grids from a Metropolis plus Wolff chain."""
    rng = make_rng(seed, 7)
    g = new_grid(L)
    for _ in range(thermalization):
        metropolis_sweep(g, beta, rng)
        wolff_step(g, beta, rng)
    for _ in range(n):
        for _ in range(stride):
            metropolis_sweep(g, beta, rng)
            wolff_step(g, beta, rng)
        yield g.copy()


def _seg_dist(X, A, B):
    d = B - A
    dd = np.maximum((d * d).sum(axis=1), 1e-300)
    t = np.clip(((X[:, None, :] - A[None]) * d[None]).sum(axis=2) / dd, 0.0, 1.0)
    diff = X[:, None, :] - A[None] - t[..., None] * d[None]
    return np.sqrt((diff * diff).sum(axis=2)).min(axis=1)


def skeleton_violations(gamma, S, s, step=0.05):
    """Reasons why ``S`` is not a valid compatible skeleton of ``gamma``.

    Written independently of the library's branch-and-bound: the contour to
    polygon distance peaks at contour vertices (distance to a polyline is
    convex along each contour edge), and the polygon to contour distance is
    bounded by dense sampling of the polygon plus the sampling step.
    """
    out = []
    P = S.points
    n = len(P)
    gaps = np.linalg.norm(np.roll(P, -1, axis=0) - P, axis=1)
    if n < 2 or gaps.min() < s - 1e-9 or gaps.max() > 2 * s + 1e-9:
        out.append(f"gaps {gaps.min():.3f}..{gaps.max():.3f}")
    idx = passage_indices(gamma, S)
    if idx is None:
        out.append("order")
    else:
        m = gamma.length
        arcs = [(idx[(k + 1) % n] - idx[k]) % m or m for k in range(n)]
        if any(a + 1e-9 < g for a, g in zip(arcs, gaps)):
            out.append("arc shorter than chord")
        if n > m / s + 1:
            out.append("too many points")
    G = gamma.points.astype(float)
    A, B = P, np.roll(P, -1, axis=0)
    if _seg_dist(G, A, B).max() > s + 1e-9:
        out.append("contour far from polygon")
    samples = np.concatenate([
        a + np.linspace(0, 1, max(2, int(math.ceil(np.linalg.norm(b - a) / step)) + 1))[:, None] * (b - a)
        for a, b in zip(A, B)
    ])
    GA, GB = G, np.roll(G, -1, axis=0)
    if _seg_dist(samples, GA, GB).max() > s + 1e-9:
        out.append("polygon far from contour")
    return out


def area_gap_ok(contours, skeletons, s):
    """Area difference of contour and skeleton regions within the s-tube bound."""
    if not skeletons:
        return True
    L = max(int(c.vertices.max()) for c in contours) // 2 + 2
    mask = np.zeros((L, L), dtype=bool)
    for c in contours:
        (a0, b0), m = c.interior_mask()
        mask[a0:a0 + m.shape[0], b0:b0 + m.shape[1]] ^= m
    area_c = int(mask.sum())
    area_s = winding_region([polygon_of(S) for S in skeletons])
    bound = s * sum(polygon_of(S).length for S in skeletons) + len(skeletons) * math.pi * s * s
    return abs(area_c - area_s) <= bound + 1e-9


def pytest_terminal_summary(terminalreporter):
    import sys

    mod = sys.modules.get("test_acceptance")
    if mod is not None and mod.RESULTS:
        terminalreporter.section("acceptance criteria")
        for line in mod.RESULTS:
            terminalreporter.write_line(line)
