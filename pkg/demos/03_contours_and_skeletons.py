"""Coarse-graining the boundaries of a sampled configuration.

Sample a plus-boundary grid below the critical temperature, extract its
Peierls contours, keep the ones with diameter at least s and replace each by
a skeleton: a closed polygon with vertices s to 2s apart that stays within
s of the contour.  The enclosed areas agree up to a tube of width s.
"""

import math

from droplet.contour import extract_contours, s_large
from droplet.lattice import new_grid
from droplet.sampler import make_rng, metropolis_sweep, wolff_step
from droplet.skeleton import build_skeleton, check_compatible, polygon_of, winding_region

L, beta = 64, 0.5
rng = make_rng(17, 0)
grid = new_grid(L)
for _ in range(300):
    metropolis_sweep(grid, beta, rng)
    wolff_step(grid, beta, rng)

contours = extract_contours(grid)
print(f"L={L}, beta={beta}: magnetization {grid.magnetization}, {len(contours)} contours")
for s in (2.0, 5.0, 3 * math.log(L)):
    large = s_large(contours, s)
    skeletons = [build_skeleton(c, s) for c in large]
    ok = all(check_compatible(c, S) for c, S in zip(large, skeletons))
    print(f"s = {s:5.2f}: {len(large):3d} large contours, "
          f"{sum(len(S) for S in skeletons):4d} skeleton points, all compatible: {ok}")
    if large:
        big = max(large, key=lambda c: c.interior_area)
        S = build_skeleton(big, s)
        P = polygon_of(S)
        print(f"    largest: length {big.length}, interior {big.interior_area} sites; "
              f"skeleton {len(S)} points, polygon length {P.length:.1f}, area {winding_region([P]):.1f}")
