"""Droplet formation in the two-dimensional Ising model.

Submodules: ``lattice`` (spin grids), ``sampler`` (Monte Carlo chains),
``enum_oracle`` (exact laws on small boxes), ``contour`` (Peierls contours),
``skeleton`` (coarse-grained contours), ``wulff`` (surface tension and the
Wulff shape), ``variational`` (the droplet rate function) and
``experiment`` (deficit sweeps).
"""

from .lattice import Boundary, SpinGrid, new_grid
from .variational import PhiParams, delta_c, lambda_plus, minimize_phi

__version__ = "0.1.0"

__all__ = ["Boundary", "SpinGrid", "new_grid", "PhiParams", "delta_c", "lambda_plus", "minimize_phi",
           "__version__"]
