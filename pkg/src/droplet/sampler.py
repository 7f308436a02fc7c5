"""Markov chains for the plus-boundary Ising model.

Grand-canonical sampling uses single-site Metropolis plus boundary-frozen
Wolff clusters; the fixed-magnetization ensemble uses nonlocal Kawasaki
exchanges.  Every chain owns its grid and its random stream.

Random streams are numpy ``PCG64`` generators derived from
``SeedSequence(seed, spawn_key=stream)``, so chain ``c`` of a run with seed
``s`` always sees the same numbers regardless of scheduling.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, replace
from typing import Iterator, Optional

import numpy as np

from . import _kernels
from .lattice import Boundary, SpinGrid, allowed_magnetization, new_grid
from .stats import batch_means_error, mean_with_error

BETA_C = 0.5 * math.log(1.0 + math.sqrt(2.0))

__all__ = [
    "BETA_C",
    "ChainParams",
    "BulkEstimates",
    "SamplerConsistencyError",
    "make_rng",
    "metropolis_sweep",
    "kawasaki_sweep",
    "wolff_step",
    "estimate_bulk",
    "sample_canonical",
]


class SamplerConsistencyError(RuntimeError):
    """A chain failed its split-half consistency check."""


@dataclass(frozen=True)
class ChainParams:
    beta: float
    sweeps: int
    thermalization: int = 0
    sample_stride: int = 1
    seed: int = 0
    target_M: Optional[int] = None

    def __post_init__(self):
        if self.beta <= 0:
            raise ValueError("beta must be positive")
        if self.sample_stride < 1:
            raise ValueError("sample_stride must be >= 1")
        if self.thermalization < 0:
            raise ValueError("thermalization must be >= 0")
        if self.sweeps < 0:
            raise ValueError("sweeps must be >= 0")


@dataclass(frozen=True)
class BulkEstimates:
    m_star_hat: float
    m_star_err: float
    chi_hat: float
    chi_err: float
    beta: float
    L: int
    tau_int: float
    n_samples: int


def make_rng(seed, *stream) -> np.random.Generator:
    """Generator for substream ``stream`` (a tuple of ints) of a run seed."""
    ss = np.random.SeedSequence(int(seed), spawn_key=tuple(int(s) for s in stream))
    return np.random.Generator(np.random.PCG64(ss))


def _as_rng(rng) -> np.random.Generator:
    if isinstance(rng, np.random.Generator):
        return rng
    return np.random.default_rng(rng)


def metropolis_sweep(grid: SpinGrid, beta: float, rng, n_sweeps: int = 1) -> SpinGrid:
    """Run ``n_sweeps`` passes of L^2 single-site Metropolis proposals in place."""
    rng = _as_rng(rng)
    n = grid.side * grid.side
    bval = grid.boundary.spin
    chunk = max(1, (1 << 20) // n)
    done = 0
    while done < n_sweeps:
        k = min(chunk, n_sweeps - done)
        u = rng.random((2, k * n))
        _kernels.metropolis_kernel(grid.spins, float(beta), bval, u[0], u[1])
        done += k
    return grid


class _KawasakiState:
    """Index bookkeeping for the exchange kernel, rebuilt from the grid."""

    def __init__(self, grid: SpinGrid):
        flat = grid.spins.ravel()
        self.plus_idx = np.flatnonzero(flat > 0).astype(np.int64)
        self.minus_idx = np.flatnonzero(flat < 0).astype(np.int64)
        self.where = np.empty(flat.size, dtype=np.int64)
        self.where[self.plus_idx] = np.arange(self.plus_idx.size)
        self.where[self.minus_idx] = np.arange(self.minus_idx.size)

    def run(self, grid, beta, rng, n_sweeps):
        n = grid.side * grid.side
        if self.plus_idx.size == 0 or self.minus_idx.size == 0:
            return 0
        bval = grid.boundary.spin
        chunk = max(1, (1 << 20) // n)
        done = 0
        accepted = 0
        while done < n_sweeps:
            k = min(chunk, n_sweeps - done)
            u = rng.random((3, k * n))
            accepted += _kernels.kawasaki_kernel(
                grid.spins, float(beta), bval, self.plus_idx, self.minus_idx, self.where,
                u[0], u[1], u[2],
            )
            done += k
        return accepted


def kawasaki_sweep(grid: SpinGrid, beta: float, rng, n_sweeps: int = 1, check: bool = False) -> SpinGrid:
    """Run ``n_sweeps`` passes of L^2 plus/minus exchange proposals in place.

    The magnetization is conserved exactly; a monochromatic grid is left as is.
    """
    rng = _as_rng(rng)
    before = grid.magnetization if check else None
    _KawasakiState(grid).run(grid, beta, rng, n_sweeps)
    if check and grid.magnetization != before:
        raise AssertionError("Kawasaki update changed the magnetization")
    return grid


class _WolffState:
    def __init__(self, n):
        self.stack = np.empty(n, dtype=np.int64)
        self.in_cluster = np.zeros(n, dtype=np.bool_)

    def run(self, grid, beta, rng, n_steps):
        n = grid.side * grid.side
        need = 4 * n + 1
        bval = grid.boundary.spin
        done = 0
        flips = 0
        while done < n_steps:
            buf = rng.random(max(need, min(1 << 16, need * (n_steps - done))))
            steps, _, f = _kernels.wolff_kernel(
                grid.spins, float(beta), bval, buf, n_steps - done, self.stack, self.in_cluster
            )
            done += steps
            flips += f
        return flips


def wolff_step(grid: SpinGrid, beta: float, rng, n_steps: int = 1) -> SpinGrid:
    """Wolff cluster updates in place; clusters bonded to the boundary are kept."""
    if grid.boundary is Boundary.FREE:
        raise ValueError("wolff_step needs a fixed boundary spin")
    rng = _as_rng(rng)
    _WolffState(grid.side * grid.side).run(grid, beta, rng, n_steps)
    return grid


def estimate_bulk(beta: float, L: int, params: ChainParams, chain: int = 0,
                  wolff_per_sweep: int = 1) -> BulkEstimates:
    """Estimate m* and chi from a plus-boundary chain.

    Each sweep is one Metropolis pass followed by ``wolff_per_sweep`` cluster
    steps.  m* is the mean of M/L^2, chi is Var(M)/L^2.  Raises
    ``SamplerConsistencyError`` when the two halves of the run disagree by
    more than five combined standard errors.
    """
    if beta <= BETA_C:
        warnings.warn(f"beta={beta} is not above beta_c={BETA_C:.6f}", RuntimeWarning, stacklevel=2)
    if params.sweeps < 4:
        raise ValueError("need at least 4 production sweeps")
    rng = make_rng(params.seed, chain)
    grid = new_grid(L, "plus", "all_plus")
    n = L * L
    wolff = _WolffState(n)
    use_wolff = wolff_per_sweep > 0 and np.isfinite(beta)

    def sweep():
        metropolis_sweep(grid, beta, rng)
        if use_wolff:
            wolff.run(grid, beta, rng, wolff_per_sweep)

    for _ in range(params.thermalization):
        sweep()
    mags = np.empty(params.sweeps, dtype=np.float64)
    for t in range(params.sweeps):
        sweep()
        mags[t] = grid.spins.sum(dtype=np.int64)

    m_mean, m_err, tau = mean_with_error(mags / n)
    chi = float(mags.var() / n)
    chi_err = batch_means_error(mags, stat=np.var) / n
    half = params.sweeps // 2
    a, ea, _ = mean_with_error(mags[:half] / n)
    b, eb, _ = mean_with_error(mags[half:] / n)
    comb = math.hypot(ea, eb)
    if comb == 0:
        consistent = a == b
    else:
        consistent = abs(a - b) <= 5.0 * comb
    if not consistent:
        raise SamplerConsistencyError(
            f"split-half means {a:.6f} and {b:.6f} differ by more than 5 combined errors ({comb:.2e})"
        )
    return BulkEstimates(
        m_star_hat=m_mean, m_star_err=m_err, chi_hat=chi, chi_err=chi_err,
        beta=float(beta), L=L, tau_int=tau, n_samples=params.sweeps,
    )


def sample_canonical(params: ChainParams, L: int, chain: int = 0,
                     stream: tuple = ()) -> Iterator[SpinGrid]:
    """Yield plus-boundary grids with magnetization exactly ``params.target_M``.

    The chain starts from ``k = (L^2 - target_M)/2`` minus spins at random
    positions, runs ``thermalization`` sweeps, then yields a copy every
    ``sample_stride`` sweeps until ``sweeps`` production sweeps are done.
    """
    M = params.target_M
    if M is None:
        raise ValueError("sample_canonical needs params.target_M")
    if not allowed_magnetization(M, L):
        raise ValueError(f"target_M={M} is not an allowed magnetization for L={L}")
    rng = make_rng(params.seed, *stream, chain)
    k = (L * L - M) // 2
    grid = new_grid(L, "plus", "k_minus", k=k, seed=rng)
    state = _KawasakiState(grid)
    state.run(grid, params.beta, rng, params.thermalization)
    for _ in range(params.sweeps // params.sample_stride):
        state.run(grid, params.beta, rng, params.sample_stride)
        yield grid.copy()


def with_target(params: ChainParams, target_M: int) -> ChainParams:
    return replace(params, target_M=int(target_M))
