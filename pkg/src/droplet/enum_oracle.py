"""Exact enumeration of the Ising model on boxes with at most 25 sites.

The expensive step is an integer histogram of configurations by (number of
minus spins, bond sum); it does not depend on beta and is cached per
(L, boundary).  Every beta-dependent quantity is then a finite log-sum-exp.
"""

from __future__ import annotations

import functools
import itertools
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.special import comb, logsumexp

from . import _kernels
from .lattice import Boundary, SpinGrid

MAX_SIDE = 5

__all__ = [
    "ExactLaw",
    "enumerate_distribution",
    "conditional_expectation",
    "expectation",
    "site_magnetizations",
    "configurations",
    "skeleton_event_probability",
    "skeleton_event_probabilities",
    "pmf_csv",
    "write_pmf_csv",
    "read_pmf_csv",
]


@functools.lru_cache(maxsize=None)
def _dos(L: int, bval: int) -> np.ndarray:
    return _kernels.density_of_states(L, bval)


@dataclass
class ExactLaw:
    L: int
    beta: float
    boundary: Boundary
    log_Z: float
    magnetization_pmf: dict
    _cache: dict = field(default_factory=dict, repr=False, compare=False)

    @property
    def bond_count(self) -> int:
        return 2 * self.L * (self.L + 1)

    def pmf(self, M: int) -> float:
        return self.magnetization_pmf.get(int(M), 0.0)

    def mean_M(self) -> float:
        return math.fsum(M * p for M, p in self.magnetization_pmf.items())

    def var_M(self) -> float:
        mu = self.mean_M()
        return math.fsum((M - mu) ** 2 * p for M, p in self.magnetization_pmf.items())


def enumerate_distribution(L: int, beta: float, boundary="plus") -> ExactLaw:
    """Exact log partition function and magnetization law on an L x L box."""
    if L < 1:
        raise ValueError("L must be positive")
    if L > MAX_SIDE:
        raise ValueError(f"exact enumeration is limited to L <= {MAX_SIDE}")
    boundary = Boundary(boundary)
    counts = _dos(L, boundary.spin)
    n = L * L
    nb = 2 * L * (L + 1)
    kk, bb = np.nonzero(counts)
    logw = np.log(counts[kk, bb].astype(float)) + beta * (bb - nb)
    log_Z = float(logsumexp(logw))
    pmf = {}
    for k in np.unique(kk):
        sel = kk == k
        pmf[int(n - 2 * k)] = float(np.exp(logsumexp(logw[sel]) - log_Z))
    return ExactLaw(L=L, beta=float(beta), boundary=boundary, log_Z=log_Z,
                    magnetization_pmf=dict(sorted(pmf.items())))


def _spins_from_codes(codes: np.ndarray, L: int) -> np.ndarray:
    bits = (codes[:, None] >> np.arange(L * L, dtype=np.int64)) & 1
    return np.where(bits == 1, 1, -1).astype(np.int8).reshape(-1, L, L)


def _log_weights(spins: np.ndarray, beta: float, bval: int) -> np.ndarray:
    """beta * (bond sum) for a stack of configurations."""
    n_cfg, L, _ = spins.shape
    p = np.full((n_cfg, L + 2, L + 2), bval, dtype=np.int64)
    p[:, 1:-1, 1:-1] = spins
    bsum = (p[:, 1:-1, :-1] * p[:, 1:-1, 1:]).sum(axis=(1, 2)) + (p[:, :-1, 1:-1] * p[:, 1:, 1:-1]).sum(axis=(1, 2))
    return beta * bsum.astype(float)


def configurations(law: ExactLaw, M=None, chunk=1 << 16):
    """Yield (spins stack, normalized probabilities) over all configurations.

    With ``M`` given, only configurations of that magnetization are produced
    and probabilities are conditional on it.
    """
    L = law.L
    n = L * L
    bval = law.boundary.spin
    if M is None:
        log_norm = law.log_Z
        total = 1 << n
        for start in range(0, total, chunk):
            codes = np.arange(start, min(total, start + chunk), dtype=np.int64)
            spins = _spins_from_codes(codes, L)
            yield spins, np.exp(_log_weights(spins, law.beta, bval) - log_norm)
        return
    if (M - n) % 2 or abs(M) > n or law.pmf(M) == 0.0:
        raise ValueError(f"M={M} has zero probability")
    k = (n - M) // 2
    log_norm = law.log_Z + math.log(law.pmf(M))
    combos = itertools.combinations(range(n), k)
    while True:
        block = list(itertools.islice(combos, chunk))
        if not block:
            break
        idx = np.array(block, dtype=np.int64).reshape(len(block), k)
        flat = np.ones((len(block), n), dtype=np.int8)
        if k:
            np.put_along_axis(flat, idx, -1, axis=1)
        spins = flat.reshape(-1, L, L)
        yield spins, np.exp(_log_weights(spins, law.beta, bval) - log_norm)


def _grids(spins, boundary):
    L = spins.shape[1]
    for s in spins:
        yield SpinGrid(L, boundary, s)


def expectation(law: ExactLaw, observable, M=None, vectorized=False) -> float:
    """Exact expectation of ``observable``; optionally conditioned on M.

    ``observable`` maps a SpinGrid to a number, or, with ``vectorized=True``,
    a stack of spin arrays (n, L, L) to an array of n numbers.
    """
    parts = []
    for spins, prob in configurations(law, M):
        if vectorized:
            vals = np.asarray(observable(spins), dtype=float)
        else:
            vals = np.fromiter((observable(g) for g in _grids(spins, law.boundary)), float, len(spins))
        parts.append(prob @ vals)
    return math.fsum(parts)


def conditional_expectation(law: ExactLaw, M: int, observable, vectorized=False) -> float:
    """Exact <observable | M_L = M>."""
    if law.pmf(M) <= 0.0:
        raise ValueError(f"M={M} has zero probability under this law")
    return expectation(law, observable, M=M, vectorized=vectorized)


def site_magnetizations(law: ExactLaw, M=None) -> np.ndarray:
    """Exact <sigma_x> at every site, optionally conditioned on M."""
    acc = np.zeros((law.L, law.L))
    for spins, prob in configurations(law, M):
        acc += np.tensordot(prob, spins.astype(float), axes=1)
    return acc


def pmf_csv(law: ExactLaw) -> str:
    lines = [f"# L={law.L} beta={law.beta!r} boundary={law.boundary.value} log_Z={law.log_Z!r}", "M,pmf"]
    lines += [f"{M},{p!r}" for M, p in sorted(law.magnetization_pmf.items())]
    return "\n".join(lines) + "\n"


def write_pmf_csv(law: ExactLaw, path) -> None:
    Path(path).write_text(pmf_csv(law))


def read_pmf_csv(path) -> ExactLaw:
    head, _, *rows = Path(path).read_text().splitlines()
    meta = dict(item.split("=") for item in head[1:].split())
    pmf = {int(M): float(p) for M, p in (r.split(",") for r in rows if r)}
    return ExactLaw(L=int(meta["L"]), beta=float(meta["beta"]), boundary=Boundary(meta["boundary"]),
                    log_Z=float(meta["log_Z"]), magnetization_pmf=pmf)


# --- skeleton events -------------------------------------------------------

def _bond_geometry(L):
    """Corner endpoints of every packed bond bit, in undoubled coordinates."""
    ends = []
    for a in range(L + 1):
        for b in range(L):
            ends.append(((a - 0.5, b - 0.5), (a - 0.5, b + 0.5)))
    for a in range(L):
        for b in range(L + 1):
            ends.append(((a - 0.5, b - 0.5), (a + 0.5, b - 0.5)))
    return np.array(ends)


def _event_masks(L, skeletons, s):
    """Necessary-condition bond masks for one skeleton collection."""
    from .skeleton import _closed_edges, _dist_to

    ends = _bond_geometry(L)
    if not skeletons:
        return 0, []
    A = np.concatenate([_closed_edges(S.points)[0] for S in skeletons])
    B = np.concatenate([_closed_edges(S.points)[1] for S in skeletons])
    near = (_dist_to(ends[:, 0], A, B) <= s + 1e-9) & (_dist_to(ends[:, 1], A, B) <= s + 1e-9)
    allowed = 0
    for bit in np.flatnonzero(near):
        allowed |= 1 << int(bit)
    required = []
    for S in skeletons:
        for p in S.points:
            touch = np.flatnonzero(
                np.all(np.abs(ends[:, 0] - p) < 1e-9, axis=1) | np.all(np.abs(ends[:, 1] - p) < 1e-9, axis=1)
            )
            m = 0
            for bit in touch:
                m |= 1 << int(bit)
            # a point off the dual lattice can never be passed through
            required.append(m if m else -1)
    if any(m == -1 for m in required):
        return None, []
    return allowed, required


def _to_int64(m):
    return m - (1 << 64) if m >= 1 << 63 else m


def skeleton_event_probabilities(law: ExactLaw, events, s: float) -> list:
    """Exact probabilities of several skeleton events in one enumeration pass.

    ``events`` is a list of skeleton collections.  For each, the probability
    is that of the configurations whose s-large contours can be paired one to
    one with the skeletons, each contour compatible with its skeleton.  An
    empty collection gives the probability of having no s-large contour.
    """
    from .contour import contours_from_key
    from .skeleton import check_compatible

    if law.boundary is Boundary.FREE:
        raise ValueError("contours need a plus or minus boundary")
    events = [list(e) for e in events]
    if len(events) > 63:
        raise ValueError("at most 63 events per pass")
    L = law.L
    masks = [_event_masks(L, ev, s) for ev in events]
    live = [k for k, (al, _) in enumerate(masks) if al is not None]
    width = max([len(masks[k][1]) for k in live] + [1])
    allowed = np.zeros(len(live), dtype=np.int64)
    required = np.zeros((len(live), width), dtype=np.int64)
    n_target = np.zeros(len(live), dtype=np.int64)
    for r, k in enumerate(live):
        allowed[r] = _to_int64(masks[k][0])
        for q, m in enumerate(masks[k][1]):
            required[r, q] = _to_int64(m)
        n_target[r] = len(events[k])
    d2min = math.ceil((2.0 * s) ** 2 - 1e-9)
    out = [0.0] * len(events)
    if not live:
        return out
    keys, weights, _, flags = _kernels.large_contour_census(
        L, law.boundary.spin, float(law.beta), d2min, allowed, required, n_target
    )
    scale = math.exp(-(law.log_Z - law.beta * law.bond_count))
    parts = [[] for _ in events]
    for key, w, fl in zip(keys.tolist(), weights.tolist(), flags.tolist()):
        contours = None
        for r, k in enumerate(live):
            if not (fl >> r) & 1:
                continue
            if contours is None:
                contours = contours_from_key(L, key & ((1 << 64) - 1))
                large = tuple(c for c in contours if c.diam2 >= d2min)
            skel = events[k]
            if not skel or any(
                all(check_compatible(g, S) for g, S in zip(large, perm))
                for perm in itertools.permutations(skel)
            ):
                parts[k].append(w * scale)
    return [min(1.0, math.fsum(p)) for p in parts]


def skeleton_event_probability(law: ExactLaw, skeletons, s: float) -> float:
    """Exact probability that the s-large contours match ``skeletons``."""
    return skeleton_event_probabilities(law, [list(skeletons)], s)[0]


def binomial_pmf_uniform(L: int) -> dict:
    """Magnetization law at beta = 0 (uniform spins)."""
    n = L * L
    return {n - 2 * k: float(comb(n, k, exact=True)) / 2.0 ** n for k in range(n + 1)}
