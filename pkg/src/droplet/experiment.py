"""Droplet sweeps: from a deficit parameter to measured droplet statistics.

For each deficit parameter the driver converts Delta into a deficit volume
v_L, fixes the total magnetization at m* L^2 - 2 m* v_L, samples the
canonical ensemble with independent chains and classifies every sample:

* event A: every external s-large contour has diameter > kappa*sqrt(v_L);
* event B: at most one external s-large contour, and if present it is
  close to a scaled Wulff shape, holds a near-optimal fraction of the
  deficit and its interior magnetization is close to -m*.
"""

from __future__ import annotations

import csv
import dataclasses
import functools
import io
import json
import math
import sys
from dataclasses import dataclass, field
from pathlib import Path
from typing import List, Optional

import numpy as np

from .contour import extract_contours, external_contours, interior_magnetization, s_large
from .lattice import SpinGrid, deficit_target
from .sampler import ChainParams, SamplerConsistencyError, estimate_bulk, sample_canonical
from .stats import wilson_interval
from .variational import PhiParams, delta_c, minimize_phi
from .wulff import SurfaceTension, WulffShape, build_wulff, fit_shape

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

__all__ = [
    "ConfigError",
    "ExperimentConfig",
    "SampleRecord",
    "SweepSummary",
    "v_from_delta",
    "delta_from_v",
    "classify_events",
    "rederive_events",
    "run_sweep",
    "SUMMARY_HEADER",
]

SUMMARY_HEADER = [
    "delta", "v_L", "lambda_theory", "lambda_hat_median", "lambda_hat_iqr",
    "frac_droplet", "frac_A", "frac_B", "w1", "m_star", "chi",
]
ERROR_HEADER = [
    "delta", "delta_err", "aborted", "n_samples", "lambda_hat_median_err",
    "frac_droplet_lo", "frac_droplet_hi", "frac_A_lo", "frac_A_hi", "frac_B_lo", "frac_B_hi",
    "w1_err", "m_star_err", "chi_err",
]


class ConfigError(ValueError):
    """Invalid experiment configuration."""


@dataclass(frozen=True)
class ExperimentConfig:
    beta: float
    L: int
    delta_values: tuple
    delta_units: str = "absolute"  # or "delta_c": values are multiples of delta_c
    K: float = 3.0
    kappa: float = 0.3
    epsilon: float = 0.1
    tau_source: str = "dual_estimated"
    tau0: float = 1.0
    bulk_source: str = "measured"
    m_star: Optional[float] = None
    chi: Optional[float] = None
    bulk_sweeps: int = 4000
    bulk_thermalization: int = 500
    chains: int = 8
    sweeps: int = 10000
    thermalization: int = 2000
    stride: int = 100
    seed: int = 0
    rho: float = 0.25
    n_directions: int = 1024
    bootstrap: int = 1000

    def __post_init__(self):
        object.__setattr__(self, "delta_values", tuple(float(x) for x in self.delta_values))
        bad = []
        if not self.beta > 0:
            bad.append("beta must be positive")
        if self.L < 2:
            bad.append("L must be at least 2")
        if not self.delta_values or any(not x > 0 for x in self.delta_values):
            bad.append("delta_values must be a nonempty list of positive numbers")
        if self.delta_units not in ("absolute", "delta_c"):
            bad.append("delta_units must be 'absolute' or 'delta_c'")
        if not 0 < self.kappa < 1:
            bad.append("kappa must lie in (0, 1)")
        if not self.epsilon > 0:
            bad.append("epsilon must be positive")
        if not self.K > 0:
            bad.append("K must be positive")
        if self.tau_source not in ("constant", "dual_estimated"):
            bad.append("tau_source must be 'constant' or 'dual_estimated'")
        if not self.tau0 > 0:
            bad.append("tau0 must be positive")
        if self.bulk_source not in ("measured", "provided"):
            bad.append("bulk_source must be 'measured' or 'provided'")
        if self.bulk_source == "provided" and not (
            self.m_star is not None and self.chi is not None and self.m_star > 0 and self.chi > 0
        ):
            bad.append("bulk_source='provided' needs positive m_star and chi")
        for name in ("chains", "sweeps", "stride", "bulk_sweeps"):
            if getattr(self, name) < 1:
                bad.append(f"{name} must be positive")
        if self.thermalization < 0 or self.bulk_thermalization < 0:
            bad.append("thermalization must be nonnegative")
        if not 0 < self.rho < 1:
            bad.append("rho must lie in (0, 1)")
        if bad:
            raise ConfigError("; ".join(bad))

    @property
    def s(self) -> float:
        """Scale K * ln L for the s-large cut."""
        return self.K * math.log(self.L)

    def deltas(self) -> List[float]:
        f = delta_c(2) if self.delta_units == "delta_c" else 1.0
        return [x * f for x in self.delta_values]

    @classmethod
    def from_dict(cls, data: dict) -> "ExperimentConfig":
        names = {f.name for f in dataclasses.fields(cls)}
        unknown = sorted(set(data) - names)
        if unknown:
            raise ConfigError(f"unknown config keys: {', '.join(unknown)}")
        try:
            return cls(**data)
        except TypeError as exc:
            raise ConfigError(str(exc)) from exc

    @classmethod
    def from_toml(cls, path) -> "ExperimentConfig":
        try:
            with open(path, "rb") as fh:
                data = tomllib.load(fh)
        except (OSError, tomllib.TOMLDecodeError) as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        return cls.from_dict(data)


@dataclass
class SampleRecord:
    delta: float
    chain: int
    index: int
    M: int
    n_s_large: int
    min_large_diameter: Optional[float]
    max_large_diameter: Optional[float]
    droplet: bool
    largest: Optional[dict]
    event_A: bool
    event_B: bool

    def to_json(self) -> str:
        return json.dumps(dataclasses.asdict(self), sort_keys=True)


def v_from_delta(delta, m_star, chi, w1, L, rho=0.25) -> float:
    """Deficit volume v with 2 m*^2 v^(3/2) / (chi w1 L^2) = delta."""
    for name, val in (("delta", delta), ("m_star", m_star), ("chi", chi), ("w1", w1), ("L", L)):
        if not val > 0:
            raise ValueError(f"{name} must be positive")
    v = (delta * chi * w1 * L * L / (2.0 * m_star * m_star)) ** (2.0 / 3.0)
    if v >= rho * L * L:
        raise ValueError(f"deficit v={v:.4g} is not below {rho} L^2 = {rho * L * L:.4g}")
    return v


def delta_from_v(v, m_star, chi, w1, L) -> float:
    return 2.0 * m_star * m_star * v ** 1.5 / (chi * w1 * L * L)


def _phi_raw(lam, delta):
    # the rate function extended past lambda = 1 for overfull droplets
    return math.sqrt(lam) + delta * (1.0 - lam) ** 2


def classify_events(grid: SpinGrid, cfg: ExperimentConfig, v_L: float, W: WulffShape,
                    context: dict, chain: int = 0, index: int = 0) -> SampleRecord:
    """Evaluate the droplet events on one configuration."""
    m_star = float(context["m_star"])
    delta = float(context["delta"])
    phi_star = context.get("phi_star")
    if phi_star is None:
        phi_star = minimize_phi(PhiParams(delta)).phi_star
    cs = extract_contours(grid, mark_external=False)
    ext = external_contours(s_large(cs, cfg.s))
    thresh = cfg.kappa * math.sqrt(v_L)
    diams = [c.diameter for c in ext]
    event_A = all(d > thresh for d in diams)
    droplet = any(d > thresh for d in diams)
    largest = None
    event_B = len(ext) <= 1
    if len(ext):
        g0 = max(ext, key=lambda c: (c.interior_area, c.diameter))
        vol = g0.interior_area
        lam = vol / v_L
        fit = fit_shape(g0.interior_sites, W)
        dev = abs(interior_magnetization(grid, g0) + m_star * vol)
        largest = {
            "volume": int(vol),
            "diameter": float(g0.diameter),
            "lambda_hat": float(lam),
            "shape_distance": float(fit.best_distance),
            "interior_mag_deviation": float(dev),
            "phi_lambda_hat": float(_phi_raw(lam, delta)),
        }
        if event_B:
            event_B = _conditions(largest, v_L, cfg.epsilon, phi_star)
    return SampleRecord(
        delta=delta, chain=int(chain), index=int(index), M=int(grid.magnetization),
        n_s_large=len(ext), min_large_diameter=min(diams) if diams else None,
        max_large_diameter=max(diams) if diams else None,
        droplet=bool(droplet), largest=largest, event_A=bool(event_A), event_B=bool(event_B),
    )


def _conditions(largest, v_L, eps, phi_star) -> bool:
    shape_ok = largest["shape_distance"] <= math.sqrt(eps * v_L)
    vol_ok = largest["phi_lambda_hat"] <= phi_star + eps
    mag_ok = largest["interior_mag_deviation"] <= eps * v_L
    return bool(shape_ok and vol_ok and mag_ok)


def rederive_events(rec: SampleRecord, cfg: ExperimentConfig, v_L: float, phi_star: float):
    """Recompute (event_A, event_B, droplet) from the stored record fields."""
    thresh = cfg.kappa * math.sqrt(v_L)
    if rec.n_s_large == 0:
        return True, True, False
    a = rec.min_large_diameter > thresh
    droplet = rec.max_large_diameter > thresh
    b = rec.n_s_large == 1 and _conditions(rec.largest, v_L, cfg.epsilon, phi_star)
    return a, b, droplet


# --- sweep -----------------------------------------------------------------------

@functools.lru_cache(maxsize=8)
def _dual_tension(beta):
    return SurfaceTension.dual_estimated(beta)


def _tension(cfg: ExperimentConfig):
    if cfg.tau_source == "constant":
        return SurfaceTension.constant(cfg.tau0), 0.0
    st = _dual_tension(cfg.beta)
    rel = max(abs(e["error"] / e["tau"]) for e in st.params["estimates"] if np.isfinite(e["error"]))
    return st, rel


@dataclass
class SweepSummary:
    rows: list
    errors: list
    records: list = field(repr=False)
    histograms: dict = field(default_factory=dict, repr=False)

    @property
    def aborted(self) -> bool:
        return any(e["aborted"] for e in self.errors)

    def summary_csv(self) -> str:
        return _csv(SUMMARY_HEADER, self.rows)

    def errors_csv(self) -> str:
        return _csv(ERROR_HEADER, self.errors)

    def records_jsonl(self) -> str:
        recs = sorted(self.records, key=lambda r: (r.delta, r.chain, r.index))
        return "".join(r.to_json() + "\n" for r in recs)

    def write(self, out_dir) -> None:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        (out / "summary.csv").write_text(self.summary_csv())
        (out / "summary_errors.csv").write_text(self.errors_csv())
        (out / "records.jsonl").write_text(self.records_jsonl())
        (out / "lambda_histograms.json").write_text(json.dumps(self.histograms, sort_keys=True) + "\n")


def _fmt(x):
    if isinstance(x, bool):
        return str(int(x))
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return repr(float(x))


def _csv(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        w.writerow([_fmt(r[h]) for h in header])
    return buf.getvalue()


def _bootstrap_median(per_chain, n_boot, rng):
    """Standard error of the pooled median, resampling whole chains."""
    chains = [np.asarray(c, dtype=float) for c in per_chain if len(c)]
    if len(chains) < 2:
        return float("nan")
    meds = np.empty(n_boot)
    for b in range(n_boot):
        pick = rng.integers(0, len(chains), len(chains))
        meds[b] = np.median(np.concatenate([chains[i] for i in pick]))
    return float(meds.std(ddof=1))


def run_sweep(cfg: ExperimentConfig, progress=None) -> SweepSummary:
    """Run every deficit point of the configuration; see the module docstring."""
    from .sampler import make_rng

    L = cfg.L
    if cfg.bulk_source == "measured":
        bulk = estimate_bulk(cfg.beta, L, ChainParams(cfg.beta, cfg.bulk_sweeps, cfg.bulk_thermalization,
                                                      seed=cfg.seed))
        m_star, m_err, chi, chi_err = bulk.m_star_hat, bulk.m_star_err, bulk.chi_hat, bulk.chi_err
    else:
        m_star, m_err, chi, chi_err = cfg.m_star, 0.0, cfg.chi, 0.0
    tau, tau_rel = _tension(cfg)
    W = build_wulff(tau, cfg.n_directions)
    w1 = W.w1
    w1_err = w1 * tau_rel
    rel_delta = math.sqrt((chi_err / chi) ** 2 + tau_rel ** 2 + (2 * m_err / m_star) ** 2)

    rows, errors, records, hists = [], [], [], {}
    for i, delta in enumerate(cfg.deltas()):
        sol = minimize_phi(PhiParams(delta))
        base = {"delta": delta, "lambda_theory": sol.lambda_delta, "w1": w1, "m_star": m_star, "chi": chi}
        err = {"delta": delta, "delta_err": delta * rel_delta, "w1_err": w1_err,
               "m_star_err": m_err, "chi_err": chi_err}
        try:
            v = v_from_delta(delta, m_star, chi, w1, L, cfg.rho)
            target = deficit_target(m_star, L, v).target_M
            params = ChainParams(cfg.beta, cfg.sweeps, cfg.thermalization, cfg.stride,
                                 seed=cfg.seed, target_M=target)
            ctx = {"m_star": m_star, "delta": delta, "phi_star": sol.phi_star}
            per_chain = []
            recs = []
            for c in range(cfg.chains):
                lam_c = []
                for k, grid in enumerate(sample_canonical(params, L, chain=c, stream=(1, i))):
                    rec = classify_events(grid, cfg, v, W, ctx, chain=c, index=k)
                    recs.append(rec)
                    lam_c.append(rec.largest["lambda_hat"] if rec.largest else 0.0)
                per_chain.append(lam_c)
                if progress:
                    progress(f"delta={delta:.4f} chain {c + 1}/{cfg.chains} done")
        except (SamplerConsistencyError, ValueError) as exc:
            rows.append({**base, "v_L": float("nan"), "lambda_hat_median": float("nan"),
                         "lambda_hat_iqr": float("nan"), "frac_droplet": float("nan"),
                         "frac_A": float("nan"), "frac_B": float("nan")})
            errors.append({**err, "aborted": True, "n_samples": 0, "lambda_hat_median_err": float("nan"),
                           **{f"{k}_{e}": float("nan") for k in ("frac_droplet", "frac_A", "frac_B")
                              for e in ("lo", "hi")}})
            hists[repr(delta)] = {"aborted": str(exc)}
            continue
        records.extend(recs)
        lam = np.array([x for ch in per_chain for x in ch])
        n = len(recs)
        counts = {
            "frac_droplet": sum(r.droplet for r in recs),
            "frac_A": sum(r.event_A for r in recs),
            "frac_B": sum(r.event_B for r in recs),
        }
        q1, med, q3 = np.percentile(lam, [25, 50, 75]) if n else (np.nan,) * 3
        rows.append({**base, "v_L": v, "lambda_hat_median": float(med), "lambda_hat_iqr": float(q3 - q1),
                     **{k: cnt / n for k, cnt in counts.items()}})
        ci = {}
        for k, cnt in counts.items():
            ci[f"{k}_lo"], ci[f"{k}_hi"] = wilson_interval(cnt, n)
        boot_rng = make_rng(cfg.seed, 2, i)
        errors.append({**err, "aborted": False, "n_samples": n,
                       "lambda_hat_median_err": _bootstrap_median(per_chain, cfg.bootstrap, boot_rng), **ci})
        edges = np.linspace(0.0, 1.5, 31)
        h, _ = np.histogram(np.clip(lam, 0, 1.5), bins=edges)
        hists[repr(delta)] = {"edges": edges.tolist(), "counts": h.tolist()}
    return SweepSummary(rows, errors, records, hists)
