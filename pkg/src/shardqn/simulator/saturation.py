"""Saturation search over the per-shard input rate, and the shard-count
search for computation sharding."""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Optional

from .. import combinatorics as cb
from ..model import COMPUTATION, SimConfig
from .engine import run


@dataclass(frozen=True)
class Probe:
    lam: float
    stable: bool
    drift: float
    horizon: float
    rho_p: float
    rho_n: float
    mean_block: float
    throughput: float


@dataclass
class SaturationResult:
    lam_sat: float
    step: float
    probes: list = field(default_factory=list)

    def verdicts(self) -> dict:
        return {p.lam: p.stable for p in self.probes}

    def at(self, lam: float) -> Optional[Probe]:
        """Longest-horizon probe at ``lam``, if one was run."""
        hits = [p for p in self.probes if abs(p.lam - lam) < 1e-9]
        return max(hits, key=lambda p: p.horizon) if hits else None


def _probe(lam, rep, horizon) -> Probe:
    d = rep.drift.mean(axis=1)[-1] if rep.drift.shape[0] else float("nan")
    return Probe(lam, rep.stable, float(d), horizon, float(rep.cons_utilization.mean()),
                 rep.rho_n_measured, rep.mean_block, rep.throughput)


def _rx_fraction(p) -> float:
    # share of RXs in a saturated consensus queue: E_i/(1 + E_i), where E_i
    # is the mean number of distinct foreign shards a TX touches
    m = p.finite_m
    e = float(sum(w * cb.expected_foreign_shards(m, d + 1) for d, w in enumerate(p.dest_dist) if w))
    return e / (1.0 + e)


def auto_horizon(p, step: float = 0.05) -> float:
    """Run length that brings the pooled drift noise down to half a step.

    Batch departures make the net inflow of one consensus queue vary like
    b²μ_P·t, so pooled over M queues the drift has standard deviation
    b·sqrt(μ_P/(M·T)).
    """
    return p.b ** 2 * p.mu_p / (p.finite_m * (step / 2) ** 2)


def probe_config(base: SimConfig, lam: float, step: float, backlog="auto") -> SimConfig:
    """Configuration used to judge one swept rate.

    With ``backlog="auto"`` every consensus queue starts with
    3·b·sqrt(μ_P·horizon) jobs, which keeps a critically loaded queue off
    its empty boundary (where reflection would fake a positive drift). The
    warmup is stretched to twice the time needed to serve that backlog.
    The drift threshold is half a sweep step.
    """
    p = base.params
    if backlog == "auto":
        backlog = int(math.ceil(3 * p.b * math.sqrt(p.mu_p * base.horizon)))
    backlog = int(backlog)
    warmup = base.warmup
    if backlog:
        warmup = max(warmup, 2.0 * backlog / (p.b * p.mu_p))
    if warmup >= base.horizon:
        raise ValueError("horizon too short for the requested backlog")
    window = base.window
    if window is not None and window > base.horizon - warmup:
        window = None
    if window is None:
        window = (base.horizon - warmup) / 20
    return replace(base, lam=float(lam), initial_backlog=backlog,
                   backlog_rx_fraction=_rx_fraction(p) if backlog else 0.0,
                   warmup=warmup, window=window, drift_tol=step / 2)


def saturation_search(base: SimConfig, step: float = 0.05, strategy: str = "bisect",
                      start: Optional[float] = None, backlog="auto",
                      coarse: float = 1 / 16, lam_cap: float = 1e6) -> SaturationResult:
    """Largest rate on the grid {step, 2·step, ...} judged stable.

    ``strategy="sweep"`` walks the grid upward from ``start`` until the
    first unstable rate. ``strategy="bisect"`` brackets by doubling and
    bisects on grid indices. A cheap pass at ``coarse`` times the horizon
    locates the boundary first; full-length runs then check the two grid
    points around it and widen the bracket only if one disagrees. All
    runs reuse the base seed.
    """
    if step <= 0:
        raise ValueError("step must be > 0")
    probes = []
    cache = {}

    def stable(k, cfg):
        key = (k, cfg.horizon)
        if key not in cache:
            lam = round(k * step, 12)
            if k <= 0:
                cache[key] = True
            else:
                rep = run(probe_config(cfg, lam, step, backlog))
                probes.append(_probe(lam, rep, cfg.horizon))
                cache[key] = rep.stable
        return cache[key]

    kmax = int(math.ceil(lam_cap / step))
    if strategy == "sweep":
        k = max(1, int(round((start or step) / step)))
        while k <= kmax and stable(k, base):
            k += 1
        return SaturationResult(round((k - 1) * step, 12), step, probes)
    if strategy != "bisect":
        raise ValueError("strategy must be 'sweep' or 'bisect'")

    def bisect(lo, hi, cfg):
        while hi - lo > 1:
            mid = (lo + hi) // 2
            if stable(mid, cfg):
                lo = mid
            else:
                hi = mid
        return lo

    def bracket(cfg, lo, hi):
        # widen [lo, hi] by doubling until lo is stable and hi is not
        width = max(hi - lo, 1)
        while lo > 0 and not stable(lo, cfg):
            hi = lo
            width *= 2
            lo = max(0, lo - width)
        while stable(hi, cfg):
            if hi >= kmax:
                return hi, hi + 1
            lo = hi
            width *= 2
            hi = min(hi + width, kmax)
        return lo, hi

    k0 = max(1, int(round(start / step))) if start else 1
    if 0 < coarse < 1:
        rough = replace(base, horizon=base.horizon * coarse, warmup=base.warmup * coarse,
                        window=None)
        k0 = bisect(*bracket(rough, k0 - 1, k0), rough)
        # the full-length runs start from the rough boundary
        lo, hi = bracket(base, k0, k0 + 1)
    else:
        lo, hi = bracket(base, k0 - 1, k0)
    return SaturationResult(round(bisect(lo, hi, base) * step, 12), step, probes)


def find_saturation_lambda(base: SimConfig, step: float = 0.05, **kw) -> float:
    """Largest swept per-shard rate at which no consensus queue saturates."""
    return saturation_search(base, step, **kw).lam_sat


def max_shards_search(base: SimConfig, gamma: float, lam="saturated",
                      m_start: int = 1, m_limit: int = 4096):
    """Increase M until the measured shared-network busy fraction reaches γ.

    With ``lam="saturated"`` each shard is driven at the smallest rate
    that fills every block (``saturating_rate``), so only the network
    cap ends the scan. With an explicit per-shard rate the scan also ends
    once consensus queues saturate. Returns the last compliant M (m_start
    − 1 if m_start already fails) and the report of every run, keyed by M.
    """
    if base.mode != COMPUTATION:
        raise ValueError("max_shards_by_simulation needs computation-sharding mode")
    reports = {}
    last = m_start - 1
    m = m_start
    while m <= m_limit:
        p = replace(base.params, m=m, gamma=gamma)
        rate = saturating_rate(p) if lam == "saturated" else float(lam)
        rep = reports[m] = run(replace(base, params=p, lam=rate))
        if rep.rho_n_measured >= gamma:
            break
        if lam != "saturated" and not rep.stable:
            break
        last = m
        m += 1
    return max(last, 0), reports


def max_shards_by_simulation(base: SimConfig, gamma: float, lam="saturated", **kw) -> int:
    return max_shards_search(base, gamma, lam, **kw)[0]


def saturating_rate(p) -> float:
    """bμ_P/(1 + E_i): the input that exactly fills every block."""
    e = _rx_fraction(p)
    return p.b * p.mu_p * (1.0 - e)
