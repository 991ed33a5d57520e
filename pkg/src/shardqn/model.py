"""Shared value types for the sharding model, its traffic solution and
the simulator configuration/report."""
from __future__ import annotations

import math
import numbers
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

FULL = "full"
COMPUTATION = "computation"
MODES = (FULL, COMPUTATION)


@dataclass(frozen=True)
class ShardingParams:
    """System parameters. Rates are in 1/s.

    ``m`` may be ``math.inf`` to request the many-shard limit in the
    closed forms. ``dest_dist[k]`` is the probability that a TX carries
    ``k + 1`` destination fields.
    """

    m: float = 1
    b: int = 1
    mu_p: float = 1.0
    mu_nc: float = math.inf
    zeta: float = 1.0
    dest_dist: tuple = (1.0,)
    gamma: float = 1.0
    mu_nh: Optional[float] = None

    def __post_init__(self):
        try:
            object.__setattr__(self, "dest_dist", tuple(float(x) for x in self.dest_dist))
        except TypeError:
            pass

    @property
    def d_max(self) -> int:
        return len(self.dest_dist)

    @property
    def u(self) -> int:
        if math.isinf(self.m):
            return self.d_max - 1
        return min(int(self.m) - 1, self.d_max) - 1

    @property
    def mean_d(self) -> float:
        return float(sum((k + 1) * w for k, w in enumerate(self.dest_dist)))

    @property
    def mu_ns(self) -> float:
        return self.zeta * self.mu_nc

    @property
    def mu_nb(self) -> float:
        return self.mu_ns / self.b

    @property
    def finite_m(self) -> int:
        if math.isinf(self.m):
            raise ValueError("operation needs a finite shard count")
        return int(self.m)


def _is_int(x) -> bool:
    return isinstance(x, numbers.Integral) and not isinstance(x, bool)


def _is_real(x) -> bool:
    return isinstance(x, numbers.Real) and not isinstance(x, bool)


def validate(p) -> list:
    """Return every invariant violation of ``p``; an empty list means ok.

    Never raises, whatever ``p`` is.
    """
    out = []

    def check(cond, msg):
        try:
            if not cond():
                out.append(msg)
        except Exception:
            out.append(msg)

    if not isinstance(p, ShardingParams):
        return [f"expected ShardingParams, got {type(p).__name__}"]
    check(lambda: (_is_int(p.m) and p.m >= 1) or (_is_real(p.m) and math.isinf(p.m) and p.m > 0),
          "m ≥ 1 (integer, or inf for the many-shard limit)")
    check(lambda: _is_int(p.b) and p.b >= 1, "b ≥ 1")
    check(lambda: _is_real(p.mu_p) and math.isfinite(p.mu_p) and p.mu_p > 0, "mu_p > 0")
    check(lambda: _is_real(p.mu_nc) and p.mu_nc > 0 and not math.isnan(p.mu_nc), "mu_nc > 0")
    check(lambda: _is_real(p.zeta) and math.isfinite(p.zeta) and p.zeta > 0, "zeta > 0")
    check(lambda: _is_real(p.gamma) and 0 < p.gamma <= 1, "gamma in (0, 1]")
    check(lambda: p.mu_nh is None or (_is_real(p.mu_nh) and math.isfinite(p.mu_nh) and p.mu_nh > 0),
          "mu_nh > 0 when given")
    d = p.dest_dist
    check(lambda: isinstance(d, tuple) and len(d) >= 1, "dest_dist non-empty")
    check(lambda: all(_is_real(x) and math.isfinite(x) and x >= 0 for x in d), "dest_dist entries ≥ 0")
    check(lambda: abs(math.fsum(d) - 1.0) <= 1e-12, "dest_dist sums to 1")
    return out


def require_valid(p: ShardingParams) -> None:
    errs = validate(p)
    if errs:
        raise ValueError("invalid ShardingParams: " + "; ".join(errs))


@dataclass(frozen=True)
class TrafficSolution:
    lam: float
    rho_p: float
    alpha_pc: float
    alpha_ps_neg: np.ndarray
    alpha_ns_pos: np.ndarray
    alpha_nck: np.ndarray
    r_stage: np.ndarray
    rho_nc: float
    rho_ns: float
    rho_n: float
    mean_block: float
    mode: str = FULL
    gamma_ok: Optional[bool] = None

    @property
    def alpha_nc(self) -> float:
        return float(self.alpha_nck.sum())


@dataclass(frozen=True)
class SimConfig:
    """One simulation run.

    ``window`` defaults to horizon/20. ``drift_tol`` is the net inflow
    (jobs/s per consensus queue) above which the cumulative drift counts
    as growth. ``detector`` is "pooled" (mean over consensus queues) or
    "any" (any single queue). ``initial_backlog`` jobs are placed in every
    consensus queue at time zero, each an RX with probability
    ``backlog_rx_fraction`` and a TX otherwise.
    """

    params: ShardingParams
    lam: float
    mode: str = FULL
    horizon: float = 1e5
    warmup: float = 1e4
    seed: int = 0
    window: Optional[float] = None
    aggregate_blocks: bool = False
    initial_backlog: int = 0
    backlog_rx_fraction: float = 0.0
    drift_tol: float = 0.025
    persist: int = 3
    detector: str = "pooled"
    max_backlog: int = 10_000_000

    @property
    def window_len(self) -> float:
        return self.horizon / 20 if self.window is None else float(self.window)

    def violations(self) -> list:
        out = list(validate(self.params))
        if not out and math.isinf(self.params.m):
            out.append("simulation needs a finite m")
        if not out and not math.isfinite(self.params.mu_nc):
            out.append("simulation needs a finite mu_nc")
        if not (_is_real(self.lam) and math.isfinite(self.lam) and self.lam >= 0):
            out.append("lam ≥ 0")
        if self.mode not in MODES:
            out.append(f"mode in {MODES}")
        if not (self.horizon > self.warmup > 0):
            out.append("horizon > warmup > 0")
        elif not (0 < self.window_len <= self.horizon - self.warmup):
            out.append("0 < window ≤ horizon − warmup")
        if self.detector not in ("pooled", "any"):
            out.append("detector in ('pooled', 'any')")
        if not (_is_int(self.persist) and self.persist >= 1):
            out.append("persist ≥ 1")
        if not (_is_int(self.initial_backlog) and self.initial_backlog >= 0):
            out.append("initial_backlog ≥ 0")
        if not (_is_real(self.backlog_rx_fraction) and 0 <= self.backlog_rx_fraction <= 1):
            out.append("backlog_rx_fraction in [0, 1]")
        return out


@dataclass(frozen=True)
class SimReport:
    """Statistics of one run; counts and time averages cover [warmup, horizon]."""

    config: SimConfig
    cons_arrivals: np.ndarray
    cons_departures: np.ndarray
    cons_utilization: np.ndarray
    cons_mean_length: np.ndarray
    net_arrivals_c: np.ndarray
    net_arrivals_s: np.ndarray
    net_departures: np.ndarray
    net_utilization: np.ndarray
    net_mean_length: np.ndarray
    blocks: np.ndarray
    block_jobs: np.ndarray
    committed_tx: np.ndarray
    mean_block: float
    throughput: float
    rho_n_measured: float
    stable: bool
    drift: np.ndarray
    window_arrivals: np.ndarray
    window_departures: np.ndarray
    conservation_ok: bool
    truncated: bool
    events: int
    final_cons_length: np.ndarray
    final_net_length: np.ndarray
    extra: dict = field(default_factory=dict)

    def same_as(self, other: "SimReport") -> bool:
        for name in self.__dataclass_fields__:
            a, b = getattr(self, name), getattr(other, name)
            if isinstance(a, np.ndarray):
                if not np.array_equal(a, b):
                    return False
            elif a != b and not (isinstance(a, float) and math.isnan(a) and math.isnan(b)):
                return False
        return True
