"""Single queues with negative and positive signals and their
quasi-reversibility check."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .ctmc import ARRIVAL, DEPARTURE, CtmcModel, build, residual, stationary

CUSTOMER, NEGATIVE, POSITIVE = "c", "s-", "s+"


@dataclass(frozen=True)
class SignalQueueSpec:
    """Exponential single-server queue fed by customers and signals.

    A negative signal removes one customer (position drawn from
    ``removal(n)``, head by default) and triggers an s- departure with
    probability ``negative_trigger``; at an empty queue it vanishes. A
    positive signal adds a customer and triggers an s+ departure with
    probability ``positive_trigger``. With ``extra_departure`` the empty
    queue also emits s+ at rate α⁺/ρ.
    """

    arrival_rate: float
    service_rate: float
    negative_rate: float = 0.0
    positive_rate: float = 0.0
    negative_trigger: float = 1.0
    positive_trigger: float = 1.0
    extra_departure: bool = False
    removal: Optional[Callable[[int], np.ndarray]] = field(default=None, compare=False)

    @property
    def load(self) -> float:
        return (self.arrival_rate + self.positive_rate) / (self.service_rate + self.negative_rate)

    def check(self, k: int) -> None:
        for name in ("arrival_rate", "service_rate", "negative_rate", "positive_rate"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be ≥ 0")
        for f in (self.negative_trigger, self.positive_trigger):
            if not 0 <= f <= 1:
                raise ValueError("trigger probabilities must lie in [0, 1]")
        if self.removal is not None:
            for n in range(1, k + 1):
                eta = np.asarray(self.removal(n), float)
                if eta.shape != (n,) or np.any(eta < 0) or abs(eta.sum() - 1) > 1e-12:
                    raise ValueError(f"removal distribution for n={n} must sum to 1")


def build_signal_queue(spec: SignalQueueSpec, k: int) -> CtmcModel:
    spec.check(k)
    a, mu = spec.arrival_rate, spec.service_rate
    an, ap = spec.negative_rate, spec.positive_rate
    rho = spec.load
    extra = ap / rho if spec.extra_departure and rho > 0 else 0.0

    def rule(s):
        (n,) = s
        yield (n + 1,), a, ARRIVAL, CUSTOMER, ()
        if n > 0:
            # which customer goes does not change the count
            yield (n - 1,), an, ARRIVAL, NEGATIVE, ((NEGATIVE, spec.negative_trigger),)
            yield (n - 1,), mu, DEPARTURE, CUSTOMER, ()
        else:
            yield (0,), an, ARRIVAL, NEGATIVE, ()
            yield (0,), extra, DEPARTURE, POSITIVE, ()
        yield (n + 1,), ap, ARRIVAL, POSITIVE, ((POSITIVE, spec.positive_trigger),)

    return build((k,), rule)


@dataclass(frozen=True)
class QrReport:
    arrival_rates: dict
    departure_rates: dict
    beta: dict
    max_arrival_violation: float
    max_departure_violation: float
    truncation_tail_mass: float
    pi: np.ndarray
    residual: float

    def ok(self, tol: float = 1e-6) -> bool:
        return max(self.max_arrival_violation, self.max_departure_violation) <= tol


def departure_rates(model: CtmcModel, pi: np.ndarray) -> dict:
    """β_u(x) = Σ_x' π(x')(q_u^D(x', x) + Σ_v q_v^A(x', x) f_{v,u}) / π(x)."""
    flows = {}
    for t in model.transitions:
        if t.kind == DEPARTURE:
            flows.setdefault(t.label, np.zeros(model.n))[t.dst] += pi[t.src] * t.rate
        for u, f in t.triggers:
            flows.setdefault(u, np.zeros(model.n))[t.dst] += pi[t.src] * t.rate * f
    with np.errstate(divide="ignore", invalid="ignore"):
        return {u: np.where(pi > 0, v / pi, np.nan) for u, v in flows.items()}


def _spread(v, mask):
    v = v[mask]
    v = v[np.isfinite(v)]
    return float(v.max() - v.min()) if v.size else 0.0


def qr_report(model: CtmcModel, pi: Optional[np.ndarray] = None) -> QrReport:
    if pi is None:
        pi = stationary(model)
    interior = ~model.boundary_mask()
    arr = {}
    for u in model.labels(ARRIVAL):
        arr[u] = np.asarray(model.rates_by(ARRIVAL, u).sum(axis=1)).ravel()
    dep = departure_rates(model, pi)
    beta = {}
    for u, v in dep.items():
        w = pi[interior]
        beta[u] = float(np.nansum(w * v[interior]) / w.sum())
    return QrReport(
        arrival_rates=arr,
        departure_rates=dep,
        beta=beta,
        max_arrival_violation=max((_spread(v, interior) for v in arr.values()), default=0.0),
        max_departure_violation=max((_spread(v, interior) for v in dep.values()), default=0.0),
        truncation_tail_mass=float(pi[~interior].sum()),
        pi=pi,
        residual=residual(model, pi),
    )


def check_qr(spec: SignalQueueSpec, k: int) -> QrReport:
    """Check that arrival rates and departure rates are state independent.

    Violations are the spread of each class's rate over non-boundary
    states. The boundary level k is excluded since truncation breaks
    constancy there.
    """
    return qr_report(build_signal_queue(spec, k))
