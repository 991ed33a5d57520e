"""Two-queue consensus/network example and product-form checks.

Queue P holds TXs waiting for a two-slot block; queue N disseminates
them. A P service emits a positive signal into N, and N's triggered s+
departure returns to P as a negative signal that pulls a second TX into
the same block. Routing that signal with probability ρ_N and adding the
empty-state emission makes both queues quasi-reversible.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ..errors import TruncationTooSmall, UnstableInput
from .ctmc import ARRIVAL, DEPARTURE, CtmcModel, build, stationary

TAIL_GUARD = 1e-8


class UnstableTandem(UnstableInput):
    pass


@dataclass(frozen=True)
class TandemTraffic:
    rho_p: float
    rho_n: float
    alpha_pc: float
    alpha_ps_neg: float
    alpha_nc: float
    alpha_ns_pos: float


@dataclass(frozen=True)
class TandemModel:
    model: CtmcModel
    traffic: TandemTraffic
    marginal_p: np.ndarray
    marginal_n: np.ndarray
    variant: str

    @property
    def predicted(self) -> tuple:
        return self.marginal_p, self.marginal_n


def tandem_traffic(lambda_p, lambda_n, mu_p, mu_n) -> TandemTraffic:
    """Solve the traffic equations: ρ_P(1 + ρ_P) = λ_P/μ_P.

    Every TX leaving P enters N as a customer, so N's load is
    (λ_N + λ_P)/μ_N.
    """
    if min(mu_p, mu_n) <= 0 or min(lambda_p, lambda_n) < 0:
        raise ValueError("service rates must be > 0 and arrival rates ≥ 0")
    rho_p = (-1.0 + math.sqrt(1.0 + 4.0 * lambda_p / mu_p)) / 2.0
    pos = rho_p * mu_p
    neg = pos
    alpha_nc = lambda_n + rho_p * neg
    rho_n = (alpha_nc + pos) / mu_n
    if rho_p >= 1 or rho_n >= 1:
        raise UnstableTandem(f"loads rho_p={rho_p:.4g}, rho_n={rho_n:.4g}")
    return TandemTraffic(rho_p, rho_n, lambda_p, neg, alpha_nc, pos)


def tandem_fig1(lambda_p, lambda_n, mu_p, mu_n, k: int = 80, variant: str = "qr") -> TandemModel:
    """Joint chain on (n_P, n_N).

    ``variant="qr"``: the N-side s+ departure reaches P with probability
    ρ_N and N emits s+ at rate ρ_P μ_P when empty. ``variant="plain"``:
    deterministic routing and no extra emission.
    """
    tr = tandem_traffic(lambda_p, lambda_n, mu_p, mu_n)
    if variant not in ("qr", "plain"):
        raise ValueError("variant must be 'qr' or 'plain'")
    r = tr.rho_n if variant == "qr" else 1.0
    extra = tr.alpha_ns_pos if variant == "qr" else 0.0

    def rule(s):
        p, n = s
        yield (p + 1, n), lambda_p, ARRIVAL, "P", ()
        yield (p, n + 1), lambda_n, ARRIVAL, "N", ()
        if p >= 1:
            # the served TX enters N; the returning signal may pull one more
            yield (p - 1, n + 1), mu_p * (1 - r), DEPARTURE, "P", ()
            if p >= 2:
                yield (p - 2, n + 2), mu_p * r, DEPARTURE, "P", ()
            else:
                yield (0, n + 1), mu_p * r, DEPARTURE, "P", ()
        if n >= 1:
            yield (p, n - 1), mu_n, DEPARTURE, "N", ()
        elif p >= 1:
            yield (p - 1, 1), extra, DEPARTURE, "N", ()

    model = build((k, k), rule)
    kk = np.arange(k + 1)
    mp = (1 - tr.rho_p) * tr.rho_p**kk
    mn = (1 - tr.rho_n) * tr.rho_n**kk
    return TandemModel(model, tr, mp, mn, variant)


def independent_pair(a1, mu1, a2, mu2, k: int = 60) -> CtmcModel:
    def rule(s):
        x, y = s
        yield (x + 1, y), a1, ARRIVAL, "1", ()
        yield (x, y + 1), a2, ARRIVAL, "2", ()
        if x:
            yield (x - 1, y), mu1, DEPARTURE, "1", ()
        if y:
            yield (x, y - 1), mu2, DEPARTURE, "2", ()

    return build((k, k), rule)


def marginals(model: CtmcModel, pi: np.ndarray) -> list:
    joint = pi.reshape(model.shape)
    axes = range(joint.ndim)
    return [joint.sum(axis=tuple(a for a in axes if a != j)) for j in axes]


def verify_product_form(model, pi=None, predicted=None) -> float:
    """L1 distance on interior states between the joint law and the
    product of the marginals (its own, or ``predicted`` ones).

    Raises TruncationTooSmall when the boundary carries ≥ 1e-8 mass.
    """
    if isinstance(model, TandemModel):
        model = model.model
    if pi is None:
        pi = stationary(model)
    boundary = model.boundary_mask()
    tail = float(pi[boundary].sum())
    if tail >= TAIL_GUARD:
        raise TruncationTooSmall(f"boundary mass {tail:.3g} ≥ {TAIL_GUARD}")
    margs = marginals(model, pi) if predicted is None else [np.asarray(m) for m in predicted]
    prod = margs[0]
    for m in margs[1:]:
        prod = np.multiply.outer(prod, m)
    diff = np.abs(pi - prod.ravel())
    return float(diff[~boundary].sum())
