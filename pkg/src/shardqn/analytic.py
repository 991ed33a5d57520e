"""Closed-form throughput limits and traffic-equation solutions for full
sharding and computation sharding."""
from __future__ import annotations

import math
from dataclasses import replace
from fractions import Fraction
from functools import lru_cache

import numpy as np

from . import combinatorics as cb
from .errors import NonConvergence, UnstableInput
from .model import COMPUTATION, FULL, ShardingParams, TrafficSolution, require_valid


def mean_block_size(rho: float, b: int) -> float:
    """(1 − ρ^b)/(1 − ρ), with the limit b at ρ = 1."""
    if rho == 1.0:
        return float(b)
    if rho == 0.0:
        return 1.0
    # -expm1(b log ρ) keeps full precision as ρ → 1
    return -math.expm1(b * math.log(rho)) / (1.0 - rho)


@lru_cache(maxsize=4096)
def _cross_load(m, dest_dist) -> float:
    if math.isinf(m):
        # every foreign pick lands on a distinct shard
        return float(math.fsum((k + 1) * w for k, w in enumerate(dest_dist)))
    m = int(m)
    total = Fraction(0)
    for k, w in enumerate(dest_dist):
        if w:
            total += Fraction(w) * cb.expected_foreign_shards(m, k + 1)
    return float(total)


def cross_shard_load(p: ShardingParams, m=None) -> float:
    """Expected number of RXs spawned per TX, E_i(M)."""
    return _cross_load(p.m if m is None else m, p.dest_dist)


def lambda_general(rho_p: float, p: ShardingParams) -> float:
    return rho_p * mean_block_size(rho_p, p.b) * p.mu_p / (1.0 + cross_shard_load(p))


def lambda_single(rho_p: float, p: ShardingParams) -> float:
    if p.dest_dist != (1.0,):
        raise ValueError("lambda_single needs the single-destination distribution")
    frac = 1.0 if math.isinf(p.m) else (p.m - 1) / p.m
    return rho_p * mean_block_size(rho_p, p.b) * p.mu_p / (1.0 + frac)


def lambda_max(p: ShardingParams) -> float:
    """Per-shard input rate at which the consensus queues saturate.

    This is an upper bound on the stable rate; it is tight when the
    network is much faster than block production (min(μ_Nc, μ_Ns) ≫ bμ_P).
    """
    return lambda_general(1.0, p)


def system_throughput(rho_p: float, p: ShardingParams) -> float:
    return p.m * lambda_general(rho_p, p)


def _solve_rho(lam, p, tol, max_iter):
    require_valid(p)
    p.finite_m
    if lam < 0 or math.isnan(lam):
        raise ValueError("lambda must be ≥ 0")
    lmax = lambda_max(p)
    if lam >= lmax:
        raise UnstableInput(f"lambda={lam} ≥ lambda_max={lmax}")
    if lam == 0:
        return 0.0
    lo, hi = 0.0, 1.0
    for _ in range(max_iter):
        mid = 0.5 * (lo + hi)
        if lambda_general(mid, p) < lam:
            lo = mid
        else:
            hi = mid
        if hi - lo <= tol:
            break
    else:
        raise NonConvergence(f"bisection did not reach tol={tol} in {max_iter} steps")
    # secant polish inside the final bracket
    flo, fhi = lambda_general(lo, p) - lam, lambda_general(hi, p) - lam
    if fhi != flo:
        x = lo - flo * (hi - lo) / (fhi - flo)
        if lo <= x <= hi:
            return x
    return 0.5 * (lo + hi)


def _stage_rates(lam, p):
    """R_N^k for k = 0..U: per-destination-shard stage-k signal rate."""
    if p.u < 0:
        return np.zeros(0)
    m = p.finite_m
    out = np.zeros(p.u + 1)
    for k in range(p.u + 1):
        acc = Fraction(0)
        for di, w in enumerate(p.dest_dist):
            d = di + 1
            if w and d >= k + 1:
                acc += Fraction(w) * Fraction(cb.distinct_shard_sets(m, d, k + 1), m**d)
        out[k] = lam * float(acc) / (m - 1)
    return out


def _reconstruct(lam, rho, p, mode):
    b = p.b
    i = np.arange(1, b + 1)
    ns_pos = rho ** (b - i + 1) * p.mu_p
    ps_neg = ns_pos[1:].copy()
    alpha_pc = float(math.fsum(ns_pos))
    r = _stage_rates(lam, p)
    if r.size == 0:
        nck = np.array([lam])
    else:
        m = p.finite_m
        nck = np.zeros(r.size)
        nxt = 0.0
        for k in range(r.size - 1, -1, -1):
            nxt = (lam if k == 0 else 0.0) + (m - 1) * r[k] + nxt
            nck[k] = nxt
    alpha_nc = float(math.fsum(nck))
    if mode == FULL:
        rho_nc = alpha_nc / p.mu_nc
        rho_ns = alpha_pc / p.mu_ns
        gamma_ok = None
    else:
        rho_nc = p.m * lam / p.mu_nc
        rho_ns = p.m * alpha_pc / p.mu_ns
        gamma_ok = bool(rho_nc + rho_ns < p.gamma)
    return TrafficSolution(
        lam=float(lam), rho_p=float(rho), alpha_pc=alpha_pc, alpha_ps_neg=ps_neg,
        alpha_ns_pos=ns_pos, alpha_nck=nck, r_stage=r, rho_nc=rho_nc, rho_ns=rho_ns,
        rho_n=rho_nc + rho_ns, mean_block=mean_block_size(rho, b), mode=mode,
        gamma_ok=gamma_ok,
    )


def solve_traffic_full(lam: float, p: ShardingParams, tol: float = 1e-12,
                       max_iter: int = 200) -> TrafficSolution:
    """Solve the full-sharding traffic equations for per-shard input ``lam``.

    ρ_P comes from bisection on the scalar throughput equation; every
    other rate is then reconstructed from it.
    """
    rho = _solve_rho(lam, p, tol, max_iter)
    return _reconstruct(lam, rho, p, FULL)


def solve_traffic_computation(lam: float, p: ShardingParams, tol: float = 1e-12,
                              max_iter: int = 200) -> TrafficSolution:
    """Computation sharding: private consensus queues, one shared network.

    The consensus side is identical to full sharding. RXs skip the
    network, so the shared queue sees Mλ raw TXs plus M·α_Pc block
    components. ``gamma_ok`` flags ρ_N < γ.
    """
    rho = _solve_rho(lam, p, tol, max_iter)
    return _reconstruct(lam, rho, p, COMPUTATION)


def traffic_residuals(sol: TrafficSolution, p: ShardingParams) -> dict:
    """Relative residual of each traffic equation in ``sol``."""

    def rel(a, b):
        a, b = np.asarray(a, float), np.asarray(b, float)
        if a.size == 0:
            return 0.0
        scale = np.maximum(np.maximum(abs(a), abs(b)), 1e-300)
        return float(np.max(abs(a - b) / scale))

    rho, mu_p, b = sol.rho_p, p.mu_p, p.b
    ns, ps = sol.alpha_ns_pos, sol.alpha_ps_neg
    out = {
        # consensus queue: utilization from class-c inflow and negative signals
        "rho_p": rel(sol.alpha_pc / (mu_p + ps.sum()) if sol.lam else 0.0, rho),
        "neg_signal_feed": rel(ps, ns[1:]),
        "full_block_departure": rel(ns[-1], rho * mu_p),
        "partial_block_chain": rel(ns[:-1], rho * ps) if b > 1 else 0.0,
        "block_components": rel(ns.sum(), sol.alpha_pc),
        "stage_backsub": 0.0,
    }
    if sol.lam == 0:
        return out
    out["network_to_consensus"] = rel(sol.alpha_nc, sol.alpha_pc)
    if sol.r_stage.size:
        m = p.finite_m
        nck, r = sol.alpha_nck, sol.r_stage
        nxt = np.append(nck[1:], 0.0)
        delta = np.zeros(nck.size)
        delta[0] = sol.lam
        out["stage_backsub"] = rel(nck, delta + (m - 1) * r + nxt)
        k = np.arange(1, r.size + 1)
        out["class_c_total"] = rel(nck.sum(), sol.lam + (m - 1) * np.sum(k * r))
    if sol.mode == FULL and math.isfinite(p.mu_nc):
        out["rho_nc"] = rel(sol.rho_nc * p.mu_nc, sol.alpha_nc)
        out["rho_ns"] = rel(sol.rho_ns * p.mu_ns, sol.alpha_pc)
    return out


def throughput_bound_computation(p: ShardingParams, m=None) -> float:
    """Upper bound on system throughput Mλ imposed by ρ_N < γ."""
    e = cross_shard_load(p, m)
    return p.gamma * p.mu_ns / (p.zeta + 1.0 + e)


def network_load_computation(p: ShardingParams, m: int, lam="saturated") -> float:
    """ρ_N of the shared network queue for M shards each offering λ."""
    q = replace(p, m=m)
    e = cross_shard_load(q)
    if lam == "saturated":
        alpha = p.b * p.mu_p
        lam_m = alpha / (1.0 + e)
    else:
        lam_m = float(lam)
        alpha = lam_m * (1.0 + e)
    return m * lam_m / p.mu_nc + m * alpha / p.mu_ns


def max_shards_computation(p: ShardingParams, lam="saturated", limit: int = 10**7) -> int:
    """Largest M keeping the shared network load below γ.

    With ``lam="saturated"`` each shard offers its consensus-saturation
    demand bμ_P. With an explicit per-shard λ the consensus queues must
    also stay stable (λ < λ_max(M)).
    """
    require_valid(p)
    if not (0 < p.gamma <= 1):
        raise ValueError("gamma must be in (0, 1]")

    def ok(m):
        if m < 1:
            return True
        if lam != "saturated" and float(lam) >= lambda_max(replace(p, m=m)):
            return False
        return network_load_computation(p, m, lam) < p.gamma

    e = p.mean_d
    if lam == "saturated":
        seed = p.gamma * p.mu_nb / (p.zeta * p.mu_p / (1.0 + e) + p.mu_p)
    else:
        lam_f = float(lam)
        seed = math.inf if lam_f == 0 else p.gamma * p.mu_ns / (lam_f * (p.zeta + 1.0 + e))
    m = int(max(1, min(seed, limit)))
    if ok(m):
        while m < limit and ok(m + 1):
            m += 1
        return m
    while m > 0 and not ok(m):
        m -= 1
    return m


def max_shards_seed(p: ShardingParams) -> int:
    """Closed-form saturated estimate ⌊γμ_NB/(ζμ_P/(1+E[d]) + μ_P)⌋."""
    return math.floor(p.gamma * p.mu_nb / (p.zeta * p.mu_p / (1.0 + p.mean_d) + p.mu_p))


def beacon_max_shards(mu_nh: float, mu_p: float) -> int:
    """Shard limit when the beacon chain must process every shard header."""
    if not (mu_nh > 0 and mu_p > 0):
        raise ValueError("rates must be > 0")
    return math.floor(Fraction(mu_nh) / Fraction(mu_p))
