"""Python driver around the compiled event loop."""
from __future__ import annotations

import math

import numpy as np

from ..model import FULL, SimConfig, SimReport
from ..rng import stream
from . import _kernel as kn

UNIF_CHUNK = 1 << 21
EXPO_CHUNK = 1 << 20


def drift_statistic(window_arrivals, window_departures, window) -> np.ndarray:
    """Cumulative net inflow per queue per second at each window end."""
    net = np.cumsum(window_arrivals - window_departures, axis=0)
    ends = window * np.arange(1, net.shape[0] + 1)
    return net / ends[:, None]


def is_saturated(drift, drift_tol, persist, detector="pooled") -> bool:
    """Persistent positive drift over the last ``persist`` window ends.

    "pooled" averages the drift over consensus queues (they share one
    load, so pooling cuts the noise); "any" flags a single queue.
    """
    if drift.shape[0] < persist:
        return False
    tail = drift[-persist:]
    if detector == "pooled":
        return bool(np.all(tail.mean(axis=1) > drift_tol))
    return bool(np.any(np.all(tail > drift_tol, axis=0)))


class _State:
    def __init__(self, cfg: SimConfig):
        p = cfg.params
        self.cfg = cfg
        self.m = m = p.finite_m
        self.full = cfg.mode == FULL
        self.nq = m if self.full else 1
        self.nwin = int(math.floor((cfg.horizon - cfg.warmup) / cfg.window_len + 1e-9))
        dmax = p.d_max
        mu_s = p.mu_nb if cfg.aggregate_blocks else p.mu_ns
        self.fp = np.array([cfg.lam, p.mu_p, p.mu_nc, mu_s, cfg.warmup, cfg.horizon,
                            cfg.window_len], dtype=np.float64)
        need = 3 + p.b * (1 + dmax) if cfg.aggregate_blocks else 4 + dmax
        self.ip = np.array([m, self.nq, int(self.full), p.b, int(cfg.aggregate_blocks), self.nwin,
                            dmax, p.b + 2, need], dtype=np.int64)
        self.clock = np.zeros(2)
        self.ctr = np.zeros(7, dtype=np.int64)
        cdf = np.cumsum(np.asarray(p.dest_dist, dtype=np.float64))
        cdf[-1] = 1.0
        self.dest_cdf = cdf
        self.mark = np.zeros(m, dtype=np.int64)
        self.ops = np.zeros((p.b * dmax + 2, 4), dtype=np.int64)
        cap = 1024
        while cap < 2 * (cfg.initial_backlog + p.b + 2):
            cap *= 2
        self.cbuf = np.zeros((m, cap), dtype=np.int8)
        self.head = np.zeros(m, dtype=np.int64)
        self.length = np.zeros(m, dtype=np.int64)
        self.ctime = np.zeros((m, 3))
        self.cstat = np.zeros((m, 7), dtype=np.int64)
        self.ctot = np.zeros((m, 2), dtype=np.int64)
        self.win = np.zeros((max(self.nwin, 1), m, 2), dtype=np.int64)
        self.nqs = np.zeros((self.nq, 2), dtype=np.int64)
        self.cnt = np.zeros((m, 4), dtype=np.int64)
        self.rate_q = np.zeros(self.nq)
        self.ntime = np.zeros((self.nq, 3))
        self.nstat = np.zeros((self.nq, 4), dtype=np.int64)
        self.ntot = np.zeros((self.nq, 2), dtype=np.int64)
        self.blk = np.zeros((self.nq, 256 if cfg.aggregate_blocks else 1, 3), dtype=np.int64)
        self.nblk = np.zeros(self.nq, dtype=np.int64)
        if cfg.initial_backlog:
            kinds = stream(cfg.seed, 1).random((m, cfg.initial_backlog)) < cfg.backlog_rx_fraction
            self.cbuf[:, : cfg.initial_backlog] = kinds.astype(np.int8)
            self.length[:] = cfg.initial_backlog
            self.ctot[:, 0] = cfg.initial_backlog
            self.ctr[kn.K_CREATED] = m * cfg.initial_backlog
        self.rng = stream(cfg.seed, 0)
        self.unif = np.empty(0)
        self.expo = np.empty(0)
        self.truncated = False
        self.conservation_ok = True

    def refill(self):
        self.unif = self.rng.random(UNIF_CHUNK)
        self.expo = self.rng.standard_exponential(EXPO_CHUNK)
        self.ctr[kn.K_IU] = 0
        self.ctr[kn.K_IE] = 0

    def grow(self):
        if self.cfg.aggregate_blocks and self.nblk.max() + 2 >= self.blk.shape[1] - 1:
            nb = np.zeros((self.nq, 2 * self.blk.shape[1], 3), dtype=np.int64)
            nb[:, : self.blk.shape[1]] = self.blk
            self.blk = nb
        cap = self.cbuf.shape[1]
        if self.length.max() >= cap - self.ip[kn.I_MARGIN]:
            if self.length.max() >= self.cfg.max_backlog:
                self.truncated = True
                return
            new = np.zeros((self.m, 2 * cap), dtype=np.int8)
            for j in range(self.m):
                n = self.length[j]
                new[j, :n] = self.cbuf[j, (self.head[j] + np.arange(n)) % cap]
            self.cbuf = new
            self.head[:] = 0
        self.ctr[kn.K_GROW] = 0

    def in_system(self) -> int:
        n = int(self.length.sum() + self.nqs[:, 0].sum())
        if self.cfg.aggregate_blocks:
            for q in range(self.nq):
                n += int(self.blk[q, : self.nblk[q], 1:].sum())
        else:
            n += int(self.nqs[:, 1].sum())
        return n

    def check_conservation(self):
        ok = self.ctr[kn.K_CREATED] == self.ctr[kn.K_FINISHED] + self.in_system()
        ok &= bool(np.all(self.ctot[:, 0] - self.ctot[:, 1] == self.length))
        ok &= bool(np.all(self.cnt.sum(axis=0)[[kn.O_CTX, kn.O_CRX]].sum() == self.nqs[:, 0].sum()))
        if not self.cfg.aggregate_blocks:
            ok &= bool(self.cnt[:, [kn.O_STX, kn.O_SRX]].sum() == self.nqs[:, 1].sum())
        self.conservation_ok &= bool(ok)

    def step(self) -> int:
        return kn.advance(self.fp, self.ip, self.clock, self.ctr, self.unif, self.expo,
                          self.dest_cdf, self.mark, self.ops, self.cbuf, self.head, self.length, self.ctime,
                          self.cstat, self.ctot, self.win, self.nqs, self.cnt, self.rate_q,
                          self.ntime, self.nstat, self.ntot, self.blk, self.nblk)


def run(config: SimConfig) -> SimReport:
    """Simulate one configuration; deterministic for a fixed seed."""
    errs = config.violations()
    if errs:
        raise ValueError("invalid SimConfig: " + "; ".join(errs))
    st = _State(config)
    st.refill()
    while True:
        kn.recompute_rates(st.nqs, st.rate_q, st.clock, st.fp[kn.P_MU_C], st.fp[kn.P_MU_S])
        code = st.step()
        st.check_conservation()
        if code == kn.DONE:
            break
        if code == kn.NEED_RANDOM:
            st.refill()
        elif code == kn.GROW:
            st.grow()
            if st.truncated:
                break
    t_end = float(st.clock[kn.C_T])
    kn.close_integrals(st.ctime, st.length, st.ntime, st.nqs, t_end, config.warmup)
    return _report(st, t_end)


def _report(st: _State, t_end: float) -> SimReport:
    cfg = st.cfg
    span = max(t_end - cfg.warmup, 0.0)
    inv = 1.0 / span if span > 0 else math.nan
    nwin = st.nwin
    if st.truncated:
        # only windows that finished before the stop count
        nwin = max(0, min(nwin, int((t_end - cfg.warmup) / cfg.window_len)))
    wa = st.win[:nwin, :, 0].astype(np.float64)
    wd = st.win[:nwin, :, 1].astype(np.float64)
    drift = drift_statistic(wa, wd, cfg.window_len) if nwin else np.zeros((0, st.m))
    saturated = st.truncated or is_saturated(drift, cfg.drift_tol, cfg.persist, cfg.detector)
    blocks = st.cstat[:, kn.S_BLOCKS].copy()
    block_jobs = st.cstat[:, kn.S_BLOCKJOBS].copy()
    nb = int(blocks.sum())
    committed = st.cstat[:, kn.S_COMMIT_TX].copy()
    net_util = st.ntime[:, 2] * inv
    return SimReport(
        config=cfg,
        cons_arrivals=st.cstat[:, kn.S_ARR].copy(),
        cons_departures=st.cstat[:, kn.S_DEP].copy(),
        cons_utilization=st.ctime[:, 2] * inv,
        cons_mean_length=st.ctime[:, 1] * inv,
        net_arrivals_c=st.nstat[:, kn.N_ARR_C].copy(),
        net_arrivals_s=st.nstat[:, kn.N_ARR_S].copy(),
        net_departures=st.nstat[:, kn.N_DEP_C] + st.nstat[:, kn.N_DEP_S],
        net_utilization=net_util,
        net_mean_length=st.ntime[:, 1] * inv,
        blocks=blocks,
        block_jobs=block_jobs,
        committed_tx=committed,
        mean_block=float(block_jobs.sum() / nb) if nb else math.nan,
        throughput=float(committed.sum() * inv / st.m),
        rho_n_measured=float(net_util.mean()),
        stable=not saturated,
        drift=drift,
        window_arrivals=st.win[:nwin, :, 0].copy(),
        window_departures=st.win[:nwin, :, 1].copy(),
        conservation_ok=st.conservation_ok,
        truncated=st.truncated,
        events=int(st.ctr[kn.K_EVENTS]),
        final_cons_length=st.length.copy(),
        final_net_length=st.nqs.sum(axis=1),
        extra={"t_end": t_end, "empty_firings": int(st.cstat[:, kn.S_EMPTY].sum())},
    )
