"""Compiled event loop.

The whole system is a continuous-time Markov chain (Poisson arrivals,
exponential block timers, exponential PS requirements), so it is
advanced by competing exponential clocks: draw the total rate's holding
time, then pick the channel that fired. Processor sharing with
exponential work is represented exactly by job counts per class; the
completing job is class c with probability n_c μ_c/(n_c μ_c + n_s μ_s)
and uniform within its class.

All state lives in arrays owned by the Python driver, so a run can be
resumed after the random buffers are refilled or a ring buffer grows.
Arrays are only indexed from the top-level loop: helper functions taking
arrays pay reference counting on every call, which dominated run time.
"""
from numba import njit

TX, RX = 0, 1

# float parameters
P_LAM, P_MU_P, P_MU_C, P_MU_S, P_WARMUP, P_HORIZON, P_WINDOW = range(7)
# int parameters
I_M, I_NQ, I_FULL, I_B, I_AGG, I_NWIN, I_DMAX, I_MARGIN, I_NEED = range(9)
# clock
C_T, C_NETRATE = range(2)
# counters
K_IU, K_IE, K_CREATED, K_FINISHED, K_EVENTS, K_GROW, K_STAMP = range(7)
# per consensus queue statistics (post warmup)
S_ARR, S_DEP, S_BLOCKS, S_BLOCKJOBS, S_COMMIT_TX, S_COMMIT_RX, S_EMPTY = range(7)
# per network queue statistics (post warmup)
N_ARR_C, N_ARR_S, N_DEP_C, N_DEP_S = range(4)
# owner counts
O_CTX, O_CRX, O_STX, O_SRX = range(4)
# time integrals: last change, area, busy time
T_LAST, T_AREA, T_BUSY = range(3)

DONE, NEED_RANDOM, GROW = 0, 1, 2
OP_NET, OP_CONS = 0, 1


@njit(cache=True, inline="always")
def _ps_rate(nc, ns, mu_c, mu_s):
    n = nc + ns
    if n == 0:
        return 0.0
    return (nc * mu_c + ns * mu_s) / n


@njit(cache=True)
def advance(fp, ip, clock, ctr, unif, expo, dest_cdf, mark, ops,
            cbuf, head, length, ctime, cstat, ctot, win,
            nq, cnt, rate_q, ntime, nstat, ntot, blk, nblk):
    m = ip[I_M]
    nqueues = ip[I_NQ]
    full = ip[I_FULL] == 1
    b = ip[I_B]
    agg = ip[I_AGG] == 1
    nwin = ip[I_NWIN]
    dmax = ip[I_DMAX]
    margin = ip[I_MARGIN]
    need = ip[I_NEED]
    lam = fp[P_LAM]
    mu_p = fp[P_MU_P]
    mu_c = fp[P_MU_C]
    mu_s = fp[P_MU_S]
    warmup = fp[P_WARMUP]
    horizon = fp[P_HORIZON]
    window = fp[P_WINDOW]
    nu = unif.shape[0]
    ne = expo.shape[0]
    cap = cbuf.shape[1]
    bcap = blk.shape[1]
    base = lam + mu_p
    chan = m * base
    t = clock[C_T]
    net_total = clock[C_NETRATE]
    iu = ctr[K_IU]
    ie = ctr[K_IE]
    created = ctr[K_CREATED]
    finished = ctr[K_FINISHED]
    events = ctr[K_EVENTS]
    stamp = ctr[K_STAMP]
    grow = ctr[K_GROW]
    code = DONE
    while True:
        if grow == 1:
            code = GROW
            break
        if iu + need > nu or ie >= ne:
            code = NEED_RANDOM
            break
        if net_total < 1e-9 * mu_c:
            net_total = 0.0
        total = chan + net_total
        t_new = t + expo[ie] / total
        ie += 1
        if t_new >= horizon:
            t = horizon
            code = DONE
            break
        t = t_new
        events += 1
        post = t >= warmup
        x = unif[iu] * total
        iu += 1
        nops = 0
        if x < chan:
            j = int(x / base)
            if j >= m:
                j = m - 1
            if x - j * base < lam:
                # new TX enters the shard's network queue (or the shared one)
                created += 1
                ops[0, 0] = OP_NET
                ops[0, 1] = j if full else 0
                ops[0, 2] = j
                ops[0, 3] = TX
                nops = 1
            elif length[j] > 0:
                # block production takes the first min(n, b) jobs
                n = length[j]
                k = n if n < b else b
                if post:
                    s0 = ctime[j, T_LAST] if ctime[j, T_LAST] > warmup else warmup
                    ctime[j, T_AREA] += n * (t - s0)
                    ctime[j, T_BUSY] += t - s0
                ctime[j, T_LAST] = t
                h = head[j]
                ntx = 0
                for z in range(k):
                    if cbuf[j, (h + z) % cap] == TX:
                        ntx += 1
                head[j] = (h + k) % cap
                length[j] = n - k
                ctot[j, 1] += k
                if post:
                    cstat[j, S_DEP] += k
                    cstat[j, S_BLOCKS] += 1
                    cstat[j, S_BLOCKJOBS] += k
                    w = int((t - warmup) / window)
                    if w < nwin:
                        win[w, j, 1] += k
                q = j if full else 0
                nn = nq[q, 0] + nq[q, 1]
                if post:
                    s0 = ntime[q, T_LAST] if ntime[q, T_LAST] > warmup else warmup
                    ntime[q, T_AREA] += nn * (t - s0)
                    if nn > 0:
                        ntime[q, T_BUSY] += t - s0
                ntime[q, T_LAST] = t
                if agg:
                    s = nblk[q]
                    if s + 2 >= bcap:
                        grow = 1
                    blk[q, s, 0] = j
                    blk[q, s, 1] = ntx
                    blk[q, s, 2] = k - ntx
                    nblk[q] = s + 1
                    nq[q, 1] += 1
                else:
                    cnt[j, O_STX] += ntx
                    cnt[j, O_SRX] += k - ntx
                    nq[q, 1] += k
                r = _ps_rate(nq[q, 0], nq[q, 1], mu_c, mu_s)
                net_total += r - rate_q[q]
                rate_q[q] = r
                if post:
                    nstat[q, N_ARR_S] += k
            elif post:
                cstat[j, S_EMPTY] += 1
        else:
            # a network completion
            x -= chan
            q = 0
            acc = rate_q[0]
            while q < nqueues - 1 and (x >= acc or rate_q[q] == 0.0):
                q += 1
                acc += rate_q[q]
            while rate_q[q] == 0.0 and q > 0:
                q -= 1
            nc = nq[q, 0]
            ns = nq[q, 1]
            if nc + ns == 0:
                continue
            if post:
                s0 = ntime[q, T_LAST] if ntime[q, T_LAST] > warmup else warmup
                ntime[q, T_AREA] += (nc + ns) * (t - s0)
                ntime[q, T_BUSY] += t - s0
            ntime[q, T_LAST] = t
            y = unif[iu] * (nc * mu_c + ns * mu_s)
            zu = unif[iu + 1]
            iu += 2
            lo = q if full else 0
            hi = q + 1 if full else m
            ncommit = 0
            owner = lo
            if y < nc * mu_c:
                z = int(zu * nc)
                if z >= nc:
                    z = nc - 1
                kind = TX
                for o in range(lo, hi):
                    if z < cnt[o, O_CTX]:
                        owner = o
                        kind = TX
                        break
                    z -= cnt[o, O_CTX]
                    if z < cnt[o, O_CRX]:
                        owner = o
                        kind = RX
                        break
                    z -= cnt[o, O_CRX]
                cnt[owner, O_CTX + kind] -= 1
                nq[q, 0] = nc - 1
                ntot[q, 0] += 1
                if post:
                    nstat[q, N_DEP_C] += 1
                ops[0, 0] = OP_CONS
                ops[0, 1] = owner
                ops[0, 2] = owner
                ops[0, 3] = kind
                nops = 1
            else:
                ntot[q, 1] += 1
                if post:
                    nstat[q, N_DEP_S] += 1
                if agg:
                    s = int(zu * nblk[q])
                    if s >= nblk[q]:
                        s = nblk[q] - 1
                    owner = blk[q, s, 0]
                    ncommit = blk[q, s, 1]
                    nrx = blk[q, s, 2]
                    last = nblk[q] - 1
                    blk[q, s, 0] = blk[q, last, 0]
                    blk[q, s, 1] = blk[q, last, 1]
                    blk[q, s, 2] = blk[q, last, 2]
                    nblk[q] = last
                    nq[q, 1] = ns - 1
                    finished += nrx
                    if post:
                        cstat[owner, S_COMMIT_RX] += nrx
                else:
                    z = int(zu * ns)
                    if z >= ns:
                        z = ns - 1
                    kind = TX
                    for o in range(lo, hi):
                        if z < cnt[o, O_STX]:
                            owner = o
                            kind = TX
                            break
                        z -= cnt[o, O_STX]
                        if z < cnt[o, O_SRX]:
                            owner = o
                            kind = RX
                            break
                        z -= cnt[o, O_SRX]
                    cnt[owner, O_STX + kind] -= 1
                    nq[q, 1] = ns - 1
                    if kind == RX:
                        finished += 1
                        if post:
                            cstat[owner, S_COMMIT_RX] += 1
                    else:
                        ncommit = 1
            r = _ps_rate(nq[q, 0], nq[q, 1], mu_c, mu_s)
            net_total += r - rate_q[q]
            rate_q[q] = r
            # committed TXs spawn one RX per distinct foreign destination shard
            for _ in range(ncommit):
                finished += 1
                if post:
                    cstat[owner, S_COMMIT_TX] += 1
                u = unif[iu]
                iu += 1
                d = 1
                while d < dmax and u >= dest_cdf[d - 1]:
                    d += 1
                stamp += 1
                for _ in range(d):
                    f = int(unif[iu] * m)
                    iu += 1
                    if f >= m:
                        f = m - 1
                    if f == owner or mark[f] == stamp:
                        continue
                    mark[f] = stamp
                    created += 1
                    ops[nops, 0] = OP_NET if full else OP_CONS
                    ops[nops, 1] = f
                    ops[nops, 2] = f
                    ops[nops, 3] = RX
                    nops += 1
        for e in range(nops):
            target = ops[e, 1]
            kind = ops[e, 3]
            if ops[e, 0] == OP_NET:
                q = target
                nn = nq[q, 0] + nq[q, 1]
                if post:
                    s0 = ntime[q, T_LAST] if ntime[q, T_LAST] > warmup else warmup
                    ntime[q, T_AREA] += nn * (t - s0)
                    if nn > 0:
                        ntime[q, T_BUSY] += t - s0
                    nstat[q, N_ARR_C] += 1
                ntime[q, T_LAST] = t
                cnt[ops[e, 2], O_CTX + kind] += 1
                nq[q, 0] += 1
                r = _ps_rate(nq[q, 0], nq[q, 1], mu_c, mu_s)
                net_total += r - rate_q[q]
                rate_q[q] = r
            else:
                j = target
                n = length[j]
                if post:
                    s0 = ctime[j, T_LAST] if ctime[j, T_LAST] > warmup else warmup
                    ctime[j, T_AREA] += n * (t - s0)
                    if n > 0:
                        ctime[j, T_BUSY] += t - s0
                    cstat[j, S_ARR] += 1
                    w = int((t - warmup) / window)
                    if w < nwin:
                        win[w, j, 0] += 1
                ctime[j, T_LAST] = t
                cbuf[j, (head[j] + n) % cap] = kind
                length[j] = n + 1
                ctot[j, 0] += 1
                if n + 1 >= cap - margin:
                    grow = 1
    clock[C_T] = t
    clock[C_NETRATE] = net_total
    ctr[K_IU] = iu
    ctr[K_IE] = ie
    ctr[K_CREATED] = created
    ctr[K_FINISHED] = finished
    ctr[K_EVENTS] = events
    ctr[K_STAMP] = stamp
    ctr[K_GROW] = grow
    return code


@njit(cache=True)
def recompute_rates(nq, rate_q, clock, mu_c, mu_s):
    total = 0.0
    for q in range(nq.shape[0]):
        r = _ps_rate(nq[q, 0], nq[q, 1], mu_c, mu_s)
        rate_q[q] = r
        total += r
    clock[C_NETRATE] = total


@njit(cache=True)
def close_integrals(ctime, length, ntime, nq, t, warmup):
    for j in range(length.shape[0]):
        n = length[j]
        if t > warmup:
            s0 = ctime[j, T_LAST] if ctime[j, T_LAST] > warmup else warmup
            ctime[j, T_AREA] += n * (t - s0)
            if n > 0:
                ctime[j, T_BUSY] += t - s0
        ctime[j, T_LAST] = t
    for q in range(nq.shape[0]):
        n = nq[q, 0] + nq[q, 1]
        if t > warmup:
            s0 = ntime[q, T_LAST] if ntime[q, T_LAST] > warmup else warmup
            ntime[q, T_AREA] += n * (t - s0)
            if n > 0:
                ntime[q, T_BUSY] += t - s0
        ntime[q, T_LAST] = t
