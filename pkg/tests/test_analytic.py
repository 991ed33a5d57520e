import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from shardqn import analytic as an
from shardqn.errors import UnstableInput
from shardqn.model import ShardingParams

B, MU_P = 225, 1 / 15


def params(**kw):
    kw.setdefault("b", B)
    kw.setdefault("mu_p", MU_P)
    return ShardingParams(**kw)


def test_single_destination_endpoints():
    assert an.lambda_max(params(m=1)) == 15.0
    assert an.lambda_max(params(m=math.inf)) == 7.5
    assert an.lambda_single(1.0, params(m=math.inf)) == 7.5
    assert an.lambda_max(params(m=math.inf, dest_dist=(0, 1))) == 5.0


def test_small_cases():
    assert an.lambda_single(1.0, ShardingParams(m=1, b=1, mu_p=1)) == 1.0
    assert an.lambda_max(ShardingParams(m=2, b=2, mu_p=1)) == pytest.approx(4 / 3, rel=1e-15)
    assert an.lambda_general(0.5, ShardingParams(m=1, b=1, mu_p=1, dest_dist=(0.2, 0.3, 0.5))) == 0.5


def test_mean_block_limits():
    assert an.mean_block_size(1.0, 7) == 7.0
    assert an.mean_block_size(0.0, 7) == 1.0
    for rho in (0.3, 0.9, 1 - 1e-9, 1 - 1e-14):
        direct = sum(rho**j for j in range(50))
        assert an.mean_block_size(rho, 50) == pytest.approx(direct, rel=1e-12)


def test_single_equals_general_exactly():
    rng = np.random.default_rng(3)
    for _ in range(200):
        p = params(m=int(rng.integers(1, 80)), b=int(rng.integers(1, 300)),
                   mu_p=float(rng.uniform(0.01, 3)))
        rho = float(rng.uniform(0, 1))
        assert an.lambda_general(rho, p) == an.lambda_single(rho, p)
        assert an.lambda_general(1.0, p) == an.lambda_single(1.0, p)


def test_lambda_max_times_factor_is_capacity():
    for m in range(1, 65):
        p = params(m=m)
        assert an.lambda_max(p) * (1 + (m - 1) / m) == pytest.approx(B * MU_P, rel=2e-16)


def test_lambda_max_decreases_with_destinations():
    for m in range(3, 20):
        for d in range(1, min(m - 1, 6)):
            lo = [0.0] * (d + 1)
            hi = [0.0] * (d + 1)
            lo[d - 1] = 1.0
            hi[d] = 1.0
            assert an.lambda_max(params(m=m, dest_dist=hi)) < an.lambda_max(params(m=m, dest_dist=lo))


def test_cross_load_tends_to_mean_d():
    p = params(m=10**6, dest_dist=(0.1, 0.2, 0.7))
    assert an.cross_shard_load(p) == pytest.approx(p.mean_d, rel=1e-5)


dist = st.lists(st.floats(0.0, 1.0), min_size=1, max_size=5).filter(lambda w: sum(w) > 0.05)


@settings(max_examples=150, deadline=None)
@given(m=st.integers(1, 40), b=st.integers(1, 300), w=dist,
       r1=st.floats(0, 1), r2=st.floats(0, 1))
def test_monotone_in_rho(m, b, w, r1, r2):
    s = sum(w)
    w = [x / s for x in w]
    w[-1] = 1 - math.fsum(w[:-1])
    p = params(m=m, b=b, dest_dist=w)
    lo, hi = sorted((r1, r2))
    if hi - lo > 1e-9:
        assert an.lambda_general(lo, p) < an.lambda_general(hi, p)


def test_solver_zero_and_trivial():
    s = an.solve_traffic_full(0.0, params(m=4, mu_nc=1000))
    assert s.rho_p == 0 and s.alpha_pc == 0 and s.alpha_nc == 0 and s.rho_n == 0
    p = ShardingParams(m=1, b=1, mu_p=1, mu_nc=10, zeta=2)
    s = an.solve_traffic_full(0.5, p)
    assert s.rho_p == pytest.approx(0.5, abs=1e-12)
    assert s.alpha_pc == pytest.approx(0.5, abs=1e-12)
    assert s.rho_ns == pytest.approx(0.5 / 20, abs=1e-12)


def test_solver_rejects_unstable():
    p = params(m=4, mu_nc=1000)
    with pytest.raises(UnstableInput):
        an.solve_traffic_full(an.lambda_max(p), p)


def test_residuals_near_saturation():
    p = params(m=4, mu_nc=1000)
    s = an.solve_traffic_full(0.9 * an.lambda_max(p), p)
    assert max(an.traffic_residuals(s, p).values()) < 1e-9
    assert s.alpha_ps_neg.shape == (B - 1,) and s.alpha_ns_pos.shape == (B,)
    np.testing.assert_array_equal(s.alpha_ps_neg, s.alpha_ns_pos[1:])


def test_duality_random_draws():
    rng = np.random.default_rng(2024)
    for _ in range(100):
        m = int(rng.integers(1, 33))
        b = int(rng.integers(1, 257))
        w = rng.dirichlet(np.ones(int(rng.integers(1, 6))))
        p = params(m=m, b=b, mu_p=float(rng.uniform(0.01, 2)), mu_nc=float(rng.uniform(10, 1e4)),
                   zeta=float(rng.uniform(0.5, 200)), dest_dist=w)
        rho = float(rng.uniform(0.01, 0.999))
        s = an.solve_traffic_full(an.lambda_general(rho, p), p)
        assert abs(s.rho_p - rho) < 1e-9
        assert max(an.traffic_residuals(s, p).values()) < 1e-9
        assert s.alpha_pc == pytest.approx(s.alpha_ns_pos.sum(), rel=1e-9)
        assert s.alpha_pc == pytest.approx(s.alpha_nc, rel=1e-9)


def test_stage_rates_single_destination():
    # D[1]=1: one stage, R = λ/M, α_Nc = λ(1 + (M−1)/M)
    p = params(m=5, mu_nc=1000)
    s = an.solve_traffic_full(3.0, p)
    assert s.r_stage == pytest.approx([3.0 / 5])
    assert s.alpha_nc == pytest.approx(3.0 * (1 + 4 / 5), rel=1e-14)


def test_computation_sharding_loads():
    p = params(m=1, mu_nc=100, zeta=B / 2, gamma=0.85)
    s = an.solve_traffic_computation(0.0, p)
    assert s.rho_n == 0 and s.gamma_ok
    full = an.solve_traffic_full(7.0, p)
    comp = an.solve_traffic_computation(7.0, p)
    assert comp.rho_n == pytest.approx(full.rho_n, rel=1e-14)
    p6 = params(m=6, mu_nc=100, zeta=B / 2, gamma=0.85)
    comp = an.solve_traffic_computation(5.0, p6)
    e = an.cross_shard_load(p6)
    assert comp.rho_n == pytest.approx(6 * 5.0 * (p6.zeta + 1 + e) / p6.mu_ns, rel=1e-9)


def test_throughput_bound():
    p = params(m=1, mu_nc=100, zeta=3.0, gamma=0.9)
    assert an.throughput_bound_computation(p) == pytest.approx(0.9 * 300 / 4)
    assert an.throughput_bound_computation(p, 10**7) == pytest.approx(0.9 * 300 / 5, rel=1e-6)
    q = params(m=1, mu_nc=100, zeta=3.0, gamma=0.9, dest_dist=(0, 1))
    assert an.throughput_bound_computation(q, 10**7) == pytest.approx(0.9 * 300 / 6, rel=1e-6)


FIG9 = dict(b=B, mu_p=MU_P, mu_nc=100.0, zeta=B / 2, gamma=0.85)


def test_max_shards_saturated_matches_closed_form():
    p = params(**FIG9)
    got = an.max_shards_computation(p)
    assert abs(got - an.max_shards_seed(p)) <= 1
    assert got == 10
    for m in range(1, got + 1):
        assert an.network_load_computation(p, m, "saturated") < 0.85
    assert an.network_load_computation(p, got + 1, "saturated") >= 0.85


def test_max_shards_grows_as_lambda_falls():
    p = params(**FIG9)
    sat = an.max_shards_computation(p)
    m4, m2 = an.max_shards_computation(p, 4.0), an.max_shards_computation(p, 2.0)
    assert sat <= m4 <= m2
    assert m2 * 2.0 == pytest.approx(m4 * 4.0, rel=0.05)


def test_max_shards_zero_when_cap_tiny():
    assert an.max_shards_computation(params(**{**FIG9, "gamma": 1e-6})) == 0


def test_beacon():
    assert an.beacon_max_shards(1, 1) == 1
    assert an.beacon_max_shards(10, 1 / 15) == 150
    assert an.beacon_max_shards(0.5, 1) == 0
