import numpy as np
import pytest
import scipy.sparse as sp

from shardqn.errors import SingularChain, TruncationTooSmall
from shardqn.qrlab import (SignalQueueSpec, UnstableTandem, build, build_signal_queue, check_qr,
                           independent_pair, marginals, residual, stationary, tandem_fig1,
                           tandem_traffic, verify_product_form)
from shardqn.qrlab.ctmc import ARRIVAL, DEPARTURE


def geometric(rho, k):
    return (1 - rho) * rho ** np.arange(k + 1)


def test_generator_rows_sum_to_zero():
    m = build_signal_queue(SignalQueueSpec(0.7, 1.3, 0.2, 0.1, extra_departure=True), 50)
    q = m.generator
    assert np.abs(np.asarray(q.sum(axis=1))).max() < 1e-15
    off = q - sp.diags(q.diagonal())
    assert off.min() >= 0
    assert all(t.kind in "ADI" for t in m.transitions)


def test_mm1_geometric():
    m = build_signal_queue(SignalQueueSpec(0.5, 1.0), 200)
    pi = stationary(m)
    assert np.abs(pi - geometric(0.5, 200)).sum() < 1e-10
    assert residual(m, pi) < 1e-12


def test_solvers_agree():
    m = build_signal_queue(SignalQueueSpec(0.5, 1.0, 0.3), 120)
    a = stationary(m, "gth")
    for method in ("direct", "power"):
        assert np.abs(stationary(m, method) - a).sum() < 1e-10


def test_negative_signal_queue():
    r = check_qr(SignalQueueSpec(1.0, 1.0, negative_rate=0.5), 300)
    assert np.abs(r.pi - geometric(2 / 3, 300)).sum() < 1e-9
    assert r.beta["c"] == pytest.approx(2 / 3, abs=1e-12)
    assert r.beta["s-"] == pytest.approx(1 / 3, abs=1e-12)
    assert r.max_arrival_violation < 1e-9
    assert r.max_departure_violation < 1e-9
    assert r.residual < 1e-12


def test_negative_signal_beta_is_rho_mu():
    # with α ≠ μ the customer departure rate is ρμ
    r = check_qr(SignalQueueSpec(0.4, 2.0, negative_rate=0.5), 200)
    rho = 0.4 / 2.5
    assert r.beta["c"] == pytest.approx(rho * 2.0, rel=1e-12)
    assert r.beta["s-"] == pytest.approx(rho * 0.5, rel=1e-12)


def test_positive_signal_needs_extra_departure():
    base = dict(arrival_rate=0.3, service_rate=1.0, negative_rate=0.5, positive_rate=0.4)
    rho = 0.7 / 1.5
    bad = check_qr(SignalQueueSpec(**base), 300)
    assert bad.max_departure_violation > 1e-3
    assert bad.max_departure_violation == pytest.approx(0.4 / rho, rel=1e-9)
    good = check_qr(SignalQueueSpec(**base, extra_departure=True), 300)
    assert good.max_departure_violation < 1e-9 and good.max_arrival_violation < 1e-9
    assert good.beta["s+"] == pytest.approx(0.4 / rho, rel=1e-12)
    assert np.abs(good.pi - geometric(rho, 300)).sum() < 1e-9


def test_trigger_probability_scales_departures():
    r = check_qr(SignalQueueSpec(1.0, 1.0, negative_rate=0.5, negative_trigger=0.25), 200)
    assert r.beta["s-"] == pytest.approx(0.25 * (2 / 3) * 0.5, rel=1e-12)
    assert r.max_departure_violation < 1e-9


def test_removal_distribution_checked():
    with pytest.raises(ValueError):
        check_qr(SignalQueueSpec(1, 1, 0.5, removal=lambda n: np.full(n, 0.9)), 10)
    r = check_qr(SignalQueueSpec(1, 1, 0.5, removal=lambda n: np.full(n, 1 / n)), 100)
    assert r.max_departure_violation < 1e-9


def test_violations_shrink_and_tail_falls_with_k():
    spec = SignalQueueSpec(0.8, 1.0, 0.1, 0.05, extra_departure=True)
    tails = [check_qr(spec, k).truncation_tail_mass for k in (20, 40, 80)]
    assert tails[0] > tails[1] > tails[2]


def test_singular_chain():
    def rule(s):
        (x,) = s
        if x == 1:
            yield (0,), 1.0, DEPARTURE, "c", ()
        if x == 2:
            yield (3,), 1.0, ARRIVAL, "c", ()
        if x == 3:
            yield (2,), 1.0, DEPARTURE, "c", ()

    with pytest.raises(SingularChain):
        stationary(build((3,), rule))


def test_transient_states_get_zero():
    def rule(s):
        (x,) = s
        if x == 0:
            yield (1,), 1.0, ARRIVAL, "c", ()
        if x == 1:
            yield (2,), 1.0, ARRIVAL, "c", ()
        if x == 2:
            yield (1,), 2.0, DEPARTURE, "c", ()

    pi = stationary(build((2,), rule))
    assert pi[0] == 0 and pi[1:].sum() == pytest.approx(1)


def test_independent_queues_are_product_form():
    assert verify_product_form(independent_pair(0.3, 1.0, 0.5, 2.0, 60)) < 1e-12


def test_tandem_traffic():
    t = tandem_traffic(0.3, 0.2, 1.0, 5.0)
    assert t.rho_p * (1 + t.rho_p) == pytest.approx(0.3, rel=1e-14)
    assert t.alpha_ps_neg == t.alpha_ns_pos
    assert t.rho_n == pytest.approx((0.2 + 0.3) / 5.0, rel=1e-14)
    with pytest.raises(UnstableTandem):
        tandem_traffic(0.3, 4.0, 1.0, 4.0)


def test_tandem_empty_p():
    t = tandem_fig1(0.0, 0.5, 1.0, 2.0, 60)
    pi = stationary(t.model)
    mp, mn = marginals(t.model, pi)
    assert mp[0] == pytest.approx(1.0)
    assert np.abs(mn - geometric(0.25, 60)).sum() < 1e-10


@pytest.mark.parametrize("args", [(0.3, 0.2, 1.0, 5.0), (0.6, 0.1, 1.0, 10.0)])
def test_tandem_product_form(args):
    t = tandem_fig1(*args, k=80)
    pi = stationary(t.model)
    assert residual(t.model, pi) < 1e-12
    assert verify_product_form(t.model, pi) < 1e-6
    # the marginals are the predicted geometric laws
    assert verify_product_form(t.model, pi, t.predicted) < 1e-6


@pytest.mark.parametrize("args", [(0.3, 0.2, 1.0, 5.0), (0.6, 0.1, 1.0, 10.0)])
def test_plain_tandem_is_not_product_form(args):
    t = tandem_fig1(*args, k=80, variant="plain")
    assert verify_product_form(t.model) > 1e-3


def test_truncation_guard():
    t = tandem_fig1(0.6, 0.1, 1.0, 10.0, k=8)
    with pytest.raises(TruncationTooSmall):
        verify_product_form(t.model)
