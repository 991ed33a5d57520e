import math

import numpy as np
import pytest

from shardqn.model import ShardingParams, SimConfig, validate
from shardqn.rng import stream


def test_valid_params():
    assert validate(ShardingParams(m=4, b=225, mu_p=1 / 15, dest_dist=(0.5, 0.5))) == []
    assert validate(ShardingParams(m=math.inf)) == []


def test_reports_all_violations():
    v = validate(ShardingParams(m=0, b=0, mu_p=-1, zeta=0, dest_dist=(0.5, 0.2), gamma=2))
    assert "b ≥ 1" in v
    assert "zeta > 0" in v
    assert len(v) == 6


@pytest.mark.parametrize("bad", [None, 3, "x", ShardingParams(m="a"), ShardingParams(b=2.5),
                                 ShardingParams(dest_dist=(float("nan"),)),
                                 ShardingParams(dest_dist=()), ShardingParams(mu_nh=-1),
                                 ShardingParams(dest_dist=object())])
def test_validate_is_total(bad):
    assert isinstance(validate(bad), list) and validate(bad)


def test_derived_quantities():
    p = ShardingParams(m=3, b=10, mu_nc=4, zeta=5, dest_dist=(0, 0, 0, 1))
    assert p.d_max == 4 and p.u == 1 and p.mean_d == 4
    assert p.mu_ns == 20 and p.mu_nb == 2
    assert ShardingParams(m=1).u == -1


def test_sim_config_checks():
    p = ShardingParams(m=2, mu_nc=10)
    assert SimConfig(p, 1.0).violations() == []
    assert SimConfig(p, 1.0, horizon=10, warmup=20).violations()
    assert SimConfig(ShardingParams(m=2), 1.0).violations()
    assert SimConfig(p, 1.0, horizon=100, warmup=10, window=200).violations()


def test_streams_are_reproducible_and_distinct():
    a = stream(7, 1).random(5)
    np.testing.assert_array_equal(a, stream(7, 1).random(5))
    assert not np.array_equal(a, stream(7, 2).random(5))
