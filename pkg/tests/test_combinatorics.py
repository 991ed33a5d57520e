import math

import pytest

from shardqn.combinatorics import (cross_shard_weight, distinct_shard_sets,
                                   enumerate_destination_sets, expected_foreign_shards,
                                   stirling2)
from shardqn.errors import EnumerationTooLarge


def partitions(items):
    # all set partitions, as the independent oracle for stirling2
    if not items:
        yield []
        return
    first, rest = items[0], items[1:]
    for part in partitions(rest):
        for i in range(len(part)):
            yield part[:i] + [[first] + part[i]] + part[i + 1:]
        yield [[first]] + part


@pytest.mark.parametrize("n,q,want", [(4, 4, 1), (0, 0, 1), (4, 2, 7), (5, 0, 0), (2, 3, 0)])
def test_stirling_values(n, q, want):
    assert stirling2(n, q) == want


def test_stirling_matches_partition_enumeration():
    for n in range(0, 8):
        counts = {}
        for part in partitions(list(range(n))):
            counts[len(part)] = counts.get(len(part), 0) + 1
        for q in range(0, n + 2):
            assert stirling2(n, q) == counts.get(q, 0)


def test_stirling_recurrence():
    for n in range(0, 20):
        for q in range(1, 21):
            assert stirling2(n + 1, q) == q * stirling2(n, q) + stirling2(n, q - 1)


def test_binomial_stirling_identity():
    for n in range(0, 13):
        for m in range(0, n + 1):
            lhs = sum(math.comb(n, j) * stirling2(j, m) for j in range(m, n + 1))
            assert lhs == stirling2(n + 1, m + 1)


def test_large_values_are_exact():
    # exact integers: the leading term dominates and nothing wraps
    assert stirling2(200, 2) == 2**199 - 1


def test_worked_example_three_shards_two_fields():
    assert [distinct_shard_sets(3, 2, i) for i in range(3)] == [1, 6, 2]
    assert enumerate_destination_sets(3, 2) == {0: 1, 1: 6, 2: 2}
    assert enumerate_destination_sets(2, 1) == {0: 1, 1: 1}


def test_formula_matches_enumeration():
    for m in range(1, 7):
        for d in range(1, 6):
            hist = enumerate_destination_sets(m, d)
            assert sum(hist.values()) == m**d
            for i in range(0, d + 1):
                assert distinct_shard_sets(m, d, i) == hist.get(i, 0)


def test_out_of_range_is_zero():
    assert distinct_shard_sets(3, 2, 3) == 0
    assert distinct_shard_sets(2, 4, 2) == 0


def test_enumeration_guard():
    with pytest.raises(EnumerationTooLarge):
        enumerate_destination_sets(10, 8)


def test_invalid_arguments():
    with pytest.raises(ValueError):
        stirling2(-1, 0)
    with pytest.raises(ValueError):
        distinct_shard_sets(0, 1, 0)


def test_expected_foreign_shards_closed_form():
    # d uniform picks miss a given foreign shard with probability ((m-1)/m)^d
    for m in range(1, 12):
        for d in range(1, 7):
            want = (m - 1) * (1 - ((m - 1) / m) ** d)
            assert float(expected_foreign_shards(m, d)) == pytest.approx(want, rel=1e-13, abs=1e-15)
            brute = sum(i * distinct_shard_sets(m, d, i) for i in range(d + 1))
            assert cross_shard_weight(m, d) == brute
