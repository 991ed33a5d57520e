"""Exact counting of destination sets for multi-destination transactions.

All arithmetic is on Python integers, so nothing can overflow.
"""
import itertools
import math
from collections import Counter
from fractions import Fraction
from functools import lru_cache

from .errors import EnumerationTooLarge

ENUMERATION_LIMIT = 10**7


def _nonneg_int(name, x):
    if isinstance(x, bool) or not isinstance(x, int) or x < 0:
        raise ValueError(f"{name} must be a non-negative integer, got {x!r}")


@lru_cache(maxsize=None)
def stirling2(n: int, q: int) -> int:
    """Stirling number of the second kind by inclusion-exclusion."""
    _nonneg_int("n", n)
    _nonneg_int("q", q)
    if q > n:
        return 0
    s = sum((-1) ** p * math.comb(q, p) * (q - p) ** n for p in range(q + 1))
    val, rem = divmod(s, math.factorial(q))
    assert rem == 0
    return val


def distinct_shard_sets(m: int, d: int, i: int) -> int:
    """Number of ordered d-tuples of shards (out of m, with a fixed origin)
    that hit exactly i distinct shards other than the origin."""
    _nonneg_int("m", m)
    _nonneg_int("d", d)
    _nonneg_int("i", i)
    if m < 1 or d < 1:
        raise ValueError("m and d must be ≥ 1")
    if i > d or i > m - 1:
        return 0
    return math.perm(m - 1, i) * stirling2(d + 1, i + 1)


def enumerate_destination_sets(m: int, d: int, limit: int = ENUMERATION_LIMIT) -> dict:
    """Brute-force histogram of distinct foreign shards over all m**d tuples.

    Shard 0 plays the origin.
    """
    _nonneg_int("m", m)
    _nonneg_int("d", d)
    if m < 1 or d < 1:
        raise ValueError("m and d must be ≥ 1")
    if m**d > limit:
        raise EnumerationTooLarge(f"m**d = {m**d} exceeds the enumeration limit {limit}")
    hist = Counter(len(set(t) - {0}) for t in itertools.product(range(m), repeat=d))
    return {i: hist.get(i, 0) for i in range(min(d, m - 1) + 1)}


@lru_cache(maxsize=None)
def cross_shard_weight(m: int, d: int) -> int:
    """Σ_i i·N(m, d, i): total foreign-shard hits over all m**d tuples.

    Written as the stage sum Σ_k (k+1)·S(d+1, k+2)·Π_{z=1}^{k+1}(m−z).
    """
    total = 0
    for k in range(min(m - 1, d)):
        total += (k + 1) * stirling2(d + 1, k + 2) * math.perm(m - 1, k + 1)
    return total


def expected_foreign_shards(m: int, d: int) -> Fraction:
    """Mean number of distinct foreign shards hit by d uniform picks."""
    return Fraction(cross_shard_weight(m, d), m**d)
