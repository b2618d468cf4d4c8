import itertools
import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from rankdesign.combinatorics import (
    Subset,
    SubsetCollection,
    pair_rank,
    rank_subset,
    sample_indices,
    sample_subcollection,
    unrank_many,
    unrank_subset,
)
from rankdesign.errors import CapacityError, ValidationError


def colex_enumeration(N, K):
    # colex order: compare by reversed tuples
    return sorted(itertools.combinations(range(N), K), key=lambda s: s[::-1])


def test_rank_examples():
    c = SubsetCollection.single(4, 2)
    assert rank_subset(Subset((0, 1)), c) == 0
    assert rank_subset(Subset((2, 3)), c) == 5 == math.comb(4, 2) - 1
    assert colex_enumeration(4, 2).index((1, 2)) == 2
    assert rank_subset(Subset((1, 2)), c) == 2


def test_unrank_examples():
    c = SubsetCollection.single(4, 2)
    assert unrank_subset(0, c).items == (0, 1)
    assert unrank_subset(5, c).items == (2, 3)
    assert unrank_subset(2, c).items == (1, 2)


@pytest.mark.parametrize("N,K", [(4, 2), (6, 3), (7, 1), (8, 8), (9, 4)])
def test_matches_brute_force_colex(N, K):
    c = SubsetCollection.single(N, K)
    for i, items in enumerate(colex_enumeration(N, K)):
        assert rank_subset(Subset(items), c) == i
        assert unrank_subset(i, c).items == items


@pytest.mark.parametrize("bad", [(0,), (0, 1, 2), (1, 1), (2, 1), (-1, 2), (3, 4)])
def test_rank_rejects_invalid(bad):
    with pytest.raises(ValidationError):
        rank_subset(Subset(bad), SubsetCollection.single(4, 2))


def test_unrank_out_of_range():
    c = SubsetCollection.single(4, 2)
    with pytest.raises(IndexError):
        unrank_subset(6, c)
    with pytest.raises(IndexError):
        unrank_subset(-1, c)


def test_multi_list_offsets():
    c = SubsetCollection((4, 3, 5), 2)
    assert c.offsets == (0, 6, 9, 19)
    assert c.cardinality == 19
    assert rank_subset(Subset((0, 1), 1), c) == 6
    assert unrank_subset(9, c) == Subset((0, 1), 2)
    assert unrank_subset(8, c) == Subset((1, 2), 1)


def test_multi_list_ranges_disjoint_and_contiguous():
    c = SubsetCollection((5, 2, 6), 2)
    by_list = {}
    for i in range(c.cardinality):
        by_list.setdefault(unrank_subset(i, c).list_id, []).append(i)
    ranges = [by_list[m] for m in range(3)]
    assert [r[0] for r in ranges] == [0, 10, 11]
    for r in ranges:
        assert r == list(range(r[0], r[-1] + 1))


def test_capacity_error():
    with pytest.raises(CapacityError):
        SubsetCollection.single(1000, 300)
    # C(100, 10) ~ 1.7e13 fits easily
    assert SubsetCollection.single(100, 10).cardinality == math.comb(100, 10)


def test_big_collection_round_trip():
    c = SubsetCollection.single(120, 30)
    assert c.cardinality > 2**63
    for i in (0, 1, c.cardinality // 3, c.cardinality - 1):
        assert rank_subset(unrank_subset(i, c), c) == i


@given(st.integers(2, 40).flatmap(lambda n: st.tuples(st.just(n), st.integers(1, n))), st.data())
def test_round_trip_property(nk, data):
    N, K = nk
    c = SubsetCollection.single(N, K)
    i = data.draw(st.integers(0, c.cardinality - 1))
    s = unrank_subset(i, c)
    c.validate(s)
    assert rank_subset(s, c) == i


@given(st.lists(st.integers(2, 9), min_size=1, max_size=4), st.integers(2, 3), st.data())
def test_rank_monotone_in_colex_order(sizes, K, data):
    sizes = [max(n, K + 1) for n in sizes]
    c = SubsetCollection(sizes, K)
    i = data.draw(st.integers(0, c.cardinality - 2))
    a, b = unrank_subset(i, c), unrank_subset(i + 1, c)
    if a.list_id == b.list_id:
        assert a.items[::-1] < b.items[::-1]
    else:
        assert b.list_id == a.list_id + 1


def test_unrank_many_matches_scalar():
    c = SubsetCollection((9, 7), 3)
    idx = np.arange(c.cardinality)
    items, lists = unrank_many(idx, c)
    for i in idx:
        s = unrank_subset(int(i), c)
        assert tuple(items[i]) == s.items and lists[i] == s.list_id


def test_pair_rank_is_colex_rank_of_pairs():
    c = SubsetCollection.single(7, 2)
    for j, k in itertools.combinations(range(7), 2):
        assert pair_rank(j, k) == rank_subset(Subset((j, k)), c)


def test_sample_full_collection():
    c = SubsetCollection.single(5, 2)
    out = sample_subcollection(c, c.cardinality, np.random.default_rng(0))
    assert {s.items for s in out} == set(itertools.combinations(range(5), 2))


def test_sample_reproducible_and_distinct():
    c = SubsetCollection.single(5, 2)
    a = sample_subcollection(c, 3, np.random.default_rng(42))
    b = sample_subcollection(c, 3, np.random.default_rng(42))
    assert a == b
    assert len(set(a)) == 3
    for s in a:
        c.validate(s)


def test_sample_too_many():
    c = SubsetCollection.single(5, 2)
    with pytest.raises(ValidationError):
        sample_subcollection(c, 11, np.random.default_rng(0))


def test_sample_uniform_frequencies():
    c = SubsetCollection.single(5, 2)
    rng = np.random.default_rng(7)
    n = 100_000
    counts = np.zeros(10)
    for _ in range(n // 1000):
        # R=1 draws, batched through the same code path
        for _ in range(1000):
            counts[int(sample_indices(c, 1, rng)[0])] += 1
    p = 0.1
    sigma = math.sqrt(n * p * (1 - p))
    assert np.all(np.abs(counts - n * p) <= 3 * sigma)


@given(st.integers(3, 12), st.integers(2, 3), st.integers(0, 2**32 - 1))
def test_sample_no_duplicates(N, K, seed):
    c = SubsetCollection.single(N, K)
    R = min(c.cardinality, 1 + seed % c.cardinality)
    out = sample_subcollection(c, R, np.random.default_rng(seed))
    assert len(out) == R == len(set(out))
    for s in out:
        c.validate(s)


def test_sample_big_collection():
    c = SubsetCollection.single(120, 30)
    out = sample_indices(c, 5, np.random.default_rng(1))
    assert len(set(out)) == 5 and all(0 <= i < c.cardinality for i in out)
