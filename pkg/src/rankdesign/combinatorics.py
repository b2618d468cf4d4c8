"""Combinadic indexing of K-subsets.

Subsets are ordered colexicographically: ``{c_0 < c_1 < ... < c_{K-1}}`` has
rank ``sum_i C(c_i, i + 1)``. For several lists the collection is the
concatenation of the per-list collections, in list order.
"""

from __future__ import annotations

import bisect
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import CapacityError, ValidationError

# Indices and cardinalities must stay below this bound.
MAX_INDEX = 2**128

_INT64_MAX = np.iinfo(np.int64).max


@dataclass(frozen=True)
class Subset:
    """K items of one list, as strictly increasing local indices."""

    items: tuple[int, ...]
    list_id: int = 0

    def __post_init__(self):
        object.__setattr__(self, "items", tuple(int(i) for i in self.items))


class SubsetCollection:
    """All K-subsets of one or more lists, addressable by integer index.

    Args:
        list_sizes: number of items in each list.
        K: subset size.
    """

    def __init__(self, list_sizes: Sequence[int], K: int):
        list_sizes = tuple(int(n) for n in list_sizes)
        if not list_sizes:
            raise ValidationError("at least one list is required")
        if K < 1:
            raise ValidationError(f"subset size must be >= 1, got {K}")
        if any(n < 1 for n in list_sizes):
            raise ValidationError(f"list sizes must be positive, got {list_sizes}")
        self.list_sizes = list_sizes
        self.K = int(K)
        offsets = [0]
        for n in list_sizes:
            offsets.append(offsets[-1] + math.comb(n, self.K))
            if offsets[-1] >= MAX_INDEX:
                raise CapacityError(
                    f"collection of {self.K}-subsets over lists {list_sizes} "
                    f"exceeds 2**128 subsets"
                )
        self.offsets = tuple(offsets)
        self.cardinality = offsets[-1]
        self._comb_table = None

    @classmethod
    def single(cls, N: int, K: int) -> "SubsetCollection":
        return cls((N,), K)

    @property
    def n_lists(self) -> int:
        return len(self.list_sizes)

    @property
    def is_multi_list(self) -> bool:
        return len(self.list_sizes) > 1

    def __len__(self):
        # len() is limited to sys.maxsize; use .cardinality for huge collections
        return self.cardinality

    def __repr__(self):
        return f"SubsetCollection(list_sizes={self.list_sizes}, K={self.K})"

    def __eq__(self, other):
        if not isinstance(other, SubsetCollection):
            return NotImplemented
        return self.list_sizes == other.list_sizes and self.K == other.K

    def __hash__(self):
        return hash((self.list_sizes, self.K))

    def validate(self, subset: Subset) -> None:
        """Raise ``ValidationError`` unless ``subset`` belongs to the collection."""
        if not 0 <= subset.list_id < self.n_lists:
            raise ValidationError(f"list id {subset.list_id} out of range")
        items = subset.items
        if len(items) != self.K:
            raise ValidationError(f"subset has {len(items)} items, expected {self.K}")
        n = self.list_sizes[subset.list_id]
        for a, b in zip(items, items[1:]):
            if b <= a:
                raise ValidationError(f"subset items not strictly increasing: {items}")
        if items[0] < 0 or items[-1] >= n:
            raise ValidationError(f"subset items {items} out of range [0, {n})")

    def comb_table(self) -> np.ndarray | None:
        """``C(c, i)`` as int64 for ``c <= max N``, ``i <= K``; None if it overflows."""
        if self._comb_table is None:
            n_max = max(self.list_sizes)
            if math.comb(n_max, min(self.K, n_max // 2)) > _INT64_MAX:
                self._comb_table = False
            else:
                table = np.zeros((n_max + 1, self.K + 1), dtype=np.int64)
                for c in range(n_max + 1):
                    for i in range(self.K + 1):
                        table[c, i] = math.comb(c, i)
                self._comb_table = table
        return None if self._comb_table is False else self._comb_table


def rank_subset(subset: Subset, collection: SubsetCollection) -> int:
    """Index of ``subset`` within ``collection`` (colex order, lists concatenated)."""
    collection.validate(subset)
    rank = sum(math.comb(c, i + 1) for i, c in enumerate(subset.items))
    return collection.offsets[subset.list_id] + rank


def _unrank_within(rank: int, K: int, n: int) -> tuple[int, ...]:
    items = []
    c = n
    for i in range(K, 0, -1):
        c -= 1
        while math.comb(c, i) > rank:
            c -= 1
        items.append(c)
        rank -= math.comb(c, i)
    return tuple(reversed(items))


def unrank_subset(index: int, collection: SubsetCollection) -> Subset:
    """Inverse of :func:`rank_subset`."""
    index = int(index)
    if not 0 <= index < collection.cardinality:
        raise IndexError(f"subset index {index} out of range [0, {collection.cardinality})")
    list_id = bisect.bisect_right(collection.offsets, index) - 1
    rank = index - collection.offsets[list_id]
    items = _unrank_within(rank, collection.K, collection.list_sizes[list_id])
    return Subset(items, list_id)


def unrank_many(indices, collection: SubsetCollection) -> tuple[np.ndarray, np.ndarray]:
    """Vectorized unranking.

    Returns:
        (items, list_ids): an ``(n, K)`` int array of local item indices and
        an ``(n,)`` array of list ids.
    """
    table = collection.comb_table()
    if table is None or collection.cardinality > _INT64_MAX:
        subsets = [unrank_subset(i, collection) for i in indices]
        items = np.array([s.items for s in subsets], dtype=np.int64).reshape(-1, collection.K)
        return items, np.array([s.list_id for s in subsets], dtype=np.int64)
    idx = np.asarray(indices, dtype=np.int64).ravel()
    if idx.size and (idx.min() < 0 or idx.max() >= collection.cardinality):
        raise IndexError("subset index out of range")
    offsets = np.asarray(collection.offsets, dtype=np.int64)
    list_ids = np.searchsorted(offsets, idx, side="right") - 1
    rank = idx - offsets[list_ids]
    K = collection.K
    items = np.empty((idx.size, K), dtype=np.int64)
    for i in range(K, 0, -1):
        # largest c with C(c, i) <= rank; table[:, i] is non-decreasing in c
        c = np.searchsorted(table[:, i], rank, side="right") - 1
        items[:, i - 1] = c
        rank = rank - table[c, i]
    return items, list_ids


def sample_indices(collection: SubsetCollection, R: int, rng: np.random.Generator) -> np.ndarray | list:
    """Draw ``R`` distinct indices uniformly, by rejecting duplicate draws."""
    card = collection.cardinality
    if R < 1 or R > card:
        raise ValidationError(f"sample size must be in [1, {card}], got {R}")
    if card > _INT64_MAX:
        return _sample_indices_big(card, R, rng)
    if R == card:
        return rng.permutation(card)
    chosen = np.empty(0, dtype=np.int64)
    while chosen.size < R:
        draw = rng.integers(0, card, size=max(2 * (R - chosen.size), 16))
        merged = np.concatenate([chosen, draw])
        _, first = np.unique(merged, return_index=True)
        chosen = merged[np.sort(first)][:R]
    return chosen


def _sample_indices_big(card: int, R: int, rng: np.random.Generator) -> list:
    nbits = (card - 1).bit_length()
    nbytes = (nbits + 7) // 8
    mask = (1 << nbits) - 1
    seen = set()
    out = []
    while len(out) < R:
        value = int.from_bytes(rng.bytes(nbytes), "little") & mask
        if value < card and value not in seen:
            seen.add(value)
            out.append(value)
    return out


def sample_subcollection(collection: SubsetCollection, R: int, rng: np.random.Generator) -> list[Subset]:
    """``R`` distinct subsets, each uniformly distributed over the collection."""
    return [unrank_subset(i, collection) for i in sample_indices(collection, R, rng)]


def pair_rank(j, k):
    """Colex rank of the pair ``j < k``: ``C(k, 2) + j``. Works on arrays."""
    return k * (k - 1) // 2 + j
