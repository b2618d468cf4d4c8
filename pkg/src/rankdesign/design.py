"""Log-det design objective over distributions on K-subsets.

Each subset ``S`` contributes ``A_S A_S^T`` where the columns of ``A_S`` are
pairwise feature differences ``x_j - x_k`` for ``j < k`` in ``S``. A design
``pi`` has information matrix ``V = sum_S pi(S) A_S A_S^T + gamma I`` and
objective ``log det V``.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np
import scipy.linalg

from .combinatorics import Subset, SubsetCollection, pair_rank, rank_subset, unrank_many
from .errors import SingularDesignError, ValidationError

WEIGHT_SUM_TOL = 1e-9


@dataclass
class ItemFeatureMatrix:
    """Item feature vectors (one row per item), grouped into contiguous lists.

    Attributes:
        X: ``(N, d)`` array. Rows of list ``m`` are
            ``X[list_starts[m]:list_starts[m + 1]]``.
        list_sizes: items per list; defaults to a single list.
        item_ids: optional external identifiers, one per row.
        normalized: True when rows were rescaled into the unit ball.
    """

    X: np.ndarray
    list_sizes: tuple[int, ...] | None = None
    item_ids: tuple[str, ...] | None = None
    normalized: bool = False
    _pairs: tuple | None = field(default=None, init=False, repr=False, compare=False)

    def __post_init__(self):
        X = np.array(self.X, dtype=float)
        if X.ndim != 2:
            raise ValidationError(f"features must be a 2-d array, got shape {X.shape}")
        N, d = X.shape
        if d < 1 or N < 2:
            raise ValidationError(f"need N >= 2 items and d >= 1 features, got {X.shape}")
        if not np.all(np.isfinite(X)):
            raise ValidationError("features contain NaN or Inf")
        self.X = X
        sizes = (N,) if self.list_sizes is None else tuple(int(n) for n in self.list_sizes)
        if sum(sizes) != N or any(n < 1 for n in sizes):
            raise ValidationError(f"list sizes {sizes} do not partition {N} rows")
        self.list_sizes = sizes
        if self.item_ids is not None:
            self.item_ids = tuple(str(i) for i in self.item_ids)
            if len(self.item_ids) != N:
                raise ValidationError("item_ids length does not match the number of rows")
        if self.normalized and np.linalg.norm(X, axis=1).max() > 1 + 1e-12:
            raise ValidationError("rows marked normalized but some norm exceeds 1")

    @property
    def N(self) -> int:
        return self.X.shape[0]

    @property
    def d(self) -> int:
        return self.X.shape[1]

    @property
    def list_starts(self) -> np.ndarray:
        return np.concatenate([[0], np.cumsum(self.list_sizes)]).astype(np.int64)

    def list_of(self, row: int) -> int:
        return int(np.searchsorted(self.list_starts, row, side="right") - 1)

    def rows(self, items, list_ids) -> np.ndarray:
        """Global row indices for local ``items`` (``(n, K)``) in ``list_ids``."""
        starts = self.list_starts
        return np.asarray(items) + starts[np.asarray(list_ids)][:, None]

    def list_features(self, list_id: int) -> np.ndarray:
        starts = self.list_starts
        return self.X[starts[list_id]:starts[list_id + 1]]

    def normalize(self) -> "ItemFeatureMatrix":
        """Copy with every row divided by the largest row norm."""
        scale = np.linalg.norm(self.X, axis=1).max()
        X = self.X / scale if scale > 0 else self.X.copy()
        return ItemFeatureMatrix(X, self.list_sizes, self.item_ids, normalized=True)

    def collection(self, K: int) -> SubsetCollection:
        return SubsetCollection(self.list_sizes, K)

    def pair_differences(self) -> tuple[np.ndarray, np.ndarray]:
        """All within-list pair differences in table order.

        Returns ``(Z, offsets)``: ``Z[offsets[m] + C(k, 2) + j] = x_j - x_k`` for
        local items ``j < k`` of list ``m``.
        """
        if self._pairs is None:
            blocks, offsets = [], [0]
            for m, n in enumerate(self.list_sizes):
                Xm = self.list_features(m)
                k, j = _colex_pairs(n)
                blocks.append(Xm[j] - Xm[k])
                offsets.append(offsets[-1] + len(j))
            self._pairs = (np.concatenate(blocks), np.asarray(offsets, dtype=np.int64))
        return self._pairs


def _colex_pairs(n: int) -> tuple[np.ndarray, np.ndarray]:
    # (k, j) for j < k in colex order: (1,0), (2,0), (2,1), (3,0), ...
    k = np.repeat(np.arange(n), np.arange(n))
    j = np.concatenate([np.arange(i) for i in range(n)]) if n > 0 else np.empty(0, int)
    return k, j.astype(np.int64)


class DesignDistribution:
    """Sparse probability vector over a :class:`SubsetCollection`.

    Weights are stored unnormalized together with a scalar multiplier, so the
    Frank-Wolfe update ``(1 - a) pi + a e_S`` costs one multiply and one insert.
    """

    def __init__(self, weights: Mapping[int, float], collection: SubsetCollection, check=True):
        self.collection = collection
        self._raw = {int(i): float(w) for i, w in weights.items() if w != 0}
        self._scale = 1.0
        if check:
            self.validate()

    @classmethod
    def point_mass(cls, index: int, collection: SubsetCollection) -> "DesignDistribution":
        return cls({index: 1.0}, collection)

    @classmethod
    def uniform_over(cls, indices: Sequence[int], collection) -> "DesignDistribution":
        indices = list(dict.fromkeys(int(i) for i in indices))
        return cls({i: 1.0 / len(indices) for i in indices}, collection)

    def validate(self) -> None:
        if not self._raw:
            raise ValidationError("design distribution has empty support")
        for i, w in self._raw.items():
            if not 0 <= i < self.collection.cardinality:
                raise ValidationError(f"subset index {i} out of range")
            if w < 0 or not np.isfinite(w):
                raise ValidationError(f"invalid weight {w} for subset {i}")
        total = self.total()
        if abs(total - 1.0) > WEIGHT_SUM_TOL:
            raise ValidationError(f"weights sum to {total}, not 1")

    def total(self) -> float:
        return float(np.sum(list(self._raw.values()))) * self._scale

    @property
    def nnz(self) -> int:
        return len(self._raw)

    def __len__(self):
        return len(self._raw)

    def __getitem__(self, index: int) -> float:
        return self._raw.get(int(index), 0.0) * self._scale

    def weights(self) -> dict[int, float]:
        """Materialized ``{subset index: probability}``."""
        return {i: w * self._scale for i, w in self._raw.items()}

    def arrays(self) -> tuple[np.ndarray, np.ndarray]:
        """Support indices and weights, sorted by index."""
        idx = np.array(sorted(self._raw), dtype=object if self.collection.cardinality > 2**62 else np.int64)
        w = np.array([self._raw[i] * self._scale for i in idx], dtype=float)
        return idx, w

    def mix(self, index: int, alpha: float) -> None:
        """In-place ``pi <- (1 - alpha) pi + alpha e_index``."""
        if not 0 <= alpha < 1:
            raise ValidationError(f"mixing weight must lie in [0, 1), got {alpha}")
        if alpha == 0:
            return
        self._scale *= 1.0 - alpha
        index = int(index)
        self._raw[index] = self._raw.get(index, 0.0) + alpha / self._scale
        if self._scale < 1e-150:
            self._raw = self.weights()
            self._scale = 1.0

    def top(self, n: int) -> list[int]:
        """The ``n`` highest-mass support indices; equal masses go to the lower index."""
        ranked = sorted(self._raw.items(), key=lambda kv: (-kv[1], kv[0]))
        return [i for i, _ in ranked[:n]]

    def copy(self) -> "DesignDistribution":
        return DesignDistribution(self.weights(), self.collection, check=False)

    def __repr__(self):
        return f"DesignDistribution(nnz={self.nnz}, collection={self.collection!r})"


@dataclass
class InfoMatrixState:
    """Regularized information matrix with its inverse and log-determinant."""

    V: np.ndarray
    V_inv: np.ndarray
    gamma: float
    log_det: float

    def inverse_residual(self) -> float:
        """``max |V V_inv - I|``."""
        return float(np.abs(self.V @ self.V_inv - np.eye(len(self.V))).max())


def pair_difference(features: ItemFeatureMatrix, j: int, k: int) -> np.ndarray:
    """``x_j - x_k`` for two rows of the same list."""
    if j == k:
        raise ValidationError("pair difference needs two distinct items")
    for row in (j, k):
        if not 0 <= row < features.N:
            raise ValidationError(f"item {row} out of range")
    if features.list_of(j) != features.list_of(k):
        raise ValidationError(f"items {j} and {k} belong to different lists")
    return features.X[j] - features.X[k]


def subset_matrix(features: ItemFeatureMatrix, subset: Subset) -> np.ndarray:
    """``A_S``: a ``d x C(K, 2)`` matrix of pair differences, pairs in lexicographic order."""
    if not 0 <= subset.list_id < len(features.list_sizes):
        raise ValidationError(f"list id {subset.list_id} out of range")
    SubsetCollection(features.list_sizes, len(subset.items)).validate(subset)
    rows = features.list_starts[subset.list_id] + np.asarray(subset.items)
    Xs = features.X[rows]
    a, b = _lex_pairs(len(rows))
    return (Xs[a] - Xs[b]).T


def _lex_pairs(K: int) -> tuple[np.ndarray, np.ndarray]:
    pairs = np.array(list(itertools.combinations(range(K), 2)), dtype=np.int64).reshape(-1, 2)
    return pairs[:, 0], pairs[:, 1]


def design_matrix_sum(features: ItemFeatureMatrix, items, list_ids, weights) -> np.ndarray:
    """``sum_n w_n A_{S_n} A_{S_n}^T`` for subsets given as local item arrays."""
    items = np.asarray(items).reshape(len(weights), -1)
    Xs = features.X[features.rows(items, list_ids)]
    a, b = _lex_pairs(items.shape[1])
    Z = Xs[:, a, :] - Xs[:, b, :]
    return np.einsum("n,npi,npj->ij", np.asarray(weights, dtype=float), Z, Z)


def information_matrix(pi: DesignDistribution, features: ItemFeatureMatrix, gamma: float = 1e-6) -> InfoMatrixState:
    """Build ``V = V_pi + gamma I`` with a direct inverse and log-det.

    Raises:
        SingularDesignError: ``V`` is not numerically positive definite.
    """
    if gamma < 0:
        raise ValidationError(f"gamma must be nonnegative, got {gamma}")
    idx, w = pi.arrays()
    items, list_ids = unrank_many(idx, pi.collection)
    V = design_matrix_sum(features, items, list_ids, w) + gamma * np.eye(features.d)
    return factorize(V, gamma)


def factorize(V: np.ndarray, gamma: float) -> InfoMatrixState:
    """Invert a symmetric positive-definite ``V`` by Cholesky."""
    V = (V + V.T) / 2
    d = len(V)
    eig = np.linalg.eigvalsh(V)
    tol = d * np.finfo(float).eps * max(eig.max(), 0.0)
    if eig.min() <= tol:
        rank = int(np.sum(eig > tol))
        raise SingularDesignError(
            f"information matrix has numerical rank {rank} < d = {d}"
            + ("; the design support does not span the feature space (use gamma > 0 or a larger support)"
               if gamma == 0 else "")
        )
    c, lower = scipy.linalg.cho_factor(V)
    log_det = 2.0 * float(np.sum(np.log(np.diag(c))))
    V_inv = scipy.linalg.cho_solve((c, lower), np.eye(d))
    return InfoMatrixState(V, (V_inv + V_inv.T) / 2, gamma, log_det)


@dataclass
class PairTable:
    """Pair gradients ``D_jk = z_jk^T V_inv z_jk`` for all within-list pairs.

    ``values[offsets[m] + C(k, 2) + j]`` holds the entry for local ``j < k`` in list ``m``.
    """

    values: np.ndarray
    offsets: np.ndarray

    def lookup(self, j, k, list_id=0):
        j, k = np.minimum(j, k), np.maximum(j, k)
        return self.values[self.offsets[list_id] + pair_rank(j, k)]


def pair_gradient_table(V_inv: np.ndarray, features: ItemFeatureMatrix) -> PairTable:
    Z, offsets = features.pair_differences()
    values = np.einsum("pi,ij,pj->p", Z, V_inv, Z, optimize=True)
    return PairTable(values, offsets)


def subset_gradients(D: PairTable, items, list_ids) -> np.ndarray:
    """``G(S) = sum_{(j,k) in S} D_jk`` for a batch of subsets (``items`` is ``(n, K)``)."""
    items = np.asarray(items)
    a, b = _lex_pairs(items.shape[1])
    j, k = items[:, a], items[:, b]
    pos = D.offsets[np.asarray(list_ids)][:, None] + pair_rank(j, k)
    return D.values[pos].sum(axis=1)


def subset_gradient(D: PairTable, subset: Subset) -> float:
    items = np.asarray(subset.items)[None, :]
    return float(subset_gradients(D, items, [subset.list_id])[0])


def log_det_objective(pi: DesignDistribution, features: ItemFeatureMatrix, gamma: float = 0.0) -> float:
    """``log det(V_pi + gamma I)`` by direct factorization."""
    return information_matrix(pi, features, gamma).log_det


def subset_index(subset: Subset, features: ItemFeatureMatrix) -> int:
    return rank_subset(subset, features.collection(len(subset.items)))
