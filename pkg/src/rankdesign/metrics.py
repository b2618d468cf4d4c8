"""Ranking quality: pairwise ranking loss (normalized Kendall tau) and NDCG."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .design import ItemFeatureMatrix
from .errors import ValidationError

GAINS = ("linear", "exponential")


def order_by_scores(scores) -> np.ndarray:
    """Items by descending score; ties keep ascending item index."""
    return np.argsort(-np.asarray(scores, dtype=float), kind="stable")


def induced_permutation(theta, features: ItemFeatureMatrix) -> list[np.ndarray]:
    """Per-list ranking (local item indices) induced by ``x^T theta``."""
    scores = features.X @ np.asarray(theta, dtype=float)
    starts = features.list_starts
    return [order_by_scores(scores[starts[m]:starts[m + 1]]) for m in range(len(features.list_sizes))]


def _check_permutation(p, n=None):
    p = np.asarray(p, dtype=np.int64)
    if p.ndim != 1:
        raise ValidationError("permutation must be one-dimensional")
    n = len(p) if n is None else n
    if len(p) != n or not np.array_equal(np.sort(p), np.arange(n)):
        raise ValidationError(f"not a permutation of range({n})")
    return p


def _count_inversions(seq: np.ndarray) -> int:
    # bottom-up merge sort
    a = np.asarray(seq).tolist()
    n = len(a)
    count = 0
    width = 1
    buf = [0] * n
    while width < n:
        for lo in range(0, n, 2 * width):
            mid, hi = min(lo + width, n), min(lo + 2 * width, n)
            i, j, k = lo, mid, lo
            while i < mid and j < hi:
                if a[i] <= a[j]:
                    buf[k] = a[i]
                    i += 1
                else:
                    buf[k] = a[j]
                    count += mid - i
                    j += 1
                k += 1
            buf[k:hi] = a[i:mid] + a[j:hi]
        a, buf = buf, a
        width *= 2
    return count


def ranking_loss(sigma_hat, true_order, true_scores=None) -> float:
    """Fraction of item pairs that ``sigma_hat`` orders differently from ``true_order``.

    Both arguments list items from first to last position. When
    ``true_scores`` (indexed by item) is given, pairs with equal true score
    are left out of both the count and the normalizer.
    """
    sigma_hat = _check_permutation(sigma_hat)
    N = len(sigma_hat)
    true_order = _check_permutation(true_order, N)
    if N < 2:
        raise ValidationError("ranking loss needs at least two items")
    pos_hat = np.empty(N, dtype=np.int64)
    pos_hat[sigma_hat] = np.arange(N)
    seq = pos_hat[true_order]
    if true_scores is None:
        return 2.0 * _count_inversions(seq) / (N * (N - 1))
    s = np.asarray(true_scores, dtype=float)[true_order]
    upper = np.triu(np.ones((N, N), dtype=bool), 1)
    untied = upper & (s[:, None] != s[None, :])
    total = int(untied.sum())
    if total == 0:
        return 0.0
    wrong = untied & (seq[:, None] > seq[None, :])
    return float(wrong.sum()) / total


def ndcg_at_k(sigma_hat, relevance, k: int | None = None, gain: str = "linear",
              temperature: float = 0.1) -> float:
    """NDCG of the ranking ``sigma_hat`` truncated at ``k`` (default: all items).

    Gains are ``rel`` (linear) or ``exp(rel / temperature)`` (exponential),
    discounted by ``log2(position + 1)`` with 1-based positions.
    """
    rel = np.asarray(relevance, dtype=float)
    sigma_hat = _check_permutation(sigma_hat, len(rel))
    if not np.all(np.isfinite(rel)):
        raise ValidationError("relevance must be finite")
    if gain not in GAINS:
        raise ValidationError(f"gain must be one of {GAINS}")
    k = len(rel) if k is None else int(k)
    if k < 1:
        raise ValidationError("cutoff k must be >= 1")
    k = min(k, len(rel))
    if gain == "linear":
        if np.any(rel < 0):
            raise ValidationError("linear gain needs nonnegative relevance")
        g = rel
    else:
        if temperature <= 0:
            raise ValidationError("temperature must be positive")
        # NDCG is invariant to rescaling all gains
        g = np.exp((rel - rel.max()) / temperature)
    discount = 1.0 / np.log2(np.arange(2, k + 2))
    # same reduction for both so the ideal ordering scores exactly 1
    dcg = float(np.sum(g[sigma_hat[:k]] * discount))
    ideal = float(np.sum(-np.sort(-g)[:k] * discount))
    if ideal == 0:
        return 1.0
    return dcg / ideal


@dataclass
class EvaluationReport:
    ranking_loss: float
    ndcg: float
    k: int | None
    gain: str
    temperature: float
    per_list: list[dict] = field(default_factory=list)

    def as_dict(self) -> dict:
        return {
            "ranking_loss": self.ranking_loss,
            "ndcg": self.ndcg,
            "k": self.k,
            "gain": self.gain,
            "temperature": self.temperature,
            "per_list": self.per_list,
        }


def evaluate(theta_hat, features: ItemFeatureMatrix, true_scores, k: int | None = None,
             gain: str = "linear", temperature: float = 0.1) -> EvaluationReport:
    """Compare the ranking induced by ``theta_hat`` with per-item true scores.

    Relevance for NDCG is the true score shifted to a minimum of zero within
    each list. List-level metrics are averaged with equal weight per list.
    """
    true_scores = np.asarray(true_scores, dtype=float)
    if true_scores.shape != (features.N,):
        raise ValidationError(f"expected {features.N} true scores, got shape {true_scores.shape}")
    starts = features.list_starts
    rows = []
    for m, sigma in enumerate(induced_permutation(theta_hat, features)):
        s = true_scores[starts[m]:starts[m + 1]]
        rows.append({
            "list_id": m,
            "ranking_loss": ranking_loss(sigma, order_by_scores(s), s),
            "ndcg": ndcg_at_k(sigma, s - s.min(), k, gain, temperature),
        })
    return EvaluationReport(
        ranking_loss=float(np.mean([r["ranking_loss"] for r in rows])),
        ndcg=float(np.mean([r["ndcg"] for r in rows])),
        k=k, gain=gain, temperature=temperature, per_list=rows,
    )
