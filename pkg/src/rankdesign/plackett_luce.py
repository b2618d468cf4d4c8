"""Plackett-Luce ranking model with linear item scores ``x^T theta``.

Observations are full rankings of a presented subset, most preferred first.
The likelihood can be evaluated K-wise (sequential softmax stages) or after
breaking every ranking into its ``C(K, 2)`` ordered pairs (Bradley-Terry).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import expit

from .combinatorics import Subset
from .design import ItemFeatureMatrix
from .errors import NumericalError, ValidationError

LIKELIHOOD_MODES = ("kwise", "pairwise_broken")


@dataclass(frozen=True)
class RankingObservation:
    """A presented subset and the order in which its items were ranked.

    ``permutation[k]`` is the (local) item placed at position ``k``.
    """

    subset: Subset
    permutation: tuple[int, ...]

    def __post_init__(self):
        perm = tuple(int(i) for i in self.permutation)
        object.__setattr__(self, "permutation", perm)
        if sorted(perm) != list(self.subset.items):
            raise ValidationError(f"ranking {perm} is not a permutation of subset {self.subset.items}")


@dataclass
class ModelParams:
    theta: np.ndarray
    nll: float = float("nan")
    iterations: int = 0
    converged: bool = False

    def __post_init__(self):
        self.theta = np.asarray(self.theta, dtype=float)
        if not np.all(np.isfinite(self.theta)):
            raise NumericalError("model parameters are not finite")


@dataclass
class MleConfig:
    """Gradient descent settings for :func:`fit_mle`.

    Barzilai-Borwein step sizes are clipped to ``[stepsize_min, stepsize_max]``.
    """

    max_iterations: int = 1000
    stepsize_min: float = 1e-8
    stepsize_max: float = 5e4
    initial_stepsize: float = 1e-3
    gradient_tolerance: float = 1e-6
    constrain_unit_ball: bool = True
    likelihood_mode: str = "kwise"

    def __post_init__(self):
        if self.max_iterations < 1:
            raise ValidationError("max_iterations must be >= 1")
        if not 0 < self.stepsize_min <= self.stepsize_max:
            raise ValidationError(
                f"need 0 < stepsize_min <= stepsize_max, got {self.stepsize_min}, {self.stepsize_max}"
            )
        if self.initial_stepsize <= 0:
            raise ValidationError("initial_stepsize must be positive")
        if self.gradient_tolerance < 0:
            raise ValidationError("gradient_tolerance must be nonnegative")
        if self.likelihood_mode not in LIKELIHOOD_MODES:
            raise ValidationError(f"likelihood_mode must be one of {LIKELIHOOD_MODES}")


def log_permutation_probability(scores) -> float:
    s = np.asarray(scores, dtype=float)
    if not np.all(np.isfinite(s)):
        raise NumericalError("scores must be finite")
    lse = np.logaddexp.accumulate(s[::-1])[::-1]
    return float(np.sum(s - lse))


def permutation_probability(scores) -> float:
    """Probability of a ranking given item scores listed in ranked order."""
    return float(np.exp(log_permutation_probability(scores)))


def sample_rankings(theta, features: ItemFeatureMatrix, items, list_ids, rng: np.random.Generator) -> np.ndarray:
    """Simulate one ranking per subset.

    Each stage draws the next item from the softmax of the scores of the items
    not yet placed.

    Args:
        items: ``(n, K)`` local item indices.
        list_ids: ``(n,)`` list of each subset.

    Returns:
        ``(n, K)`` local item indices in ranked order.
    """
    items = np.asarray(items, dtype=np.int64)
    n, K = items.shape
    scores = features.X[features.rows(items, list_ids)] @ np.asarray(theta, dtype=float)
    out = np.empty_like(items)
    remaining = np.ones((n, K), dtype=bool)
    rows = np.arange(n)
    for k in range(K):
        logits = np.where(remaining, scores, -np.inf)
        p = np.exp(logits - logits.max(axis=1, keepdims=True))
        cdf = np.cumsum(p, axis=1)
        u = rng.random(n) * cdf[:, -1]
        # first position whose cdf exceeds u; it always has positive mass
        pick = (cdf <= u[:, None]).sum(axis=1)
        out[:, k] = items[rows, pick]
        remaining[rows, pick] = False
    return out


def sample_ranking(theta, features: ItemFeatureMatrix, subset: Subset, rng: np.random.Generator) -> RankingObservation:
    ranked = sample_rankings(theta, features, np.asarray([subset.items]), [subset.list_id], rng)
    return RankingObservation(subset, tuple(ranked[0]))


def _ranked_rows(observations, features: ItemFeatureMatrix) -> np.ndarray:
    if isinstance(observations, np.ndarray):
        return observations
    if len(observations) == 0:
        raise ValidationError("need at least one observation")
    perms = np.array([o.permutation for o in observations], dtype=np.int64)
    lists = np.array([o.subset.list_id for o in observations], dtype=np.int64)
    return features.rows(perms, lists)


class Likelihood:
    """Negative log-likelihood and gradient for a fixed batch of rankings.

    Args:
        ranked_rows: ``(T, K)`` global feature rows, most preferred first.
        X: ``(N, d)`` features.
        mode: ``"kwise"`` or ``"pairwise_broken"``.
    """

    def __init__(self, ranked_rows: np.ndarray, X: np.ndarray, mode: str = "kwise"):
        if mode not in LIKELIHOOD_MODES:
            raise ValidationError(f"likelihood_mode must be one of {LIKELIHOOD_MODES}")
        ranked_rows = np.asarray(ranked_rows)
        if ranked_rows.ndim != 2 or len(ranked_rows) == 0:
            raise ValidationError("need at least one observation")
        self.mode = mode
        self.d = X.shape[1]
        K = ranked_rows.shape[1]
        if mode == "kwise":
            self.Xr = X[ranked_rows]
            self.mask = np.triu(np.ones((K, K), dtype=bool))
        else:
            a, b = np.triu_indices(K, 1)
            self.Z = (X[ranked_rows[:, a]] - X[ranked_rows[:, b]]).reshape(-1, self.d)

    def value(self, theta) -> float:
        theta = np.asarray(theta, dtype=float)
        if self.mode == "kwise":
            s = self.Xr @ theta
            lse = np.logaddexp.accumulate(s[:, ::-1], axis=1)[:, ::-1]
            return float(np.sum(lse - s))
        return float(np.sum(np.logaddexp(0.0, -(self.Z @ theta))))

    def gradient(self, theta) -> np.ndarray:
        theta = np.asarray(theta, dtype=float)
        if self.mode == "kwise":
            s = self.Xr @ theta
            lse = np.logaddexp.accumulate(s[:, ::-1], axis=1)[:, ::-1]
            # stage k puts softmax weight exp(s_j - lse_k) on each j >= k
            expo = np.where(self.mask, s[:, None, :] - lse[:, :, None], -np.inf)
            w = np.exp(expo).sum(axis=1)
            return np.einsum("tj,tjd->d", w - 1.0, self.Xr)
        return -(self.Z.T @ expit(-(self.Z @ theta)))


def negative_log_likelihood(theta, observations, features: ItemFeatureMatrix, mode: str = "kwise") -> float:
    return Likelihood(_ranked_rows(observations, features), features.X, mode).value(theta)


def nll_gradient(theta, observations, features: ItemFeatureMatrix, mode: str = "kwise") -> np.ndarray:
    return Likelihood(_ranked_rows(observations, features), features.X, mode).gradient(theta)


def _project(theta, constrain):
    if not constrain:
        return theta
    norm = np.linalg.norm(theta)
    return theta / norm if norm > 1.0 else theta


def fit_mle(observations, features: ItemFeatureMatrix, config: MleConfig | None = None) -> ModelParams:
    """Maximum-likelihood ``theta`` by (projected) Barzilai-Borwein gradient descent.

    Starts at zero. The step is ``s^T s / s^T y`` from the last iterate and
    gradient differences, clipped, and reset to ``initial_stepsize`` when
    ``s^T y <= 0``. With ``constrain_unit_ball`` each iterate is projected onto
    the unit ball and convergence is measured on the projected gradient
    ``theta - P(theta - grad)``. Returns the iterate with the lowest NLL seen.

    Raises:
        NumericalError: the NLL or gradient became non-finite.
    """
    config = config or MleConfig()
    lik = Likelihood(_ranked_rows(observations, features), features.X, config.likelihood_mode)
    constrain = config.constrain_unit_ball
    lo, hi = config.stepsize_min, config.stepsize_max

    theta = np.zeros(lik.d)
    f, g = lik.value(theta), lik.gradient(theta)
    best_f, best_theta = f, theta
    step = float(np.clip(config.initial_stepsize, lo, hi))
    converged = False
    it = 0
    for it in range(1, config.max_iterations + 1):
        pg = theta - _project(theta - g, constrain)
        if np.linalg.norm(pg) <= config.gradient_tolerance:
            converged = True
            # near the optimum NLL differences are rounding noise; keep the stationary point
            if f <= best_f + 1e-12 * max(1.0, abs(best_f)):
                best_f, best_theta = f, theta
            break
        new = _project(theta - step * g, constrain)
        f_new, g_new = lik.value(new), lik.gradient(new)
        if not (np.isfinite(f_new) and np.all(np.isfinite(g_new))):
            raise NumericalError(f"non-finite likelihood at iteration {it} (step {step:g})")
        s, y = new - theta, g_new - g
        sy = float(s @ y)
        step = float(np.clip(s @ s / sy, lo, hi)) if sy > 0 else float(np.clip(config.initial_stepsize, lo, hi))
        theta, f, g = new, f_new, g_new
        if f < best_f:
            best_f, best_theta = f, theta
    return ModelParams(best_theta, best_f, it, converged)
