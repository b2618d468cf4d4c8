"""Randomized Frank-Wolfe for the log-det subset design.

Each iteration scores a uniformly sampled batch of ``R`` candidate subsets
(or the whole collection in ``full`` mode) with cached pair gradients, picks
the best one, line-searches the step with golden-section search on a
rank-``r`` log-det update, and refreshes ``V^{-1}`` by the Woodbury identity.
Here ``r = C(K, 2)``.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from .combinatorics import SubsetCollection, sample_indices, unrank_many
from .design import (
    DesignDistribution,
    ItemFeatureMatrix,
    design_matrix_sum,
    factorize,
    information_matrix,
    pair_gradient_table,
    subset_gradients,
)
from .errors import NumericalError, SingularDesignError, ValidationError

INV_PHI = (math.sqrt(5) - 1) / 2
INV_PHI_SQ = INV_PHI**2

# Largest collection the full (deterministic) LMO will enumerate.
FULL_LMO_LIMIT = 10_000_000
# Objective gains at or below this are treated as zero by the line search.
LINE_SEARCH_SLACK = 1e-12


@dataclass
class SolverConfig:
    """Settings for :func:`solve`.

    ``inverse_refresh_period = 0`` never re-factorizes ``V``. On a refresh the
    regularizer is the decayed ``gamma * prod(1 - alpha_t)`` unless
    ``refresh_gamma`` is set, in which case the full ``gamma`` is restored.
    ``stop_gap`` stops a full-mode run once ``max_S G(S) - d`` drops below it.
    """

    R: int = 100_000
    T_od: int = 1000
    gamma: float = 1e-6
    alpha_tol: float = 1e-16
    lmo_mode: str = "randomized"
    seed: int = 0
    inverse_refresh_period: int = 0
    refresh_gamma: bool = False
    stop_gap: float | None = None

    def __post_init__(self):
        if self.R < 1:
            raise ValidationError(f"R must be >= 1, got {self.R}")
        if self.T_od < 1:
            raise ValidationError(f"T_od must be >= 1, got {self.T_od}")
        if not 0 < self.alpha_tol < 1:
            raise ValidationError(f"alpha_tol must lie in (0, 1), got {self.alpha_tol}")
        if self.gamma < 0:
            raise ValidationError(f"gamma must be >= 0, got {self.gamma}")
        if self.lmo_mode not in ("randomized", "full"):
            raise ValidationError(f"lmo_mode must be 'randomized' or 'full', got {self.lmo_mode!r}")
        if self.inverse_refresh_period < 0:
            raise ValidationError("inverse_refresh_period must be >= 0")


@dataclass
class IterationRecord:
    objective: float
    subset_index: int
    alpha: float
    max_gradient: float
    seconds: float


@dataclass
class SolverTrace:
    """Per-iteration history plus the final solver state."""

    initial_objective: float
    records: list[IterationRecord] = field(default_factory=list)
    V_inv: np.ndarray | None = None
    gamma_effective: float = 0.0
    stopped_early: bool = False

    @property
    def objectives(self) -> np.ndarray:
        return np.array([self.initial_objective] + [r.objective for r in self.records])

    @property
    def chosen(self) -> list[int]:
        return [r.subset_index for r in self.records]

    @property
    def alphas(self) -> np.ndarray:
        return np.array([r.alpha for r in self.records])

    def __len__(self):
        return len(self.records)


def _check_alpha(alpha):
    if not 0 <= alpha < 1:
        raise ValidationError(f"step size must lie in [0, 1), got {alpha}")


def _log_det_delta(gram: np.ndarray, d: int, alpha: float) -> float:
    # gram = A^T V_inv A, so A~^T V~_inv A~ = alpha / (1 - alpha) * gram
    r = len(gram)
    inner = np.eye(r) + (alpha / (1.0 - alpha)) * gram
    try:
        c, _ = scipy.linalg.cho_factor(inner)
    except np.linalg.LinAlgError as exc:
        raise NumericalError(f"low-rank log-det update: inner matrix not positive definite (alpha={alpha})") from exc
    return d * math.log1p(-alpha) + 2.0 * float(np.sum(np.log(np.diag(c))))


def update_log_det(V_inv: np.ndarray, A: np.ndarray, alpha: float) -> float:
    """Objective change ``log det((1-a) V + a A A^T) - log det V`` from ``V^{-1}``."""
    _check_alpha(alpha)
    if alpha == 0:
        return 0.0
    A = np.asarray(A, dtype=float).reshape(len(V_inv), -1)
    return _log_det_delta(A.T @ V_inv @ A, len(V_inv), alpha)


def update_inverse(V_inv: np.ndarray, A: np.ndarray, alpha: float) -> np.ndarray:
    """``((1-a) V + a A A^T)^{-1}`` from ``V^{-1}`` via the Woodbury identity."""
    _check_alpha(alpha)
    if alpha == 0:
        return V_inv.copy()
    A = np.asarray(A, dtype=float).reshape(len(V_inv), -1)
    V_t = V_inv / (1.0 - alpha)
    W = V_t @ (math.sqrt(alpha) * A)
    inner = np.eye(A.shape[1]) + math.sqrt(alpha) * (A.T @ W)
    try:
        cf = scipy.linalg.cho_factor(inner)
    except np.linalg.LinAlgError as exc:
        raise NumericalError(f"Woodbury update: inner {A.shape[1]}x{A.shape[1]} system not positive definite") from exc
    out = V_t - W @ scipy.linalg.cho_solve(cf, W.T)
    return (out + out.T) / 2


@dataclass
class GoldenResult:
    alpha: float
    iterations: int
    evaluations: int


def golden_section_max(f, tol: float) -> GoldenResult:
    """Maximize a unimodal ``f`` on ``[0, 1]`` by golden-section search.

    The bracket shrinks by ``1/phi`` per iteration until narrower than
    ``tol``; each shrink costs exactly one new evaluation of ``f``.
    Returns the midpoint of the final bracket.
    """
    if not 0 < tol < 1:
        raise ValidationError(f"tolerance must lie in (0, 1), got {tol}")
    a, b, h = 0.0, 1.0, 1.0
    c, d = a + h * INV_PHI_SQ, a + h * INV_PHI
    fc, fd = f(c), f(d)
    evals = 2
    # guards against a bracket stuck at float resolution when tol < ulp
    max_iter = math.ceil(math.log(tol) / math.log(INV_PHI)) + 4
    it = 0
    while abs(a - b) >= tol and it < max_iter:
        h *= INV_PHI
        if fc > fd:
            b, d, fd = d, c, fc
            c = a + h * INV_PHI_SQ
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + h * INV_PHI
            fd = f(d)
        evals += 1
        it += 1
    return GoldenResult((a + b) / 2, it, evals)


def _line_search(gram: np.ndarray, d: int, alpha_tol: float) -> tuple[float, float]:
    alpha = golden_section_max(lambda a: _log_det_delta(gram, d, a), alpha_tol).alpha
    delta = _log_det_delta(gram, d, alpha)
    # a gain at rounding level is no gain: stay put rather than drift
    if delta <= LINE_SEARCH_SLACK:
        return 0.0, 0.0
    return alpha, delta


def golden_search(V_inv: np.ndarray, A: np.ndarray, alpha_tol: float) -> float:
    """Step size maximizing :func:`update_log_det` over ``alpha`` in ``[0, 1]``.

    Returns 0 when the best probe improves the objective by at most
    ``LINE_SEARCH_SLACK`` (flat or decreasing objective).
    """
    A = np.asarray(A, dtype=float).reshape(len(V_inv), -1)
    return _line_search(A.T @ V_inv @ A, len(V_inv), alpha_tol)[0]


def initial_design(features: ItemFeatureMatrix, collection: SubsetCollection, gamma: float,
                   rng: np.random.Generator) -> DesignDistribution:
    """Default starting design.

    With ``gamma > 0`` a single uniformly drawn subset. With ``gamma = 0``,
    uniform weight on ``ceil(d / r)`` random subsets, grown in batches of the
    same size until the information matrix has full rank.
    """
    if gamma > 0:
        return DesignDistribution.point_mass(int(sample_indices(collection, 1, rng)[0]), collection)
    d = features.d
    Z, _ = features.pair_differences()
    if np.linalg.matrix_rank(Z) < d:
        raise SingularDesignError(
            f"pair differences span fewer than d = {d} dimensions; no design is full rank with gamma = 0"
        )
    r = math.comb(collection.K, 2)
    batch = math.ceil(d / r)
    chosen: list[int] = []
    seen = set()
    while True:
        for i in sample_indices(collection, min(batch, collection.cardinality), rng):
            i = int(i)
            if i not in seen:
                seen.add(i)
                chosen.append(i)
        items, lists = unrank_many(chosen, collection)
        V = design_matrix_sum(features, items, lists, np.full(len(chosen), 1.0 / len(chosen)))
        eig = np.linalg.eigvalsh(V)
        if eig.min() > d * np.finfo(float).eps * eig.max() * 10:
            return DesignDistribution.uniform_over(chosen, collection)
        if len(chosen) >= collection.cardinality:
            raise SingularDesignError("could not find a full-rank initial design")


def solve(features: ItemFeatureMatrix, collection: SubsetCollection,
          pi0: DesignDistribution | None = None,
          config: SolverConfig | None = None) -> tuple[DesignDistribution, SolverTrace]:
    """Run the Frank-Wolfe design solver.

    Args:
        features: item features; list structure must match ``collection``.
        collection: the K-subsets to design over.
        pi0: starting design; see :func:`initial_design` for the default.
        config: solver settings.

    Returns:
        The final design and the iteration trace.

    Raises:
        SingularDesignError: the starting information matrix is singular.
        NumericalError: the objective became non-finite.
    """
    config = config or SolverConfig()
    if tuple(collection.list_sizes) != tuple(features.list_sizes):
        raise ValidationError("collection list sizes do not match the feature lists")
    if collection.K < 2:
        raise ValidationError("subsets need at least two items")
    rng = np.random.default_rng(config.seed)
    if pi0 is None:
        pi0 = initial_design(features, collection, config.gamma, rng)
    elif pi0.collection != collection:
        raise ValidationError("initial design is over a different collection")
    try:
        state = information_matrix(pi0, features, config.gamma)
    except SingularDesignError as exc:
        raise SingularDesignError(f"initial design: {exc}") from exc

    pi = pi0.copy()
    V_inv, objective = state.V_inv, state.log_det
    gamma_eff = config.gamma
    d = features.d
    trace = SolverTrace(initial_objective=objective)

    full = config.lmo_mode == "full"
    if full:
        if collection.cardinality > FULL_LMO_LIMIT:
            raise ValidationError(
                f"full LMO over {collection.cardinality} subsets exceeds the {FULL_LMO_LIMIT} limit"
            )
        cand_idx = np.arange(collection.cardinality, dtype=np.int64)
        cand_items, cand_lists = unrank_many(cand_idx, collection)
    R = min(config.R, collection.cardinality)

    for t in range(config.T_od):
        t0 = time.monotonic()
        if not full:
            cand_idx = np.asarray(sample_indices(collection, R, rng))
            cand_items, cand_lists = unrank_many(cand_idx, collection)
        D = pair_gradient_table(V_inv, features)
        G = subset_gradients(D, cand_items, cand_lists)
        g_max = float(G.max())
        hits = np.flatnonzero(G == g_max)
        pos = hits[np.argmin(cand_idx[hits])]
        best = int(cand_idx[pos])
        if full and config.stop_gap is not None and g_max - d <= config.stop_gap:
            trace.stopped_early = True
            break

        Xs = features.X[features.rows(cand_items[pos:pos + 1], cand_lists[pos:pos + 1])[0]]
        a_i, b_i = np.triu_indices(collection.K, 1)
        A = (Xs[a_i] - Xs[b_i]).T
        gram = A.T @ V_inv @ A
        alpha, delta = _line_search(gram, d, config.alpha_tol)

        if alpha > 0:
            V_inv = update_inverse(V_inv, A, alpha)
            pi.mix(best, alpha)
            gamma_eff *= 1.0 - alpha
            objective += delta
        if config.inverse_refresh_period and (t + 1) % config.inverse_refresh_period == 0:
            if config.refresh_gamma:
                gamma_eff = config.gamma
            idx, w = pi.arrays()
            items, lists = unrank_many(idx, collection)
            state = factorize(design_matrix_sum(features, items, lists, w) + gamma_eff * np.eye(d), gamma_eff)
            V_inv, objective = state.V_inv, state.log_det
        if not np.isfinite(objective):
            raise NumericalError(f"objective became non-finite at iteration {t} (subset {best}, alpha {alpha})")
        trace.records.append(IterationRecord(objective, best, alpha, g_max, time.monotonic() - t0))

    trace.V_inv = V_inv
    trace.gamma_effective = gamma_eff
    return pi, trace


def optimality_gap(pi: DesignDistribution, features: ItemFeatureMatrix, gamma: float = 0.0) -> float:
    """Equivalence-theorem gap ``max_S G(S) - d`` by scanning every subset."""
    collection = pi.collection
    if collection.cardinality > FULL_LMO_LIMIT:
        raise ValidationError("collection too large for an exhaustive gap scan")
    state = information_matrix(pi, features, gamma)
    items, lists = unrank_many(np.arange(collection.cardinality), collection)
    G = subset_gradients(pair_gradient_table(state.V_inv, features), items, lists)
    return float(G.max()) - features.d
