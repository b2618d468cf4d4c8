"""Elicit -> fit -> evaluate experiments comparing subset-selection policies.

For every trial a true parameter is drawn (or loaded), and for each subset
size ``K``, policy and sample size ``T``: ``T`` subsets are selected, PL
feedback is simulated, the model is fit by maximum likelihood, and the
induced ranking is scored against the true one.

Random streams are derived from the master seed and the key
``(trial, K, T, policy)``, so adding a policy or a sample size never changes
the draws of another cell.
"""

from __future__ import annotations

import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from ..combinatorics import sample_indices, unrank_many
from ..design import DesignDistribution, ItemFeatureMatrix
from ..errors import NumericalError, ValidationError
from ..metrics import GAINS, evaluate
from ..plackett_luce import MleConfig, fit_mle, sample_rankings
from ..solver import SolverConfig, solve

POLICIES = ("dopewolfe", "uniform")
SELECTIONS = ("sample", "top_mass")
_POLICY_CODE = {"dopewolfe": 1, "uniform": 2}
_THETA_STREAM = 0


@dataclass
class ExperimentConfig:
    features_path: str | None = None
    K: tuple[int, ...] = (2,)
    T: tuple[int, ...] = (100,)
    trials: int = 10
    policies: tuple[str, ...] = POLICIES
    selection: str = "sample"
    solver: SolverConfig = field(default_factory=SolverConfig)
    mle: MleConfig = field(default_factory=MleConfig)
    ndcg_k: int | None = None
    gain: str = "linear"
    temperature: float = 0.1
    seed: int = 0
    theta_star_path: str | None = None
    normalize: bool = False
    list_column: str | None = None
    workers: int = 1

    def __post_init__(self):
        self.K = _as_tuple(self.K)
        self.T = _as_tuple(self.T)
        self.policies = tuple(self.policies) if not isinstance(self.policies, str) else (self.policies,)
        if self.trials < 1:
            raise ValidationError(f"trials must be >= 1, got {self.trials}")
        if not self.K or any(k < 2 for k in self.K):
            raise ValidationError(f"every K must be >= 2, got {self.K}")
        if not self.T or any(t < 1 for t in self.T):
            raise ValidationError(f"every T must be >= 1, got {self.T}")
        bad = set(self.policies) - set(POLICIES)
        if bad or not self.policies:
            raise ValidationError(f"unknown policies {sorted(bad)}; choose from {POLICIES}")
        if self.selection not in SELECTIONS:
            raise ValidationError(f"selection must be one of {SELECTIONS}")
        if self.gain not in GAINS:
            raise ValidationError(f"gain must be one of {GAINS}")
        if self.ndcg_k is not None and self.ndcg_k < 1:
            raise ValidationError("ndcg_k must be >= 1")
        if self.workers < 1:
            raise ValidationError("workers must be >= 1")


def _as_tuple(v):
    if isinstance(v, (int, np.integer)):
        return (int(v),)
    return tuple(int(x) for x in v)


@dataclass
class TrialRow:
    policy: str
    K: int
    T: int
    trial: int
    ranking_loss: float
    ndcg: float
    solve_seconds: float
    fit_seconds: float

    def as_tuple(self):
        return (self.policy, self.K, self.T, self.trial, self.ranking_loss, self.ndcg,
                self.solve_seconds, self.fit_seconds)

    @property
    def key(self):
        return (self.policy, self.K, self.T, self.trial)


@dataclass
class AggregateRow:
    policy: str
    K: int
    T: int
    mean_loss: float
    se_loss: float
    mean_ndcg: float
    se_ndcg: float

    def as_tuple(self):
        return (self.policy, self.K, self.T, self.mean_loss, self.se_loss, self.mean_ndcg, self.se_ndcg)


def mean_se(values) -> tuple[float, float]:
    """Mean and standard error (sample standard deviation / sqrt(n))."""
    v = np.asarray(values, dtype=float)
    if len(v) < 2:
        return float(v.mean()), 0.0
    return float(v.mean()), float(v.std(ddof=1) / math.sqrt(len(v)))


@dataclass
class ResultsTable:
    rows: list[TrialRow] = field(default_factory=list)
    designs: dict = field(default_factory=dict, repr=False)

    def sorted_rows(self) -> list[TrialRow]:
        return sorted(self.rows, key=lambda r: r.key)

    def aggregate(self) -> list[AggregateRow]:
        groups: dict[tuple, list[TrialRow]] = {}
        for r in self.sorted_rows():
            groups.setdefault((r.policy, r.K, r.T), []).append(r)
        out = []
        for (policy, K, T), rows in groups.items():
            ml, sl = mean_se([r.ranking_loss for r in rows])
            mn, sn = mean_se([r.ndcg for r in rows])
            out.append(AggregateRow(policy, K, T, ml, sl, mn, sn))
        return out

    def lookup(self, policy, K, T) -> AggregateRow:
        for a in self.aggregate():
            if (a.policy, a.K, a.T) == (policy, K, T):
                return a
        raise KeyError((policy, K, T))


def stream(seed: int, *key: int) -> np.random.Generator:
    """Independent generator for a key tuple under a master seed."""
    return np.random.default_rng(np.random.SeedSequence(entropy=seed, spawn_key=tuple(int(k) for k in key)))


def random_theta(d: int, rng: np.random.Generator) -> np.ndarray:
    """Standard Gaussian direction scaled to unit norm."""
    theta = rng.standard_normal(d)
    return theta / np.linalg.norm(theta)


def make_synthetic_features(N: int, d: int, rng: np.random.Generator, list_sizes=None) -> ItemFeatureMatrix:
    """Gaussian item features rescaled so the largest row norm is 1."""
    X = rng.standard_normal((N, d))
    return ItemFeatureMatrix(X, list_sizes).normalize()


def select_subsets(policy: str, K: int, T: int, features: ItemFeatureMatrix,
                   design: DesignDistribution | None, selection: str, rng: np.random.Generator):
    """Pick ``T`` subsets as ``(items, list_ids)`` arrays of local item indices."""
    collection = features.collection(K)
    if policy == "uniform":
        if collection.cardinality <= np.iinfo(np.int64).max:
            idx = rng.integers(0, collection.cardinality, size=T)
        else:
            idx = [int(sample_indices(collection, 1, rng)[0]) for _ in range(T)]
    elif selection == "top_mass":
        top = design.top(design.nnz)
        idx = [top[i % len(top)] for i in range(T)]
    else:
        support, weights = design.arrays()
        idx = support[rng.choice(len(support), size=T, p=weights / weights.sum())]
    return unrank_many(idx, collection)


def solve_designs(config: ExperimentConfig, features: ItemFeatureMatrix) -> dict[int, tuple]:
    """One design per K, shared by every trial and sample size."""
    designs = {}
    if "dopewolfe" not in config.policies:
        return designs
    for K in config.K:
        t0 = time.monotonic()
        pi, trace = solve(features, features.collection(K), config=config.solver)
        designs[K] = (pi, time.monotonic() - t0, trace)
    return designs


def _annotate(exc, trial, K, T, policy):
    exc.args = (f"trial {trial}, K={K}, T={T}, policy {policy}: {exc}",) + exc.args[1:]
    return exc


def run_trial(trial: int, config: ExperimentConfig, features: ItemFeatureMatrix,
              designs: dict, theta_star: np.ndarray | None = None) -> list[TrialRow]:
    if theta_star is None:
        theta_star = random_theta(features.d, stream(config.seed, trial, _THETA_STREAM))
    true_scores = features.X @ theta_star
    rows = []
    for K in config.K:
        for policy in config.policies:
            design, solve_seconds = (designs[K][0], designs[K][1]) if policy == "dopewolfe" else (None, 0.0)
            for T in config.T:
                try:
                    rng = stream(config.seed, trial, K, T, _POLICY_CODE[policy])
                    items, lists = select_subsets(policy, K, T, features, design, config.selection, rng)
                    ranked = sample_rankings(theta_star, features, items, lists, rng)
                    t0 = time.monotonic()
                    params = fit_mle(features.rows(ranked, lists), features, config.mle)
                    fit_seconds = time.monotonic() - t0
                    report = evaluate(params.theta, features, true_scores, config.ndcg_k,
                                      config.gain, config.temperature)
                except (ValidationError, NumericalError) as exc:
                    raise _annotate(exc, trial, K, T, policy)
                rows.append(TrialRow(policy, K, T, trial, report.ranking_loss, report.ndcg,
                                     solve_seconds, fit_seconds))
    return rows


def _trial_job(args):
    return run_trial(*args)


def run_experiment(config: ExperimentConfig, features: ItemFeatureMatrix | None = None) -> ResultsTable:
    """Run every trial; ``features`` overrides ``config.features_path``."""
    from .io import load_features, load_vector

    if features is None:
        if config.features_path is None:
            raise ValidationError("no features given")
        features = load_features(config.features_path, config.normalize, config.list_column)
    elif config.normalize and not features.normalized:
        features = features.normalize()
    if max(config.K) > min(features.list_sizes):
        raise ValidationError(f"K={max(config.K)} exceeds the smallest list size {min(features.list_sizes)}")
    theta_star = None
    if config.theta_star_path is not None:
        theta_star = load_vector(config.theta_star_path)
        if theta_star.shape != (features.d,):
            raise ValidationError(f"theta_star has length {len(theta_star)}, features have d={features.d}")

    designs = solve_designs(config, features)
    jobs = [(trial, config, features, designs, theta_star) for trial in range(config.trials)]
    if config.workers == 1:
        results = [_trial_job(j) for j in jobs]
    else:
        with ProcessPoolExecutor(max_workers=config.workers) as pool:
            results = list(pool.map(_trial_job, jobs))
    table = ResultsTable([r for rows in results for r in rows], {K: v[0] for K, v in designs.items()})
    table.rows = table.sorted_rows()
    return table
