"""D-optimal K-subset designs for learning Plackett-Luce rankings."""

from .combinatorics import Subset, SubsetCollection, rank_subset, sample_subcollection, unrank_subset
from .design import DesignDistribution, ItemFeatureMatrix, information_matrix
from .errors import CapacityError, NumericalError, ParseError, SingularDesignError, ValidationError
from .metrics import evaluate, ndcg_at_k, ranking_loss
from .plackett_luce import MleConfig, RankingObservation, fit_mle
from .solver import SolverConfig, optimality_gap, solve

__version__ = "0.1.0"

__all__ = [
    "CapacityError", "DesignDistribution", "ItemFeatureMatrix", "MleConfig", "NumericalError", "ParseError",
    "RankingObservation", "SingularDesignError", "SolverConfig", "Subset", "SubsetCollection", "ValidationError",
    "evaluate", "fit_mle", "information_matrix", "ndcg_at_k", "optimality_gap", "rank_subset", "ranking_loss",
    "sample_subcollection", "solve", "unrank_subset",
]
