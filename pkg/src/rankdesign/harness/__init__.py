from .experiment import ExperimentConfig, ResultsTable, run_experiment
from .io import emit_results, load_features

__all__ = ["ExperimentConfig", "ResultsTable", "run_experiment", "emit_results", "load_features"]
