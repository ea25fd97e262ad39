"""Trial selection by maximum weight cliques over a blended time-series
similarity, with comparison selectors and a hold-out evaluation harness.
"""

from .clique import Clique, SelectionResult, grow_clique, mwc_select
from .errors import (
    ConfigError,
    DataError,
    EmptyClassError,
    EmptyInputError,
    InvariantViolation,
    MwcselError,
    ParseError,
    StratificationError,
)
from .experiment import ExperimentConfig, EvalReport, knn_classify, run_experiment, run_sweep
from .graph import GraphView, WeightedGraph, build_graph, prune_edges
from .ingest import SplitPlan, SynthConfig, Trial, TrialSet, holdout_split, load_trials, synth_trials
from .similarity import SimilarityMatrix, SimilarityParams, discrete_frechet, local_trend, similarity_matrix
from .threshold import SimilarityHistogram, delta_schedule, select_threshold, similarity_distribution

__version__ = "0.1.0"
