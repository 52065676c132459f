"""Collaborative filtering with multi-channel diffusion similarity."""

from .channels import ChannelGraph, build_channel_graph, graph_consistency_check
from .evaluation import (
    EvaluationReport,
    ExperimentConfig,
    MetricPair,
    density_sweep,
    mae,
    rmse,
    run_experiment,
)
from .ingestion import (
    generate_synthetic,
    load_csv,
    load_dataset,
    load_movielens,
    load_netflix,
    subsample_netflix,
    write_csv,
    write_movielens,
)
from .predictor import Prediction, PredictorOptions, predict, predict_probe
from .ratings import (
    DataError,
    InvariantError,
    RatingsDataset,
    Split,
    UserMeans,
    compute_user_means,
    dataset_stats,
    split_dataset,
)
from .similarity import (
    SimilarityMatrix,
    diffuse_from_user,
    diffusion_similarity,
    diffusion_similarity_column,
    pearson_similarity,
)

__version__ = "0.1.0"
