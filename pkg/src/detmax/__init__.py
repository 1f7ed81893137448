"""Composable core-sets for determinant (volume) maximization."""

__version__ = "0.1.0"

from .algorithms import (CombinatorialCapError, CoreSet, brute_force, brute_force_maxdet,
                         greedy, local_search, swap_log_gain)
from .coreset import (PipelineConfig, RunReport, aggregate, compose, partition, run_pipeline,
                      summarize, verify_composability, verify_directional_height)
from .data import DataError, DatasetSpec, generate, load_points
from .estimators import (BruteForceVolumeSelector, ComposableCoresetSelector,
                         GreedyVolumeSelector, LocalSearchVolumeSelector)
from .geometry import (NEG_INF, OrthoBasis, PointSet, dist_to_span, extend_basis,
                       inner_product, linear_oracle, log_volume, rbf_kernelize,
                       sample_subspace)

__all__ = [
    "BruteForceVolumeSelector", "CombinatorialCapError", "ComposableCoresetSelector",
    "CoreSet", "DataError", "DatasetSpec", "GreedyVolumeSelector",
    "LocalSearchVolumeSelector", "NEG_INF", "OrthoBasis", "PipelineConfig", "PointSet",
    "RunReport", "aggregate", "brute_force", "brute_force_maxdet", "compose",
    "dist_to_span", "extend_basis", "generate", "greedy", "inner_product", "linear_oracle",
    "load_points", "local_search", "log_volume", "partition", "rbf_kernelize",
    "run_pipeline", "sample_subspace", "summarize", "swap_log_gain",
    "verify_composability", "verify_directional_height",
]
