"""Graph collaborative filtering with social and user-correlation channels.

The model propagates user and item embeddings over three sparse operators
(user-item interactions, a social graph and a bucketed Jaccard correlation
graph among users) with linear layers, averages the layers, and is trained
with a BPR pairwise loss.
"""
from .data import Dataset, load_dataset, preprocess, save_dataset
from .graph import GraphInputs, build_graph_inputs, classify_f, run_label
from .metrics import MetricsReport, evaluate_all
from .model import EmbeddingState, ModelConfig, forward, forward_final
from .sparse import SparseMatrix, spmm
from .train import TrainConfig, TrainHistory, train

__all__ = [
    "Dataset", "load_dataset", "preprocess", "save_dataset",
    "GraphInputs", "build_graph_inputs", "classify_f", "run_label",
    "MetricsReport", "evaluate_all",
    "EmbeddingState", "ModelConfig", "forward", "forward_final",
    "SparseMatrix", "spmm",
    "TrainConfig", "TrainHistory", "train",
]
__version__ = "0.1.0"
