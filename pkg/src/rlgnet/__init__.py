"""Temporal knowledge graph extrapolation with repeating, local and global history modules."""
from rlgnet.config import TrainConfig, load_config
from rlgnet.data import SnapshotSequence, add_reverse_relations, load_dataset
from rlgnet.evaluate import EnsembleConfig, ablate, evaluate, fuse_scores
from rlgnet.history import CandidateIndex, build_repeating_graph, repeating_proportion
from rlgnet.kernels import BACKEND as KERNEL_BACKEND
from rlgnet.train import train_module

__version__ = "0.1.0"

__all__ = [
    "CandidateIndex",
    "EnsembleConfig",
    "KERNEL_BACKEND",
    "SnapshotSequence",
    "TrainConfig",
    "ablate",
    "add_reverse_relations",
    "build_repeating_graph",
    "evaluate",
    "fuse_scores",
    "load_config",
    "load_dataset",
    "repeating_proportion",
    "train_module",
]
