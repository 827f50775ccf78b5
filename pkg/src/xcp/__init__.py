"""Expanded-CP nonnegative tensor completion for dynamic QoS data.

Predicts the missing cells of a highly incomplete user x service x time
measurement tensor with a widened CP factorization (rank-M user-service
interaction per component plus per-mode biases), trained by nonnegative
multiplicative updates over the observed entries only.
"""

from .data import (
    DatasetSplit,
    SyntheticSpec,
    generate_synthetic,
    load_tensor,
    parse_qos_log,
    random_split,
    repeated_splits,
    write_qos_log,
)
from .kernels import backend_name
from .metrics import Metrics, ResultTable, aggregate, evaluate, friedman_rank
from .model import ExpandedCPModel, ModelConfig, init_random
from .solver import TrainConfig, TrainReport, epoch_update, gradient_fd, objective, train
from .tensor import Entry, ObservedTensor, build

__version__ = "0.1.0"

__all__ = [
    "DatasetSplit",
    "Entry",
    "ExpandedCPModel",
    "Metrics",
    "ModelConfig",
    "ObservedTensor",
    "ResultTable",
    "SyntheticSpec",
    "TrainConfig",
    "TrainReport",
    "aggregate",
    "backend_name",
    "build",
    "epoch_update",
    "evaluate",
    "friedman_rank",
    "generate_synthetic",
    "gradient_fd",
    "init_random",
    "load_tensor",
    "objective",
    "parse_qos_log",
    "random_split",
    "repeated_splits",
    "train",
    "write_qos_log",
]
