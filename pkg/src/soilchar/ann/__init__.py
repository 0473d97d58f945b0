from .data import Dataset, split_dataset, synthesize_training_set
from .lm import TrainingConfig, TrainReport, lm_step, train, train_on_split
from .metrics import Evaluation, Histogram, error_histogram, evaluate
from .network import Network, NetworkTopology, Normalizer, fit_normalizer, forward, jacobian

__all__ = [
    "Dataset",
    "Evaluation",
    "Histogram",
    "Network",
    "NetworkTopology",
    "Normalizer",
    "TrainReport",
    "TrainingConfig",
    "error_histogram",
    "evaluate",
    "fit_normalizer",
    "forward",
    "jacobian",
    "lm_step",
    "split_dataset",
    "synthesize_training_set",
    "train",
    "train_on_split",
]
