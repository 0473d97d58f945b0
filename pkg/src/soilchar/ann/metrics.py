"""Post-training diagnostics: MSE, regression R, and the error histogram."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import UndefinedStatisticError, ValidationError
from .data import Dataset
from .network import Network

HISTOGRAM_BINS = 20


@dataclass(frozen=True)
class Evaluation:
    mse: float
    r: float
    r_squared: float


@dataclass(frozen=True)
class Histogram:
    bin_edges: np.ndarray
    counts: np.ndarray


def regression_stats(outputs, targets) -> tuple[float, float]:
    """Pearson r between outputs and targets, and its square."""
    outputs = np.asarray(outputs, dtype=float)
    targets = np.asarray(targets, dtype=float)
    do = outputs - outputs.mean()
    dt = targets - targets.mean()
    denom = np.sqrt(np.dot(do, do) * np.dot(dt, dt))
    if denom == 0.0:
        raise UndefinedStatisticError("correlation is undefined for a constant series")
    r = float(np.clip(np.dot(do, dt) / denom, -1.0, 1.0))
    return r, r * r


def evaluate(network: Network, samples: Dataset) -> Evaluation:
    """MSE in normalized target space plus output/target correlation."""
    if len(samples) == 0:
        raise ValidationError("evaluate needs at least one sample")
    yn = network.normalized_output(samples.inputs)
    tn = network.target_norm.apply(samples.targets)
    mse = float(np.mean((tn - yn) ** 2))
    r, r2 = regression_stats(yn, tn)
    return Evaluation(mse=mse, r=r, r_squared=r2)


def histogram(errors, bins: int = HISTOGRAM_BINS) -> Histogram:
    errors = np.asarray(errors, dtype=float).reshape(-1)
    if errors.size == 0:
        raise ValidationError("histogram needs at least one error value")
    # numpy widens a zero-width range to +-0.5 and closes the last bin on the right
    counts, edges = np.histogram(errors, bins=bins)
    return Histogram(bin_edges=edges, counts=counts)


def error_histogram(network: Network, samples: Dataset, bins: int = HISTOGRAM_BINS) -> Histogram:
    """Histogram of ``target - output`` in salinity percentage points."""
    if len(samples) == 0:
        raise ValidationError("error_histogram needs at least one sample")
    return histogram(samples.targets - network.predict(samples.inputs), bins=bins)
