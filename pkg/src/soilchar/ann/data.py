"""Training data containers, splitting, and the synthetic stand-in dataset."""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from ..errors import InsufficientDataError, ParseError, ValidationError
from ..measurement import ResistivitySample
from .network import INPUT_FEATURES, TARGET

DEFAULT_FRACTIONS = (0.70, 0.15, 0.15)
DEFAULT_LEVELS = (5.0, 10.0, 20.0, 30.0)
# Ranges seen across the field/lab/IoT comparison tables.
PH_RANGE = (3.1, 5.0)
TEMPERATURE_RANGE = (21.0, 23.0)


@dataclass(frozen=True)
class Dataset:
    inputs: np.ndarray  # n x 4, columns in INPUT_FEATURES order
    targets: np.ndarray  # n

    def __post_init__(self):
        inputs = np.asarray(self.inputs, dtype=float).reshape(-1, 4)
        targets = np.asarray(self.targets, dtype=float).reshape(-1)
        if inputs.shape[0] != targets.shape[0]:
            raise ValidationError("inputs and targets differ in length")
        object.__setattr__(self, "inputs", inputs)
        object.__setattr__(self, "targets", targets)

    def __len__(self):
        return self.targets.shape[0]

    def subset(self, index) -> "Dataset":
        return Dataset(self.inputs[index], self.targets[index])

    @classmethod
    def concat(cls, parts: Iterable["Dataset"]) -> "Dataset":
        parts = list(parts)
        return cls(
            np.concatenate([p.inputs for p in parts]), np.concatenate([p.targets for p in parts])
        )


def _check_fractions(fractions: Sequence[float]) -> None:
    if len(fractions) != 3 or any(not f > 0 for f in fractions):
        raise ValidationError(f"need three positive split fractions, got {fractions}")
    if not math.isclose(sum(fractions), 1.0, abs_tol=1e-9):
        raise ValidationError(f"split fractions sum to {sum(fractions)}, expected 1")


def split_sizes(n: int, fractions: Sequence[float] = DEFAULT_FRACTIONS) -> tuple[int, int, int]:
    _check_fractions(fractions)
    # the epsilon keeps e.g. 0.7 * 30 = 20.999... from flooring down
    n_train = math.floor(n * fractions[0] + 1e-9)
    n_val = math.floor(n * fractions[1] + 1e-9)
    return n_train, n_val, n - n_train - n_val


def split_dataset(dataset: Dataset, fractions=DEFAULT_FRACTIONS, seed: int = 0):
    """Shuffle by ``seed`` and cut into (train, validation, test)."""
    n = len(dataset)
    if n < 3:
        raise InsufficientDataError(f"need at least 3 samples to split, got {n}")
    n_train, n_val, _ = split_sizes(n, fractions)
    order = np.random.default_rng(seed).permutation(n)
    return (
        dataset.subset(order[:n_train]),
        dataset.subset(order[n_train : n_train + n_val]),
        dataset.subset(order[n_train + n_val :]),
    )


def synthesize_training_set(
    calibration: Iterable[ResistivitySample],
    moisture_levels: Iterable[float] = DEFAULT_LEVELS,
    seed: int = 0,
    draws_per_point: int = 1,
    n_samples: int | None = None,
) -> Dataset:
    """Build (moisture, pH, temperature, resistivity) -> salinity samples from calibration rows.

    Resistivity and salinity come straight from the calibration table; pH
    and temperature are drawn uniformly from the field ranges. Each row is
    used ``draws_per_point`` times, or, when ``n_samples`` is given, each row
    ``n_samples // rows`` times plus one extra draw for a seeded choice of
    ``n_samples % rows`` rows.
    """
    levels = [float(v) for v in moisture_levels]
    rows = [s for s in calibration if float(s.moisture_pct) in levels]
    present = {float(s.moisture_pct) for s in rows}
    missing = [lv for lv in levels if lv not in present]
    if missing:
        raise ValidationError(f"calibration has no rows at moisture levels {missing}")

    rng = np.random.default_rng(seed)
    if n_samples is None:
        if draws_per_point < 1:
            raise ValidationError("draws_per_point must be >= 1")
        counts = np.full(len(rows), draws_per_point)
    else:
        if n_samples < 1:
            raise ValidationError("n_samples must be >= 1")
        counts = np.full(len(rows), n_samples // len(rows))
        extra = rng.choice(len(rows), size=n_samples % len(rows), replace=False)
        counts[extra] += 1

    base = np.array([[s.moisture_pct, s.resistivity_kohm_m, s.salinity_pct] for s in rows])
    base = np.repeat(base, counts, axis=0)
    m = base.shape[0]
    ph = rng.uniform(*PH_RANGE, size=m)
    temp = rng.uniform(*TEMPERATURE_RANGE, size=m)
    inputs = np.column_stack([base[:, 0], ph, temp, base[:, 1]])
    return Dataset(inputs, base[:, 2])


DATASET_FIELDS = INPUT_FEATURES + (TARGET,)


def load_dataset(path) -> Dataset:
    with open(path, newline="", encoding="utf-8") as fh:
        text = fh.read()
    if not text.strip():
        return Dataset(np.empty((0, 4)), np.empty(0))
    reader = csv.DictReader(io.StringIO(text))
    missing = [f for f in DATASET_FIELDS if f not in (reader.fieldnames or [])]
    if missing:
        raise ParseError(f"missing columns {missing}", row=1)
    rows = []
    for rec in reader:
        try:
            values = [float(rec[f]) for f in DATASET_FIELDS]
        except (TypeError, ValueError) as exc:
            raise ParseError(str(exc), row=reader.line_num) from exc
        if not all(map(math.isfinite, values)):
            raise ParseError("non-finite value", row=reader.line_num)
        rows.append(values)
    arr = np.asarray(rows, dtype=float).reshape(-1, 5)
    return Dataset(arr[:, :4], arr[:, 4])


def dataset_to_csv(dataset: Dataset) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(DATASET_FIELDS)
    for x, t in zip(dataset.inputs, dataset.targets):
        writer.writerow([repr(float(v)) for v in x] + [repr(float(t))])
    return buf.getvalue()
