"""Exponential resistivity-salinity models, one per calibrated moisture level.

Each level follows ``rho = A * exp(-B * salinity)``. Coefficients come from
ordinary least squares on ``(salinity, ln rho)`` (the spreadsheet "exponential
trendline"), and R² is reported in the same log space. Inversion is closed
form: ``salinity = ln(A / rho) / B``.
"""

from __future__ import annotations

import json
import math
import warnings
from dataclasses import asdict, dataclass, field
from typing import Iterable, Sequence

import numpy as np

from ._io import atomic_write
from .errors import (
    AboveCalibrationError,
    BelowCalibrationError,
    DomainError,
    InsufficientDataError,
    NoModelError,
    OutOfCalibrationWarning,
    UndefinedStatisticError,
    ValidationError,
)
from .measurement import ResistivitySample

CALIBRATED_MAX_SALINITY = 100.0
TOLERATED_MAX_SALINITY = 110.0
LOW_CONFIDENCE_R2 = 0.6


@dataclass(frozen=True)
class ExponentialModel:
    amplitude: float
    decay: float
    moisture_pct: float | None = None
    r_squared: float = 1.0
    n_points: int = 0

    def __post_init__(self):
        if not (math.isfinite(self.amplitude) and self.amplitude > 0):
            raise DomainError(f"amplitude must be finite and > 0, got {self.amplitude}")
        if not (math.isfinite(self.decay) and self.decay > 0):
            raise DomainError(f"decay must be finite and > 0, got {self.decay}")
        if not 0 <= self.r_squared <= 1:
            raise DomainError(f"r_squared must lie in [0, 1], got {self.r_squared}")

    @property
    def low_confidence(self) -> bool:
        return self.r_squared < LOW_CONFIDENCE_R2

    def predict(self, salinity_pct: float) -> float:
        return predict_resistivity(self, salinity_pct)

    def invert(self, resistivity_kohm_m: float) -> float:
        return invert_salinity(self, resistivity_kohm_m)


def _as_arrays(points) -> tuple[np.ndarray, np.ndarray]:
    pts = np.asarray(list(points), dtype=float)
    if pts.size == 0:
        return np.empty(0), np.empty(0)
    if pts.ndim != 2 or pts.shape[1] != 2:
        raise ValidationError("points must be (salinity, resistivity) pairs")
    return pts[:, 0], pts[:, 1]


def _ln_r_squared(x: np.ndarray, ln_y: np.ndarray, ln_a: float, slope: float) -> float:
    ss_tot = float(np.sum((ln_y - ln_y.mean()) ** 2))
    if ss_tot == 0.0:
        raise UndefinedStatisticError("ln-resistivity has zero variance; R² is undefined")
    ss_res = float(np.sum((ln_y - (ln_a + slope * x)) ** 2))
    return 1.0 - ss_res / ss_tot


def fit_exponential(points, moisture_pct: float | None = None) -> ExponentialModel:
    """Fit ``Y = A exp(-B X)`` to (salinity %, resistivity kΩ·m) pairs by OLS in ln space.

    Raises InsufficientDataError for fewer than three points or a single
    salinity value, and DomainError for non-positive resistivities or data
    that does not decay with salinity.
    """
    x, y = _as_arrays(points)
    if x.size < 3:
        raise InsufficientDataError(f"need at least 3 points, got {x.size}")
    if np.all(x == x[0]):
        raise InsufficientDataError("all points share one salinity value")
    if np.any(~np.isfinite(y)) or np.any(y <= 0):
        raise DomainError("resistivities must be finite and > 0")

    ln_y = np.log(y)
    x_mean = x.mean()
    dx = x - x_mean
    slope = float(np.dot(dx, ln_y - ln_y.mean()) / np.dot(dx, dx))
    ln_a = float(ln_y.mean() - slope * x_mean)
    if not slope < 0:
        raise DomainError(f"resistivity does not decay with salinity (ln-slope {slope:.3g})")
    r2 = _ln_r_squared(x, ln_y, ln_a, slope)
    return ExponentialModel(
        amplitude=math.exp(ln_a),
        decay=-slope,
        moisture_pct=moisture_pct,
        r_squared=min(1.0, max(0.0, r2)),
        n_points=int(x.size),
    )


def predict_resistivity(model: ExponentialModel, salinity_pct: float) -> float:
    if salinity_pct < 0:
        raise DomainError(f"salinity must be >= 0, got {salinity_pct}")
    return model.amplitude * math.exp(-model.decay * salinity_pct)


def invert_salinity(model: ExponentialModel, resistivity_kohm_m: float) -> float:
    """Salinity % that the model maps to ``resistivity_kohm_m``.

    Results between 100 % and 110 % are returned with an
    OutOfCalibrationWarning; anything outside [0, 110] raises.
    """
    if not resistivity_kohm_m > 0:
        raise DomainError(f"resistivity must be > 0, got {resistivity_kohm_m}")
    if resistivity_kohm_m > model.amplitude:
        raise AboveCalibrationError(
            f"resistivity {resistivity_kohm_m:g} exceeds the zero-salinity value "
            f"{model.amplitude:g} of the {model.moisture_pct}% model"
        )
    salinity = math.log(model.amplitude / resistivity_kohm_m) / model.decay
    if salinity > TOLERATED_MAX_SALINITY:
        raise BelowCalibrationError(
            f"resistivity {resistivity_kohm_m:g} implies {salinity:.4g}% salinity, "
            f"beyond the {TOLERATED_MAX_SALINITY:g}% limit"
        )
    if salinity > CALIBRATED_MAX_SALINITY:
        warnings.warn(
            f"implied salinity {salinity:.4g}% is above the calibrated 0-100% range",
            OutOfCalibrationWarning,
            stacklevel=2,
        )
    return salinity


def r_squared(model, points) -> float:
    """Log-space coefficient of determination of ``model`` on ``points``.

    Unlike the value stored on a fitted model this is not clamped: a model
    worse than the flat mean line scores below zero.
    """
    x, y = _as_arrays(points)
    if x.size < 2:
        raise InsufficientDataError(f"need at least 2 points, got {x.size}")
    if np.any(y <= 0):
        raise DomainError("resistivities must be > 0")
    return _ln_r_squared(x, np.log(y), math.log(model.amplitude), -model.decay)


def drop_rising_points(points: Sequence[tuple[float, float]]) -> list[tuple[float, float]]:
    """Keep points whose resistivity does not rise above the preceding one in salinity order."""
    ordered = sorted(points)
    kept = ordered[:1]
    for prev, cur in zip(ordered, ordered[1:]):
        if cur[1] <= prev[1]:
            kept.append(cur)
    return kept


@dataclass
class ModelBank:
    models: dict[float, ExponentialModel] = field(default_factory=dict)

    def add(self, model: ExponentialModel) -> None:
        if model.moisture_pct is None:
            raise ValidationError("bank models need a moisture level")
        key = float(model.moisture_pct)
        if key in self.models:
            raise ValidationError(f"bank already holds a {key:g}% model")
        self.models[key] = model

    def levels(self) -> list[float]:
        return sorted(self.models)

    def __len__(self):
        return len(self.models)


def select_model(bank: ModelBank, moisture_pct: float) -> ExponentialModel:
    """Nearest calibrated level; equidistant queries go to the drier level."""
    if not bank.models:
        raise NoModelError("model bank is empty")
    best = min(bank.levels(), key=lambda level: (abs(level - moisture_pct), level))
    return bank.models[best]


def fit_bank(
    samples: Iterable[ResistivitySample],
    levels: Iterable[float] | None = None,
    drop_rising: bool = True,
) -> ModelBank:
    """Fit one model per moisture level present in ``samples``.

    With ``drop_rising`` (the default) a reading whose resistivity rises above
    its predecessor is left out of that level's fit; only the 20 % level's
    last point of the bundled calibration table is affected.
    """
    by_level: dict[float, list[tuple[float, float]]] = {}
    for s in samples:
        by_level.setdefault(float(s.moisture_pct), []).append((s.salinity_pct, s.resistivity_kohm_m))
    wanted = sorted(by_level) if levels is None else [float(v) for v in levels]
    bank = ModelBank()
    for level in wanted:
        if level not in by_level:
            raise NoModelError(f"no calibration rows at {level:g}% moisture")
        points = by_level[level]
        if drop_rising:
            points = drop_rising_points(points)
        bank.add(fit_exponential(points, moisture_pct=level))
    return bank


def bank_to_dict(bank: ModelBank) -> dict:
    return {"models": [asdict(bank.models[k]) for k in bank.levels()]}


def bank_from_dict(doc: dict) -> ModelBank:
    bank = ModelBank()
    try:
        for rec in doc["models"]:
            bank.add(
                ExponentialModel(
                    amplitude=float(rec["amplitude"]),
                    decay=float(rec["decay"]),
                    moisture_pct=float(rec["moisture_pct"]),
                    r_squared=float(rec["r_squared"]),
                    n_points=int(rec.get("n_points", 0)),
                )
            )
    except (KeyError, TypeError) as exc:
        raise ValidationError(f"malformed model bank document: {exc}") from exc
    return bank


def save_bank(bank: ModelBank, path) -> None:
    # json writes floats with repr, which round-trips every double exactly
    atomic_write(path, json.dumps(bank_to_dict(bank), indent=2) + "\n")


def load_bank(path) -> ModelBank:
    with open(path, encoding="utf-8") as fh:
        try:
            doc = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ValidationError(f"{path}: not a model bank document ({exc})") from exc
    return bank_from_dict(doc)

