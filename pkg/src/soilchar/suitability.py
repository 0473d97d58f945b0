"""Crop-suitability verdicts from a (pH, moisture, temperature) reading.

The reading is checked against closed optimum intervals supplied by an
agronomist. Salinity is reported elsewhere and deliberately not gated here.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from datetime import datetime

from ._io import atomic_write
from .errors import ValidationError
from .measurement import SoilReading

# (reading attribute, ranges attribute, tag stem); order fixes the problem order
PARAMETERS = (
    ("ph", "ph", "ph"),
    ("moisture_pct", "moisture_pct", "moisture"),
    ("temperature_c", "temperature_c", "temperature"),
)
PROBLEM_TAGS = tuple(f"{side}-{stem}" for _, _, stem in PARAMETERS for side in ("low", "high"))


@dataclass(frozen=True)
class Interval:
    low: float
    high: float

    def __post_init__(self):
        if not (math.isfinite(self.low) and math.isfinite(self.high)):
            raise ValidationError("interval bounds must be finite")
        if self.low > self.high:
            raise ValidationError(f"interval [{self.low}, {self.high}] is inverted")

    def __contains__(self, value: float) -> bool:
        return self.low <= value <= self.high

    def as_list(self) -> list[float]:
        return [self.low, self.high]


@dataclass(frozen=True)
class OptimumRanges:
    ph: Interval
    moisture_pct: Interval
    temperature_c: Interval


@dataclass(frozen=True)
class Decision:
    suitable: bool
    problems: tuple[str, ...]

    @property
    def verdict(self) -> str:
        return "SUITABLE" if self.suitable else "UNSUITABLE"


def analyze(reading: SoilReading, ranges: OptimumRanges) -> Decision:
    problems = []
    for reading_attr, range_attr, stem in PARAMETERS:
        value = getattr(reading, reading_attr)
        interval = getattr(ranges, range_attr)
        if value < interval.low:
            problems.append(f"low-{stem}")
        elif value > interval.high:
            problems.append(f"high-{stem}")
    return Decision(suitable=not problems, problems=tuple(problems))


def ranges_from_dict(doc: dict) -> OptimumRanges:
    if not isinstance(doc, dict):
        raise ValidationError("ranges document must be a mapping")
    intervals = {}
    for _, name, _ in PARAMETERS:
        if name not in doc:
            raise ValidationError(f"ranges document is missing {name!r}")
        bounds = doc[name]
        try:
            low, high = (float(v) for v in bounds)
        except (TypeError, ValueError) as exc:
            raise ValidationError(f"{name}: expected [min, max], got {bounds!r}") from exc
        try:
            intervals[name] = Interval(low, high)
        except ValidationError as exc:
            raise ValidationError(f"{name}: {exc}") from exc
    return OptimumRanges(**intervals)


def ranges_to_dict(ranges: OptimumRanges) -> dict:
    return {name: getattr(ranges, name).as_list() for _, name, _ in PARAMETERS}


def load_ranges(path) -> OptimumRanges:
    with open(path, encoding="utf-8") as fh:
        try:
            doc = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ValidationError(f"{path}: not a ranges document ({exc})") from exc
    return ranges_from_dict(doc)


def save_ranges(ranges: OptimumRanges, path) -> None:
    atomic_write(path, json.dumps(ranges_to_dict(ranges), indent=2) + "\n")


def reading_from_dict(doc: dict) -> SoilReading:
    try:
        ts = doc.get("timestamp")
        return SoilReading(
            moisture_pct=float(doc["moisture_pct"]),
            ph=float(doc["ph"]),
            temperature_c=float(doc["temperature_c"]),
            timestamp=datetime.fromisoformat(ts.replace("Z", "+00:00")) if ts else None,
        )
    except (KeyError, TypeError, ValueError, AttributeError) as exc:
        if isinstance(exc, ValidationError):
            raise
        raise ValidationError(f"malformed reading document: {exc!r}") from exc


def load_reading(path) -> SoilReading:
    with open(path, encoding="utf-8") as fh:
        try:
            doc = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ValidationError(f"{path}: not a reading document ({exc})") from exc
    return reading_from_dict(doc)
