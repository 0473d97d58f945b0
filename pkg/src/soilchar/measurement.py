"""Physical measurement types, two-probe resistivity and the comparison tables.

Resistance comes from an analog multimeter whose probes sit ``electrode_spacing``
metres apart in a round bowl of radius ``container_radius``. Resistivity is
``R * A / L`` with ``A`` the bowl cross-section. Units follow the lab sheet:
resistance in kΩ, resistivity in kΩ·m.
"""

from __future__ import annotations

import csv
import io
import math
import os
from dataclasses import dataclass
from datetime import datetime, timezone
from importlib import resources
from itertools import combinations
from typing import Iterable, TextIO, Union

from .errors import DomainError, ParseError, ValidationError

CsvSource = Union[str, os.PathLike, TextIO]

CALIBRATION_FIELDS = (
    "moisture_pct",
    "sample_no",
    "sand_pct",
    "silt_pct",
    "clay_pct",
    "salinity_pct",
    "resistance_kohm",
    "resistivity_kohm_m",
)
AGREEMENT_FIELDS = ("parameter", "sample_label", "field_low", "field_high", "lab_value", "iot_value")
AGREEMENT_PARAMETERS = ("ph", "moisture", "temperature")

# The lab sheet truncates pi * 0.05**2 to this value; the bundled calibration table was built from it.
LAB_BOWL_AREA_M2 = 0.00784
LAB_PROBE_SPACING_M = 0.05


@dataclass(frozen=True)
class ProbeGeometry:
    electrode_spacing: float
    container_radius: float

    def __post_init__(self):
        if not self.electrode_spacing > 0:
            raise DomainError(f"electrode_spacing must be > 0, got {self.electrode_spacing}")
        if not self.container_radius > 0:
            raise DomainError(f"container_radius must be > 0, got {self.container_radius}")

    @property
    def area(self) -> float:
        return cross_section_area(self.container_radius)

    def resistivity(self, resistance_kohm: float) -> float:
        return resistivity(resistance_kohm, self.area, self.electrode_spacing)


@dataclass(frozen=True)
class ResistivitySample:
    moisture_pct: float
    sample_no: int
    sand_pct: float
    silt_pct: float
    clay_pct: float
    salinity_pct: float
    resistance_kohm: float
    resistivity_kohm_m: float

    def __post_init__(self):
        if not 0 <= self.salinity_pct <= 100:
            raise ValidationError(f"salinity_pct must lie in [0, 100], got {self.salinity_pct}")
        if not self.resistance_kohm > 0:
            raise ValidationError(f"resistance_kohm must be > 0, got {self.resistance_kohm}")
        if not self.resistivity_kohm_m > 0:
            raise ValidationError(f"resistivity_kohm_m must be > 0, got {self.resistivity_kohm_m}")
        total = self.sand_pct + self.silt_pct + self.clay_pct
        if not math.isclose(total, 100.0, abs_tol=1e-6):
            raise ValidationError(f"particle fractions sum to {total}, expected 100")


@dataclass(frozen=True)
class SoilReading:
    moisture_pct: float
    ph: float
    temperature_c: float
    timestamp: datetime | None = None

    def __post_init__(self):
        for name in ("moisture_pct", "ph", "temperature_c"):
            if not math.isfinite(getattr(self, name)):
                raise ValidationError(f"{name} must be finite")
        if not 0 <= self.ph <= 14:
            raise ValidationError(f"ph must lie in [0, 14], got {self.ph}")
        if not 0 <= self.moisture_pct <= 100:
            raise ValidationError(f"moisture_pct must lie in [0, 100], got {self.moisture_pct}")
        if self.timestamp is None:
            object.__setattr__(self, "timestamp", datetime.now(timezone.utc))


@dataclass(frozen=True)
class AgreementRow:
    """One sample measured three ways: field meter, laboratory and the IoT rig.

    Field meters for moisture report a band ("80 to 90"), so the field value
    is kept as a closed interval; a scalar reading has ``field_low == field_high``.
    """

    parameter: str
    sample_label: str
    field_low: float
    field_high: float
    lab_value: float
    iot_value: float

    def __post_init__(self):
        if self.parameter not in AGREEMENT_PARAMETERS:
            raise ValidationError(f"unknown parameter {self.parameter!r}")
        if self.field_low > self.field_high:
            raise ValidationError(
                f"field interval [{self.field_low}, {self.field_high}] is inverted"
            )

    @property
    def field_is_interval(self) -> bool:
        return self.field_low != self.field_high

    @property
    def spread(self) -> float:
        if self.field_is_interval:
            return abs(self.lab_value - self.iot_value)
        values = (self.field_low, self.lab_value, self.iot_value)
        return max(abs(a - b) for a, b in combinations(values, 2))

    @property
    def within_field(self) -> bool | None:
        """Whether lab and IoT both fall in the field band (``None`` for scalar field readings)."""
        if not self.field_is_interval:
            return None
        return all(self.field_low <= v <= self.field_high for v in (self.lab_value, self.iot_value))


@dataclass(frozen=True)
class AgreementReport:
    rows: tuple[AgreementRow, ...]
    max_spread: dict[str, float]
    all_within_field: dict[str, bool]


def cross_section_area(radius: float) -> float:
    if radius < 0:
        raise DomainError(f"radius must be >= 0, got {radius}")
    return math.pi * radius * radius


def resistivity(resistance_kohm: float, area_m2: float, spacing_m: float) -> float:
    """Resistivity in kΩ·m of a uniform sample, ``R * A / L``."""
    if not area_m2 > 0:
        raise DomainError(f"area must be > 0, got {area_m2}")
    if not spacing_m > 0:
        raise DomainError(f"spacing must be > 0, got {spacing_m}")
    if resistance_kohm < 0:
        raise DomainError(f"resistance must be >= 0, got {resistance_kohm}")
    return resistance_kohm * area_m2 / spacing_m


def bundled_path(name: str):
    """Path to one of the fixtures shipped in ``soilchar/data``."""
    return resources.files("soilchar") / "data" / name


def _open(source: CsvSource):
    if hasattr(source, "read"):
        return source, False
    return open(source, newline="", encoding="utf-8"), True


def _read_rows(source: CsvSource, fields: tuple[str, ...]) -> Iterable[tuple[int, dict]]:
    handle, owned = _open(source)
    try:
        text = handle.read()
    finally:
        if owned:
            handle.close()
    if not text.strip():
        return []
    reader = csv.DictReader(io.StringIO(text))
    header = tuple(h.strip() for h in (reader.fieldnames or ()))
    missing = [f for f in fields if f not in header]
    if missing:
        raise ParseError(f"missing columns {missing}", row=1)
    reader.fieldnames = list(header)
    out = []
    for rec in reader:
        if None in rec:
            raise ParseError(f"expected {len(header)} columns", row=reader.line_num)
        if not any((v or "").strip() for v in rec.values()):
            continue
        out.append((reader.line_num, rec))
    return out


def load_calibration(csv_source: CsvSource) -> list[ResistivitySample]:
    """Read calibration rows; row numbers in errors are 1-based file lines (header is line 1)."""
    samples = []
    for line, rec in _read_rows(csv_source, CALIBRATION_FIELDS):
        try:
            sample = ResistivitySample(
                moisture_pct=float(rec["moisture_pct"]),
                sample_no=int(rec["sample_no"]),
                sand_pct=float(rec["sand_pct"]),
                silt_pct=float(rec["silt_pct"]),
                clay_pct=float(rec["clay_pct"]),
                salinity_pct=float(rec["salinity_pct"]),
                resistance_kohm=float(rec["resistance_kohm"]),
                resistivity_kohm_m=float(rec["resistivity_kohm_m"]),
            )
        except (TypeError, ValueError) as exc:
            raise ParseError(str(exc), row=line) from exc
        samples.append(sample)
    return samples


def load_agreement(csv_source: CsvSource) -> list[AgreementRow]:
    rows = []
    for line, rec in _read_rows(csv_source, AGREEMENT_FIELDS):
        try:
            rows.append(
                AgreementRow(
                    parameter=rec["parameter"].strip(),
                    sample_label=rec["sample_label"].strip(),
                    field_low=float(rec["field_low"]),
                    field_high=float(rec["field_high"]),
                    lab_value=float(rec["lab_value"]),
                    iot_value=float(rec["iot_value"]),
                )
            )
        except (AttributeError, TypeError, ValueError) as exc:
            raise ParseError(str(exc), row=line) from exc
    return rows


def method_agreement(rows: Iterable[AgreementRow]) -> AgreementReport:
    rows = tuple(rows)
    if not rows:
        raise ValidationError("method_agreement needs at least one row")
    max_spread: dict[str, float] = {}
    within: dict[str, bool] = {}
    for row in rows:
        max_spread[row.parameter] = max(max_spread.get(row.parameter, 0.0), row.spread)
        if row.within_field is not None:
            within[row.parameter] = within.get(row.parameter, True) and row.within_field
    return AgreementReport(rows=rows, max_spread=max_spread, all_within_field=within)


READING_FIELDS = ("moisture_pct", "ph", "temperature_c")


def load_readings(csv_source: CsvSource) -> list[SoilReading]:
    """Readings from a CSV with moisture_pct, ph and temperature_c columns.

    Exported telemetry feeds qualify when their slots carry those labels; the
    ``created_at`` (or ``timestamp``) column, if present, becomes the timestamp.
    Rows with an empty cell in any of the three columns are skipped.
    """
    readings = []
    for line, rec in _read_rows(csv_source, READING_FIELDS):
        if any(not (rec[f] or "").strip() for f in READING_FIELDS):
            continue
        stamp = (rec.get("created_at") or rec.get("timestamp") or "").strip()
        try:
            readings.append(
                SoilReading(
                    moisture_pct=float(rec["moisture_pct"]),
                    ph=float(rec["ph"]),
                    temperature_c=float(rec["temperature_c"]),
                    timestamp=datetime.fromisoformat(stamp.replace("Z", "+00:00")) if stamp else None,
                )
            )
        except (TypeError, ValueError) as exc:
            raise ParseError(str(exc), row=line) from exc
    return readings
