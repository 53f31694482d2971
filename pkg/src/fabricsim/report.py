"""Prediction-vs-measurement metrics and deterministic report emission.

Measurements are ingested from CSV, never synthesized. Reports render to
JSON or CSV with rows sorted by config id and floats fixed to 6
significant digits, so identical runs produce identical bytes.
"""

from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass, field

import numpy as np

from .errors import ValidationError, require

MEASUREMENT_COLUMNS = ("config_id", "predicted_s", "measured_s")


@dataclass(frozen=True)
class MeasurementRow:
    config_id: str
    predicted: float
    measured: float


@dataclass(frozen=True)
class MeasurementSet:
    rows: tuple[MeasurementRow, ...]

    def __post_init__(self):
        require(len(self.rows) >= 1, "measurement set must be non-empty")
        seen = set()
        for row in self.rows:
            require(row.config_id not in seen,
                    f"duplicate config_id {row.config_id!r}")
            seen.add(row.config_id)
            require(row.measured > 0,
                    f"{row.config_id}: measured value must be > 0")

    @classmethod
    def from_pairs(cls, pairs) -> "MeasurementSet":
        rows = tuple(MeasurementRow(str(i), float(p), float(m))
                     for i, (p, m) in enumerate(pairs))
        return cls(rows=rows)

    @classmethod
    def from_csv(cls, path: str) -> "MeasurementSet":
        with open(path, newline="") as fh:
            reader = csv.DictReader(fh)
            if reader.fieldnames is None or any(
                    col not in reader.fieldnames for col in MEASUREMENT_COLUMNS):
                raise ValidationError(
                    f"{path}: header must contain {MEASUREMENT_COLUMNS}")
            rows = []
            for record in reader:
                try:
                    rows.append(MeasurementRow(
                        config_id=record["config_id"],
                        predicted=float(record["predicted_s"]),
                        measured=float(record["measured_s"]),
                    ))
                except (TypeError, ValueError) as exc:
                    raise ValidationError(
                        f"{path}: bad measurement row {record!r}") from exc
        return cls(rows=tuple(rows))


def mape(measurements: MeasurementSet) -> float:
    """Mean absolute percentage error, as a fraction."""
    pred = np.array([r.predicted for r in measurements.rows])
    meas = np.array([r.measured for r in measurements.rows])
    return float(np.mean(np.abs(pred - meas) / meas))


def r_squared(measurements: MeasurementSet) -> float:
    """Coefficient of determination with measured values as truth."""
    pred = np.array([r.predicted for r in measurements.rows])
    meas = np.array([r.measured for r in measurements.rows])
    ss_res = float(np.sum((meas - pred) ** 2))
    ss_tot = float(np.sum((meas - np.mean(meas)) ** 2))
    if ss_tot == 0.0:
        raise ValidationError(
            "r_squared undefined: measured values are all identical")
    return 1.0 - ss_res / ss_tot


# ---------------------------------------------------------------------------
# report emission
# ---------------------------------------------------------------------------

FORMATS = ("json", "csv")


@dataclass
class RunReport:
    tool: str
    version: str
    mode: str
    config: dict
    rows: list[dict] = field(default_factory=list)
    metrics: dict = field(default_factory=dict)
    warnings: list[str] = field(default_factory=list)


def _round6(value):
    """Clamp floats to 6 significant digits, recursively."""
    if isinstance(value, bool):
        return value
    if isinstance(value, float):
        return float(f"{value:.6g}")
    if isinstance(value, dict):
        return {k: _round6(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_round6(v) for v in value]
    return value


def _format_cell(value) -> str:
    if isinstance(value, bool):
        return str(value).lower()
    if isinstance(value, float):
        return f"{value:.6g}"
    return str(value)


def sorted_rows(rows: list[dict]) -> list[dict]:
    if rows and "config_id" in rows[0]:
        return sorted(rows, key=lambda r: str(r["config_id"]))
    return list(rows)


def emit(report: RunReport, fmt: str = "json") -> bytes:
    """Serialize the report; byte-identical for identical inputs."""
    require(fmt in FORMATS, f"format must be one of {FORMATS}")
    rows = sorted_rows(report.rows)
    if fmt == "json":
        document = {
            "tool": report.tool,
            "version": report.version,
            "mode": report.mode,
            "config": _round6(report.config),
            "rows": _round6(rows),
            "metrics": _round6(report.metrics),
            "warnings": list(report.warnings),
        }
        text = json.dumps(document, sort_keys=True, indent=2)
        return (text + "\n").encode()

    buf = io.StringIO()
    if rows:
        columns = list(rows[0].keys())
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(columns)
        for row in rows:
            writer.writerow([_format_cell(row.get(col, "")) for col in columns])
    if report.metrics:
        writer = csv.writer(buf, lineterminator="\n")
        for key in sorted(report.metrics):
            writer.writerow([key, _format_cell(_round6(report.metrics[key]))])
    return buf.getvalue().encode()
