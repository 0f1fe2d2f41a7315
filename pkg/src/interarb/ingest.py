"""Loading, cleaning and aligning hourly market series.

Series files are CSV with header ``timestamp,value`` (``#`` lines are comments); timestamps are ISO-8601
and interpreted in UTC, an empty value cell marks a missing hour. Days are
UTC calendar days.
"""
from __future__ import annotations

import json
import warnings
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np
import pandas as pd

from .errors import OrderingError, ParameterError, ParseError, SchemaError, UnitError

UNITS = ("EUR/MWh", "GBP/MWh", "MW", "MWh")
PRICE_UNITS = ("EUR/MWh", "GBP/MWh")
GBP_TO_EUR = 1.16

OBSERVED, INTERPOLATED, CLAMPED = "observed", "interpolated", "clamped"
_HOUR = np.timedelta64(1, "h")


class BoundaryInterpolationWarning(UserWarning):
    """A lone missing hour sits at the series edge; its day is dropped."""


@dataclass(frozen=True)
class RawSeries:
    name: str
    timestamps: np.ndarray  # datetime64[h], UTC
    values: np.ndarray  # float, NaN marks a missing hour
    unit: str

    def __len__(self):
        return self.values.shape[0]

    @property
    def missing(self) -> np.ndarray:
        return np.isnan(self.values)


@dataclass
class CleaningReport:
    dropped_days: list = field(default_factory=list)
    interpolated_hours: int = 0
    clamped_hours: int = 0
    boundary_days: list = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "dropped_days": len(self.dropped_days),
            "dropped_day_list": [str(d) for d in self.dropped_days],
            "interpolated_hours": self.interpolated_hours,
            "clamped_hours": self.clamped_hours,
            "boundary_days": [str(d) for d in self.boundary_days],
        }


@dataclass(frozen=True)
class CleanSeries:
    name: str
    timestamps: np.ndarray
    values: np.ndarray
    flags: np.ndarray
    unit: str
    report: CleaningReport = field(default_factory=CleaningReport, compare=False)

    def __len__(self):
        return self.values.shape[0]

    @property
    def day_index(self) -> list:
        return sorted(set(self.timestamps.astype("datetime64[D]").tolist()))

    def restrict_days(self, days) -> "CleanSeries":
        days = np.array(sorted(days), dtype="datetime64[D]")
        keep = np.isin(self.timestamps.astype("datetime64[D]"), days)
        return replace(self, timestamps=self.timestamps[keep], values=self.values[keep], flags=self.flags[keep])

    def to_csv(self, path):
        frame = pd.DataFrame({
            "timestamp": [_iso(t) for t in self.timestamps],
            "value": self.values,
            "flag": self.flags,
        })
        frame.to_csv(path, index=False, float_format="%.10g")


def _iso(t) -> str:
    return str(np.datetime64(t, "s")) + "Z"


def load_series(path, unit: str, name: str | None = None) -> RawSeries:
    """Read a ``timestamp,value`` CSV into a :class:`RawSeries`.

    Gaps in the hourly timestamp grid are filled with missing markers.
    """
    if unit not in UNITS:
        raise SchemaError(f"unknown unit {unit!r}; expected one of {UNITS}")
    path = Path(path)
    frame = pd.read_csv(path, dtype={"timestamp": str}, keep_default_na=False, na_values=[""],
                        comment="#")
    if list(frame.columns[:2]) != ["timestamp", "value"]:
        raise SchemaError(f"{path}: expected header 'timestamp,value', got {list(frame.columns)}")
    try:
        stamps = pd.to_datetime(frame["timestamp"], utc=True, format="ISO8601")
    except (ValueError, TypeError) as exc:
        raise ParseError(f"{path}: malformed timestamp ({exc})") from exc
    try:
        values = pd.to_numeric(frame["value"], errors="raise").to_numpy(dtype=float)
    except (ValueError, TypeError) as exc:
        raise ParseError(f"{path}: non-numeric value ({exc})") from exc
    if np.any(np.isinf(values)):
        raise ParseError(f"{path}: infinite value")
    ts = stamps.dt.tz_localize(None).to_numpy().astype("datetime64[s]")
    if len(ts) and np.any(ts != ts.astype("datetime64[h]")):
        raise SchemaError(f"{path}: timestamps must fall on whole hours")
    ts = ts.astype("datetime64[h]")
    steps = np.diff(ts)
    if np.any(steps <= np.timedelta64(0, "h")):
        bad = int(np.flatnonzero(steps <= np.timedelta64(0, "h"))[0]) + 1
        raise OrderingError(f"{path}: timestamp at row {bad} is not after its predecessor")
    if len(ts) and np.any(steps != _HOUR):
        grid = np.arange(ts[0], ts[-1] + _HOUR, _HOUR)
        full = np.full(grid.shape, np.nan)
        full[((ts - ts[0]) // _HOUR).astype(int)] = values
        ts, values = grid, full
    return RawSeries(name or path.stem, ts, values, unit)


def clean_series(raw) -> CleanSeries:
    """Drop days touched by runs of >= 2 missing hours and interpolate lone gaps.

    A lone missing hour becomes the mean of its two neighbours. Runs are
    measured on the hourly timeline, so a run crossing midnight drops both
    days. Incomplete calendar days are dropped as well. Accepts a
    :class:`CleanSeries` too, which passes through unchanged.
    """
    ts = np.asarray(raw.timestamps).astype("datetime64[h]")
    values = np.array(raw.values, dtype=float)
    flags = np.array(raw.flags, dtype=object) if isinstance(raw, CleanSeries) else np.full(values.shape, OBSERVED, dtype=object)
    report = CleaningReport()
    if isinstance(raw, CleanSeries):
        report.clamped_hours = raw.report.clamped_hours
        report.dropped_days = list(raw.report.dropped_days)
    days = ts.astype("datetime64[D]")
    miss = np.isnan(values)
    drop_days = set()

    # hourly adjacency; False across gaps between retained days
    adjacent = np.diff(ts) == _HOUR
    i, n = 0, len(values)
    while i < n:
        if not miss[i]:
            i += 1
            continue
        j = i
        while j + 1 < n and miss[j + 1] and adjacent[j]:
            j += 1
        if j > i:
            drop_days.update(days[i:j + 1].tolist())
        else:
            has_prev = i > 0 and adjacent[i - 1] and not miss[i - 1]
            has_next = i + 1 < n and adjacent[i] and not miss[i + 1]
            if has_prev and has_next:
                values[i] = 0.5 * (values[i - 1] + values[i + 1])
                flags[i] = INTERPOLATED
            else:
                day = days[i].tolist()
                drop_days.add(day)
                report.boundary_days.append(day)
                warnings.warn(f"{raw.name}: missing hour {ts[i]} has no neighbour on one side; "
                              f"dropping {day}", BoundaryInterpolationWarning, stacklevel=2)
        i = j + 1

    uniq, counts = np.unique(days, return_counts=True)
    drop_days.update(d.tolist() for d, c in zip(uniq, counts) if c != 24)
    keep = ~np.isin(days, np.array(sorted(drop_days), dtype="datetime64[D]"))
    report.interpolated_hours = int(np.sum(flags[keep] == INTERPOLATED))
    report.dropped_days = sorted(set(report.dropped_days) | drop_days)
    return CleanSeries(raw.name, ts[keep], values[keep], flags[keep], raw.unit, report)


def clamp_negative_prices(series: CleanSeries) -> CleanSeries:
    """Saturate negative prices at zero; the count is added to the report."""
    if series.unit not in PRICE_UNITS:
        raise UnitError(f"cannot clamp non-price unit {series.unit!r}")
    neg = series.values < 0
    values = np.where(neg, 0.0, series.values)
    flags = np.where(neg, CLAMPED, series.flags).astype(object)
    report = replace(series.report, clamped_hours=series.report.clamped_hours + int(neg.sum()))
    return replace(series, values=values, flags=flags, report=report)


def convert_currency(series, factor: float = GBP_TO_EUR):
    """Convert a GBP/MWh series to EUR/MWh by a fixed rate."""
    if factor <= 0:
        raise ParameterError("conversion factor must be positive")
    if series.unit != "GBP/MWh":
        raise UnitError(f"expected GBP/MWh, got {series.unit!r}")
    return replace(series, values=np.asarray(series.values, dtype=float) * factor, unit="EUR/MWh")


def common_days(*series: CleanSeries) -> list:
    days = set(series[0].day_index)
    for s in series[1:]:
        days &= set(s.day_index)
    return sorted(days)


def align_series(*series: CleanSeries) -> list:
    """Restrict every series to the calendar days retained in all of them."""
    days = common_days(*series)
    return [s.restrict_days(days) for s in series]


def prepare(path, unit: str, name: str | None = None, factor: float = GBP_TO_EUR) -> CleanSeries:
    """Load, clean, convert currency (GBP only) and clamp prices, in that order."""
    s = clean_series(load_series(path, unit, name))
    if s.unit == "GBP/MWh":
        s = convert_currency(s, factor)
    if s.unit in PRICE_UNITS:
        s = clamp_negative_prices(s)
    return s


def write_report(series, path):
    """Cleaning report JSON keyed by series name."""
    payload = {s.name: {"unit": s.unit, "retained_days": len(s.day_index), **s.report.to_dict()} for s in series}
    Path(path).write_text(json.dumps(payload, indent=2, sort_keys=True))


def write_series_csv(path, timestamps, values):
    frame = pd.DataFrame({"timestamp": [_iso(t) for t in timestamps], "value": values})
    frame.to_csv(path, index=False, float_format="%.10g")
