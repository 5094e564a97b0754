"""Quarterly panel container, CSV ingestion and emission."""

from __future__ import annotations

import csv
import io
import re
from dataclasses import dataclass, field

import numpy as np

from .errors import GapError, ParseError

_PERIOD_RE = re.compile(r"^(\d{4})Q([1-4])$")

TRANSFORMS = ("none", "pct-change", "log")


def parse_period(text: str) -> tuple[int, int]:
    m = _PERIOD_RE.match(text.strip())
    if not m:
        raise ParseError(f"bad quarterly period {text!r}, expected YYYYQn")
    return int(m.group(1)), int(m.group(2))


def period_index(text: str) -> int:
    year, quarter = parse_period(text)
    return 4 * year + (quarter - 1)


def period_string(index: int) -> str:
    return f"{index // 4}Q{index % 4 + 1}"


def period_range(start: str, count: int) -> list[str]:
    first = period_index(start)
    return [period_string(first + i) for i in range(count)]


@dataclass(frozen=True)
class TimeSeriesPanel:
    """Observed quarterly data with its lag/pre-sample bookkeeping.

    ``values`` holds the (already transformed) series; the first
    ``pre_sample`` rows are reserved for prior calibration and the rest is
    the estimation sample (whose first ``p`` rows only provide lags).
    """

    dates: tuple[str, ...]
    values: np.ndarray
    names: tuple[str, ...]
    transforms: tuple[str, ...] = ()
    nonstationary: tuple[bool, ...] = ()
    pre_sample: int = 0

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        object.__setattr__(self, "values", values)
        t, n = values.shape
        if len(self.dates) != t:
            raise ValueError("dates and values disagree on length")
        if len(self.names) != n:
            raise ValueError("names and values disagree on width")
        if not self.transforms:
            object.__setattr__(self, "transforms", tuple("none" for _ in range(n)))
        if not self.nonstationary:
            object.__setattr__(self, "nonstationary", tuple(False for _ in range(n)))
        if np.isnan(values).any():
            raise ParseError("panel contains missing values after transformation")
        idx = [period_index(d) for d in self.dates]
        for i in range(1, len(idx)):
            if idx[i] != idx[i - 1] + 1:
                raise GapError(f"dates not contiguous at {self.dates[i - 1]} -> {self.dates[i]}")
        if not 0 <= self.pre_sample <= t:
            raise ValueError("pre-sample length outside the panel")

    @property
    def nvars(self) -> int:
        return self.values.shape[1]

    @property
    def nrows(self) -> int:
        return self.values.shape[0]

    def presample_values(self) -> np.ndarray:
        return self.values[: self.pre_sample]

    def estimation_values(self) -> np.ndarray:
        return self.values[self.pre_sample :]

    def estimation_dates(self, p: int) -> tuple[str, ...]:
        """Dates of the effective sample once p rows are consumed as lags."""
        return self.dates[self.pre_sample + p :]

    def through(self, date: str) -> "TimeSeriesPanel":
        """Panel truncated to rows up to and including ``date``."""
        if date not in self.dates:
            raise ValueError(f"{date} not in panel")
        stop = self.dates.index(date) + 1
        return TimeSeriesPanel(
            dates=self.dates[:stop],
            values=self.values[:stop].copy(),
            names=self.names,
            transforms=self.transforms,
            nonstationary=self.nonstationary,
            pre_sample=self.pre_sample,
        )


def apply_transform(raw: np.ndarray, transform: str) -> np.ndarray:
    """Column transform; pct-change shortens the series by one row (nan marker)."""
    if transform == "none":
        return raw.copy()
    if transform == "log":
        if np.any(raw <= 0.0):
            raise ParseError("log transform requires strictly positive levels")
        return np.log(raw)
    if transform == "pct-change":
        out = np.full_like(raw, np.nan)
        out[1:] = 100.0 * (raw[1:] - raw[:-1]) / raw[:-1]
        return out
    raise ParseError(f"unknown transform {transform!r}")


def ingest(
    path_or_buffer,
    transforms: dict[str, str] | None = None,
    nonstationary: dict[str, bool] | None = None,
    pre_sample: int = 0,
) -> TimeSeriesPanel:
    """Read a CSV with a date column plus numeric columns into a panel.

    Transforms are applied per column; rows made undefined by differencing
    are dropped from the front of every series so the panel stays
    rectangular.
    """
    if hasattr(path_or_buffer, "read"):
        text = path_or_buffer.read()
    else:
        with open(path_or_buffer, "r", encoding="utf-8") as fh:
            text = fh.read()
    reader = csv.reader(io.StringIO(text))
    rows = [row for row in reader if row]
    if not rows:
        raise ParseError("empty CSV")
    header = [h.strip() for h in rows[0]]
    if len(header) < 2:
        raise ParseError("need a date column plus at least one series")
    names = header[1:]
    dates: list[str] = []
    raw = np.empty((len(rows) - 1, len(names)))
    for i, row in enumerate(rows[1:], start=2):
        if len(row) != len(header):
            raise ParseError("wrong number of fields", row=i)
        dates.append(row[0].strip())
        for j, cell in enumerate(row[1:]):
            try:
                raw[i - 2, j] = float(cell)
            except ValueError:
                raise ParseError(f"not a number: {cell!r}", row=i, column=names[j]) from None
    transforms = transforms or {}
    nonstationary = nonstationary or {}
    tags = tuple(transforms.get(name, "none") for name in names)
    for tag in tags:
        if tag not in TRANSFORMS:
            raise ParseError(f"unknown transform {tag!r}")
    cols = [apply_transform(raw[:, j], tags[j]) for j in range(len(names))]
    values = np.column_stack(cols)
    drop = int(np.any(np.isnan(values), axis=1).sum())
    if drop and not np.all(np.any(np.isnan(values[:drop]), axis=1)):
        raise ParseError("missing values not confined to the differencing window")
    values = values[drop:]
    dates = dates[drop:]
    flags = tuple(bool(nonstationary.get(name, False)) for name in names)
    return TimeSeriesPanel(
        dates=tuple(dates),
        values=values,
        names=tuple(names),
        transforms=tags,
        nonstationary=flags,
        pre_sample=pre_sample,
    )


def emit(panel: TimeSeriesPanel, path_or_buffer) -> None:
    """Write a panel back to CSV with round-trip-exact floats."""

    def _write(fh):
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(("date",) + panel.names)
        for i, date in enumerate(panel.dates):
            writer.writerow([date] + [repr(float(v)) for v in panel.values[i]])

    if hasattr(path_or_buffer, "write"):
        _write(path_or_buffer)
    else:
        with open(path_or_buffer, "w", encoding="utf-8") as fh:
            _write(fh)
