"""External event series and lagged correlation against discourse signals.

Event files are CSV with a ``date,count`` header, ISO dates, and
non-negative counts; duplicate or unparsable rows are hard errors. The lag
scan correlates pairs (signal[t], events[t - L]) for each integer lag L in
[-max_lag, max_lag] after an inner join on dates, so NEGATIVE lags mean the
signal leads the events. Pearson uses the sample formula; Spearman is
Pearson applied to average ranks (ties share the mean of their positions).
"""

from __future__ import annotations

import csv
import logging
import math
from dataclasses import dataclass
from datetime import date, timedelta
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from narrametrics.errors import DataError
from narrametrics.series import DailySeries

logger = logging.getLogger(__name__)


@dataclass
class EventSeries:
    """Daily event counts loaded from CSV; ``label`` defaults to the stem."""

    series: DailySeries
    label: str
    source_path: str


def load_event_series(path: str | Path, label: Optional[str] = None) -> EventSeries:
    path = Path(path)
    with path.open("r", encoding="utf-8", newline="") as handle:
        reader = csv.reader(handle)
        try:
            header = next(reader)
        except StopIteration:
            raise DataError(f"{path}: empty event file") from None
        columns = [c.strip().lower() for c in header]
        if "date" not in columns or "count" not in columns:
            raise DataError(f"{path}: header must contain 'date' and 'count' columns, got {header}")
        date_col = columns.index("date")
        count_col = columns.index("count")
        series = DailySeries()
        # header is row 1, matching what a spreadsheet shows
        for row_num, row in enumerate(reader, start=2):
            if not row or not any(cell.strip() for cell in row):
                continue
            try:
                d = date.fromisoformat(row[date_col].strip())
            except (ValueError, IndexError) as exc:
                raise DataError(f"{path} row {row_num}: unparsable date {row[date_col:date_col+1]!r}") from exc
            try:
                count = float(row[count_col].strip())
            except (ValueError, IndexError) as exc:
                raise DataError(f"{path} row {row_num}: unparsable count") from exc
            if count < 0:
                raise DataError(f"{path} row {row_num}: negative count {count} on {d.isoformat()}")
            if d in series.values:
                raise DataError(f"{path}: duplicate date {d.isoformat()}")
            series.values[d] = count
            series.counts[d] = 1
    if not series.values:
        raise DataError(f"{path}: no data rows")
    return EventSeries(series=series, label=label or path.stem, source_path=str(path))


def minmax_normalize(series: DailySeries) -> DailySeries:
    """Affine map of values onto [0, 1]; rank order is preserved.

    A constant series has no spread to normalize, so it maps to all zeros
    and a warning is logged.
    """
    if not series.values:
        raise DataError("cannot normalize an empty series")
    values = list(series.values.values())
    lo, hi = min(values), max(values)
    out = DailySeries(counts=dict(series.counts))
    if hi == lo:
        logger.warning("minmax_normalize: constant series, returning all zeros")
        out.values = {d: 0.0 for d in series.values}
        return out
    span = hi - lo
    out.values = {d: (v - lo) / span for d, v in series.values.items()}
    return out


def zero_fill(series: DailySeries) -> DailySeries:
    """Fill calendar gaps inside the observed span with zeros (count 0)."""
    if not series.values:
        return DailySeries()
    first, last = series.span()
    out = DailySeries()
    d = first
    while d <= last:
        out.values[d] = series.values.get(d, 0.0)
        out.counts[d] = series.counts.get(d, 0)
        d += timedelta(days=1)
    return out


def pearson(x: Sequence[float], y: Sequence[float]) -> float:
    """Sample Pearson correlation; requires length >= 3 and nonzero spread."""
    if len(x) != len(y):
        raise ValueError(f"length mismatch: {len(x)} vs {len(y)}")
    if len(x) < 3:
        raise ValueError(f"need at least 3 pairs, got {len(x)}")
    ax = np.asarray(x, dtype=np.float64)
    ay = np.asarray(y, dtype=np.float64)
    dx = ax - ax.mean()
    dy = ay - ay.mean()
    sx = float((dx * dx).sum())
    sy = float((dy * dy).sum())
    if sx == 0.0 or sy == 0.0:
        raise DataError("correlation undefined: zero variance input")
    return float((dx * dy).sum() / math.sqrt(sx * sy))


def average_ranks(values: Sequence[float]) -> np.ndarray:
    """1-based ranks with ties assigned the mean of their positions."""
    v = np.asarray(values, dtype=np.float64)
    order = np.argsort(v, kind="stable")
    ranks = np.empty(len(v), dtype=np.float64)
    i = 0
    n = len(v)
    while i < n:
        j = i
        while j + 1 < n and v[order[j + 1]] == v[order[i]]:
            j += 1
        ranks[order[i : j + 1]] = (i + j) / 2.0 + 1.0
        i = j + 1
    return ranks


def spearman(x: Sequence[float], y: Sequence[float]) -> float:
    """Spearman rho: Pearson correlation of average ranks."""
    if len(x) != len(y):
        raise ValueError(f"length mismatch: {len(x)} vs {len(y)}")
    if len(x) < 3:
        raise ValueError(f"need at least 3 pairs, got {len(x)}")
    return pearson(average_ranks(x), average_ranks(y))


@dataclass
class LagScanResult:
    """Correlations per computed lag.

    Lags with fewer than ``min_overlap`` aligned pairs, or where either
    aligned slice is constant, are omitted from all maps.
    """

    lags: list[int]
    pearson: dict[int, float]
    spearman: dict[int, float]
    n_overlap: dict[int, int]
    best_lag_pearson: int
    best_lag_spearman: int


def lag_scan(
    signal: DailySeries,
    events: DailySeries,
    max_lag: int = 14,
    min_overlap: int = 3,
) -> LagScanResult:
    """Scan integer lags in [-max_lag, max_lag].

    r(L) correlates (signal[t], events[t - L]); a negative best lag says the
    signal moves before the events do. Best lags maximize |r| and |rho|
    respectively, ties resolving toward the smaller lag value.
    """
    if max_lag < 0:
        raise ValueError(f"max_lag must be >= 0, got {max_lag}")
    if min_overlap < 3:
        raise ValueError(f"min_overlap must be >= 3, got {min_overlap}")
    pearson_by_lag: dict[int, float] = {}
    spearman_by_lag: dict[int, float] = {}
    overlap: dict[int, int] = {}
    for lag in range(-max_lag, max_lag + 1):
        shift = timedelta(days=lag)
        xs: list[float] = []
        ys: list[float] = []
        for t in signal.days():
            t_event = t - shift
            if t_event in events.values:
                xs.append(signal.values[t])
                ys.append(events.values[t_event])
        if len(xs) < min_overlap:
            continue
        try:
            r = pearson(xs, ys)
            rho = spearman(xs, ys)
        except DataError:
            # constant slice at this alignment, correlation undefined
            continue
        pearson_by_lag[lag] = r
        spearman_by_lag[lag] = rho
        overlap[lag] = len(xs)
    if not pearson_by_lag:
        raise DataError(
            f"no lag in [-{max_lag}, {max_lag}] had {min_overlap}+ overlapping days with usable spread"
        )
    best_r = min(pearson_by_lag, key=lambda L: (-abs(pearson_by_lag[L]), L))
    best_rho = min(spearman_by_lag, key=lambda L: (-abs(spearman_by_lag[L]), L))
    return LagScanResult(
        lags=sorted(pearson_by_lag),
        pearson=pearson_by_lag,
        spearman=spearman_by_lag,
        n_overlap=overlap,
        best_lag_pearson=best_r,
        best_lag_spearman=best_rho,
    )


def write_lag_csv(result: LagScanResult, path) -> None:
    with open(path, "w", encoding="utf-8", newline="") as handle:
        writer = csv.writer(handle, lineterminator="\n")
        writer.writerow(["lag", "pearson", "spearman", "n"])
        for lag in result.lags:
            writer.writerow(
                [lag, repr(result.pearson[lag]), repr(result.spearman[lag]), result.n_overlap[lag]]
            )


def write_timeline_csv(signal: DailySeries, events: DailySeries, path) -> None:
    """Min-max normalized view of both series over the union of their days;
    blank cells mark days one side does not cover."""
    signal_norm = minmax_normalize(signal)
    events_norm = minmax_normalize(events)
    days = sorted(set(signal_norm.values) | set(events_norm.values))
    with open(path, "w", encoding="utf-8", newline="") as handle:
        writer = csv.writer(handle, lineterminator="\n")
        writer.writerow(["date", "events_norm", "signal_norm"])
        for d in days:
            ev = repr(events_norm.values[d]) if d in events_norm.values else ""
            sig = repr(signal_norm.values[d]) if d in signal_norm.values else ""
            writer.writerow([d.isoformat(), ev, sig])


def write_scatter_csv(signal: DailySeries, events: DailySeries, path) -> None:
    """Same-day (events, signal) pairs for scatter plotting."""
    days = sorted(set(signal.values) & set(events.values))
    with open(path, "w", encoding="utf-8", newline="") as handle:
        writer = csv.writer(handle, lineterminator="\n")
        writer.writerow(["date", "events", "signal"])
        for d in days:
            writer.writerow([d.isoformat(), repr(events.values[d]), repr(signal.values[d])])
