"""Event parsing, weekly bucketing and activity rescaling."""

from __future__ import annotations

import csv
import io
import json
import logging
import math
from dataclasses import dataclass, field
from datetime import datetime, timezone
from typing import Iterable, NamedTuple

import numpy as np

from .errors import (
    CoverageError,
    DegenerateInputError,
    EmptySeriesError,
    InputError,
    ParseError,
)

logger = logging.getLogger(__name__)

SECONDS_PER_DAY = 86400.0
SECONDS_PER_WEEK = 7 * SECONDS_PER_DAY
MAX_MALFORMED_FRACTION = 0.10

TIMESTAMP_KEYS = ("timestamp",)
MAGNITUDE_KEYS = ("shares", "magnitude")


class EventRecord(NamedTuple):
    timestamp: float  # epoch seconds, UTC
    magnitude: float


class RowError(NamedTuple):
    line: int
    message: str


def _readonly(values) -> np.ndarray:
    arr = np.array(values, dtype=float)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class EventSeries:
    """Time-ordered magnitudes. Arrays are read-only once constructed."""

    timestamps: np.ndarray
    magnitudes: np.ndarray
    row_errors: tuple = field(default=(), repr=False)

    def __post_init__(self):
        ts = _readonly(self.timestamps)
        mag = _readonly(self.magnitudes)
        if ts.shape != mag.shape or ts.ndim != 1:
            raise InputError("timestamps and magnitudes must be 1-d and equally long")
        if ts.size == 0:
            raise EmptySeriesError("event series is empty")
        if not np.all(np.isfinite(ts)):
            raise InputError("timestamps must be finite")
        if not np.all(np.isfinite(mag)) or np.any(mag < 0):
            raise InputError("magnitudes must be finite and >= 0")
        if np.any(np.diff(ts) < 0):
            order = np.argsort(ts, kind="stable")
            ts, mag = _readonly(ts[order]), _readonly(mag[order])
        object.__setattr__(self, "timestamps", ts)
        object.__setattr__(self, "magnitudes", mag)
        object.__setattr__(self, "row_errors", tuple(self.row_errors))

    @classmethod
    def from_records(cls, records: Iterable[EventRecord], row_errors=()):
        records = list(records)
        return cls(
            np.array([r[0] for r in records], dtype=float),
            np.array([r[1] for r in records], dtype=float),
            row_errors,
        )

    @property
    def origin(self) -> float:
        return float(self.timestamps[0])

    @property
    def records(self) -> list[EventRecord]:
        return [EventRecord(float(t), float(m)) for t, m in zip(self.timestamps, self.magnitudes)]

    def __len__(self):
        return self.timestamps.size

    def __eq__(self, other):
        if not isinstance(other, EventSeries):
            return NotImplemented
        return np.array_equal(self.timestamps, other.timestamps) and np.array_equal(
            self.magnitudes, other.magnitudes
        )

    def week_indices(self) -> np.ndarray:
        """1-based index of the fixed 7-day window each event falls in."""
        return np.floor((self.timestamps - self.origin) / SECONDS_PER_WEEK).astype(np.int64) + 1

    def with_magnitudes(self, magnitudes) -> "EventSeries":
        return EventSeries(self.timestamps, magnitudes, self.row_errors)


# -- parsing -----------------------------------------------------------------


def parse_timestamp(text: str) -> float:
    """Epoch seconds (int or float) or ISO-8601; naive ISO times are read as UTC."""
    s = str(text).strip()
    if not s:
        raise ValueError("empty timestamp")
    try:
        value = float(s)
    except ValueError:
        if s.endswith(("Z", "z")):
            s = s[:-1] + "+00:00"
        try:
            dt = datetime.fromisoformat(s)
        except ValueError:
            raise ValueError(f"unparseable timestamp {text!r}") from None
        if dt.tzinfo is None:
            dt = dt.replace(tzinfo=timezone.utc)
        return dt.timestamp()
    if not math.isfinite(value):
        raise ValueError(f"non-finite timestamp {text!r}")
    return value


def parse_magnitude(text) -> float:
    try:
        value = float(str(text).strip())
    except ValueError:
        raise ValueError(f"unparseable magnitude {text!r}") from None
    if not math.isfinite(value):
        raise ValueError(f"non-finite magnitude {text!r}")
    if value < 0:
        raise ValueError(f"negative magnitude {text!r}")
    return value


def _pick(mapping, keys, what):
    for k in keys:
        if k in mapping:
            return mapping[k]
    raise ValueError(f"missing {what} field")


def _csv_rows(text):
    reader = csv.reader(io.StringIO(text))
    header = None
    for line_no, row in enumerate(reader, start=1):
        if not row or all(not c.strip() for c in row):
            continue
        if header is None and line_no == 1:
            names = [c.strip().lower() for c in row]
            if any(k in names for k in TIMESTAMP_KEYS):
                header = names
                continue
        if header is not None:
            yield line_no, dict(zip(header, row))
        else:
            if len(row) < 2:
                yield line_no, ValueError("expected two columns: timestamp, shares")
                continue
            yield line_no, {"timestamp": row[0], "shares": row[1]}


def _jsonl_rows(text):
    for line_no, line in enumerate(text.splitlines(), start=1):
        if not line.strip():
            continue
        try:
            obj = json.loads(line)
        except json.JSONDecodeError as exc:
            yield line_no, ValueError(f"invalid JSON: {exc.msg}")
            continue
        if not isinstance(obj, dict):
            yield line_no, ValueError("expected a JSON object")
            continue
        yield line_no, obj


def parse_events(source, format: str = "csv") -> EventSeries:
    """Parse a CSV or JSONL event stream into a sorted :class:`EventSeries`.

    ``source`` is bytes, text, or a binary/text file object. Rows that fail
    to parse are collected in ``EventSeries.row_errors`` (with their line
    number) and logged; more than 10% bad rows is a hard failure.
    """
    if hasattr(source, "read"):
        source = source.read()
    if isinstance(source, bytes):
        try:
            source = source.decode("utf-8-sig")
        except UnicodeDecodeError as exc:
            raise ParseError(f"input is not valid UTF-8: {exc}") from None
    fmt = format.lower()
    if fmt == "csv":
        rows = _csv_rows(source)
    elif fmt == "jsonl":
        rows = _jsonl_rows(source)
    else:
        raise InputError(f"unknown format {format!r}; expected csv or jsonl")

    records, errors = [], []
    for line_no, row in rows:
        if isinstance(row, Exception):
            errors.append(RowError(line_no, str(row)))
            continue
        try:
            ts = parse_timestamp(_pick(row, TIMESTAMP_KEYS, "timestamp"))
            mag = parse_magnitude(_pick(row, MAGNITUDE_KEYS, "shares"))
        except ValueError as exc:
            errors.append(RowError(line_no, str(exc)))
            continue
        records.append(EventRecord(ts, mag))

    total = len(records) + len(errors)
    if total == 0:
        raise EmptySeriesError("input contains no event rows")
    for err in errors:
        logger.warning("line %d: %s", err.line, err.message)
    if len(errors) > MAX_MALFORMED_FRACTION * total or not records:
        first = "; ".join(f"line {e.line}: {e.message}" for e in errors[:5])
        raise ParseError(f"{len(errors)} of {total} rows malformed ({first})", errors)
    return EventSeries.from_records(records, errors)


def serialize_events(series: EventSeries) -> str:
    """CSV ``timestamp,magnitude`` at 17 significant digits (lossless)."""
    lines = ["timestamp,magnitude"]
    for t, m in zip(series.timestamps, series.magnitudes):
        lines.append(f"{t:.17g},{m:.17g}")
    return "\n".join(lines) + "\n"


# -- weekly activity -----------------------------------------------------------


class WeeklyActivity(NamedTuple):
    week_index: int
    count: int


@dataclass(frozen=True)
class RescalePlan:
    """Per-week rescaling factors; ``factors[i-1]`` belongs to week ``i``."""

    factors: tuple
    mode: str

    def __post_init__(self):
        object.__setattr__(self, "factors", tuple(float(f) for f in self.factors))
        if any(not (f > 0 and math.isfinite(f)) for f in self.factors):
            raise InputError("rescale factors must be finite and > 0")

    def __len__(self):
        return len(self.factors)


def bucket_weekly(series: EventSeries) -> list[WeeklyActivity]:
    """Count events per 7-day window anchored at the first event.

    Week ``i`` is ``[origin + (i-1) week, origin + i week)``; empty interior
    weeks are kept with count 0.
    """
    counts = np.bincount(series.week_indices() - 1)
    return [WeeklyActivity(i + 1, int(c)) for i, c in enumerate(counts)]


def cumulative_weekly(weeks: list[WeeklyActivity]) -> list[tuple[int, int]]:
    total, out = 0, []
    for w in weeks:
        total += w.count
        out.append((w.week_index, total))
    return out


RESCALE_MODES = ("max", "mean", "median")


def rescale_factors(weeks: list[WeeklyActivity], mode: str = "max") -> RescalePlan:
    """Activity factors ``R_i = w_i / ref(w)`` with ``ref`` the max, mean or median.

    Weeks without posts get the smallest nonzero factor; no event falls in
    them, so the value never touches a magnitude.
    """
    if mode not in RESCALE_MODES:
        raise InputError(f"unknown rescale mode {mode!r}")
    w = np.array([wk.count for wk in weeks], dtype=float)
    if w.size == 0 or not np.any(w > 0):
        raise DegenerateInputError("all weeks have zero activity")
    ref = {"max": np.max, "mean": np.mean, "median": np.median}[mode](w)
    if ref <= 0:
        raise DegenerateInputError(f"{mode} weekly activity is zero")
    factors = w / ref
    if mode == "max":
        factors[np.argmax(w)] = 1.0
    nonzero = factors > 0
    factors[~nonzero] = factors[nonzero].min()
    return RescalePlan(tuple(factors), mode)


def apply_rescale(series: EventSeries, plan: RescalePlan) -> EventSeries:
    """Divide each magnitude by its week's factor; quiet weeks are inflated."""
    idx = series.week_indices()
    if idx.max() > len(plan):
        raise CoverageError(
            f"plan covers {len(plan)} weeks but the series spans {int(idx.max())}"
        )
    factors = np.asarray(plan.factors)[idx - 1]
    return series.with_magnitudes(series.magnitudes / factors)


def block_maxima(series: EventSeries, block_days: float) -> list[float]:
    """Maximum magnitude in each nonempty block of ``block_days`` days from the origin."""
    if not (block_days > 0 and math.isfinite(block_days)):
        raise InputError("block_days must be > 0")
    block = np.floor((series.timestamps - series.origin) / (block_days * SECONDS_PER_DAY))
    block = block.astype(np.int64)
    out = np.full(block.max() + 1, -np.inf)
    np.maximum.at(out, block, series.magnitudes)
    return [float(v) for v in out if v != -np.inf]
