"""Event data model, feature schema, and stream readers and writers.

An event stream is a sequence of scored events: a timestamp in epoch
milliseconds, a model score in [0, 1], and a fixed-arity feature vector
described by a :class:`FeatureSchema`. Streams are read from CSV or
JSON-lines files, one event per row, in file order.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass
from typing import Iterable, Iterator, TextIO


class StreamError(Exception):
    """Malformed stream input. Carries the 1-based line number when known."""

    def __init__(self, message: str, line_number: int | None = None):
        self.line_number = line_number
        if line_number is not None:
            message = f"line {line_number}: {message}"
        super().__init__(message)


class ScoreRangeError(StreamError):
    """Row rejected because its score is outside [0, 1]."""


class TimestampOrderError(StreamError):
    """Row rejected because its timestamp decreases."""


class SchemaError(Exception):
    """Invalid feature schema definition."""


class _Missing:
    """Singleton tag for an absent feature value."""

    _instance = None

    def __new__(cls):
        if cls._instance is None:
            cls._instance = super().__new__(cls)
        return cls._instance

    def __repr__(self) -> str:
        return "Missing"


MISSING = _Missing()

# A feature cell is a finite float (numeric), a string (categorical),
# or the MISSING singleton.
FeatureValue = float | str | _Missing

NUMERIC = "numeric"
CATEGORICAL = "categorical"
_KINDS = (NUMERIC, CATEGORICAL)


@dataclass(frozen=True)
class FeatureSpec:
    """Name and kind of one stream feature column."""

    name: str
    kind: str

    def __post_init__(self):
        if self.kind not in _KINDS:
            raise SchemaError(f"unknown feature kind {self.kind!r} for {self.name!r}")


@dataclass(frozen=True)
class FeatureSchema:
    """Ordered feature declarations for a stream, fixed for its whole length."""

    features: tuple[FeatureSpec, ...]

    def __post_init__(self):
        names = [f.name for f in self.features]
        if len(set(names)) != len(names):
            raise SchemaError("feature names must be unique")

    @property
    def names(self) -> tuple[str, ...]:
        return tuple(f.name for f in self.features)

    @property
    def arity(self) -> int:
        return len(self.features)

    def to_json(self) -> str:
        return json.dumps(
            {"features": [{"name": f.name, "kind": f.kind} for f in self.features]},
            indent=2,
        )

    @classmethod
    def from_json(cls, text: str) -> "FeatureSchema":
        try:
            doc = json.loads(text)
            specs = tuple(FeatureSpec(f["name"], f["kind"]) for f in doc["features"])
        except (json.JSONDecodeError, KeyError, TypeError) as exc:
            raise SchemaError(f"invalid schema document: {exc}") from exc
        return cls(specs)


@dataclass(frozen=True)
class Event:
    """One scored event.

    ``features`` follows the schema's column order. ``extras`` holds
    display-only key/value pairs (identifiers, emails) that never enter
    any model; they are carried through to reports verbatim.
    """

    timestamp: int
    score: float
    features: tuple[FeatureValue, ...]
    extras: tuple[tuple[str, str], ...] = ()

    def extras_dict(self) -> dict[str, str]:
        return dict(self.extras)


def normalize_numeric(value: float) -> FeatureValue:
    """Return the value as a float, or MISSING when not finite."""
    value = float(value)
    return value if math.isfinite(value) else MISSING


def _parse_numeric_cell(cell: str, line_number: int, name: str) -> FeatureValue:
    if cell == "":
        return MISSING
    try:
        return normalize_numeric(float(cell))
    except ValueError as exc:
        raise StreamError(f"bad numeric value {cell!r} for {name!r}", line_number) from exc


def _parse_timestamp(raw, line_number: int, previous: int | None) -> int:
    try:
        ts = int(raw)
    except (ValueError, TypeError) as exc:
        raise StreamError(f"bad timestamp {raw!r}", line_number) from exc
    if previous is not None and ts < previous:
        raise TimestampOrderError(f"timestamp {ts} decreases below {previous}", line_number)
    return ts


def _parse_score(raw, line_number: int) -> float:
    try:
        score = float(raw)
    except (ValueError, TypeError) as exc:
        raise StreamError(f"bad score {raw!r}", line_number) from exc
    if not math.isfinite(score) or not 0.0 <= score <= 1.0:
        raise ScoreRangeError(f"score {score} outside [0, 1]", line_number)
    return score


def _feature_from_raw(raw, spec: FeatureSpec, line_number: int) -> FeatureValue:
    if raw is None:
        return MISSING
    if spec.kind == NUMERIC:
        if isinstance(raw, str):
            return _parse_numeric_cell(raw, line_number, spec.name)
        return normalize_numeric(raw)
    cell = str(raw)
    return MISSING if cell == "" else cell


EXTRA_PREFIX = "extra."


def read_csv_stream(source: TextIO, schema: FeatureSchema) -> Iterator[Event]:
    """Yield events from a CSV stream, single pass, in file order.

    The header must be ``timestamp,score`` followed by the schema's
    feature names in order; any trailing ``extra.*`` columns are kept
    as display-only extras.
    """
    reader = csv.reader(source)
    try:
        header = next(reader)
    except StopIteration:
        raise StreamError("empty stream: missing header", 1) from None
    expected = ["timestamp", "score", *schema.names]
    if header[: len(expected)] != expected:
        raise StreamError(
            f"bad header: expected {expected} plus optional extra.* columns, got {header}", 1
        )
    extra_keys = []
    for column in header[len(expected):]:
        if not column.startswith(EXTRA_PREFIX):
            raise StreamError(f"unexpected column {column!r} after features", 1)
        extra_keys.append(column[len(EXTRA_PREFIX):])

    previous_ts = None
    for line_number, row in enumerate(reader, start=2):
        if len(row) != len(header):
            raise StreamError(f"expected {len(header)} cells, got {len(row)}", line_number)
        ts = _parse_timestamp(row[0], line_number, previous_ts)
        previous_ts = ts
        score = _parse_score(row[1], line_number)
        features = tuple(
            _feature_from_raw(row[2 + i], spec, line_number)
            for i, spec in enumerate(schema.features)
        )
        extras = tuple(
            (key, row[2 + schema.arity + j]) for j, key in enumerate(extra_keys)
        )
        yield Event(ts, score, features, extras)


def read_jsonl_stream(source: TextIO, schema: FeatureSchema) -> Iterator[Event]:
    """Yield events from a JSON-lines stream with the same keys as the CSV columns."""
    previous_ts = None
    for line_number, line in enumerate(source, start=1):
        line = line.strip()
        if not line:
            continue
        try:
            doc = json.loads(line)
        except json.JSONDecodeError as exc:
            raise StreamError(f"bad JSON: {exc}", line_number) from exc
        if "timestamp" not in doc or "score" not in doc:
            raise StreamError("missing timestamp or score key", line_number)
        ts = _parse_timestamp(doc["timestamp"], line_number, previous_ts)
        previous_ts = ts
        score = _parse_score(doc["score"], line_number)
        features = tuple(
            _feature_from_raw(doc.get(spec.name), spec, line_number)
            for spec in schema.features
        )
        extras = tuple(
            (key[len(EXTRA_PREFIX):], str(value))
            for key, value in doc.items()
            if key.startswith(EXTRA_PREFIX)
        )
        yield Event(ts, score, features, extras)


def read_stream(source: TextIO, schema: FeatureSchema, format: str = "csv") -> Iterator[Event]:
    if format == "csv":
        return read_csv_stream(source, schema)
    if format == "jsonl":
        return read_jsonl_stream(source, schema)
    raise ValueError(f"unknown stream format {format!r}")


def _cell(value: FeatureValue) -> str:
    if value is MISSING:
        return ""
    if isinstance(value, float):
        return repr(value)
    return str(value)


def write_csv_stream(
    events: Iterable[Event],
    schema: FeatureSchema,
    sink: TextIO,
    extra_keys: tuple[str, ...] = (),
) -> int:
    """Write events as CSV, returning the number of rows written.

    Floats are written with repr so a read-back round-trips exactly.
    """
    writer = csv.writer(sink, lineterminator="\n")
    header = ["timestamp", "score", *schema.names]
    header += [EXTRA_PREFIX + key for key in extra_keys]
    writer.writerow(header)
    count = 0
    for event in events:
        row = [str(event.timestamp), repr(event.score)]
        row += [_cell(v) for v in event.features]
        if extra_keys:
            extras = event.extras_dict()
            row += [extras.get(key, "") for key in extra_keys]
        try:
            writer.writerow(row)
        except csv.Error as exc:
            # The csv module refuses NUL bytes in both directions, so a
            # value containing one cannot exist in this format at all.
            raise StreamError(
                f"event {count} not representable as CSV: {exc}"
            ) from exc
        count += 1
    return count
