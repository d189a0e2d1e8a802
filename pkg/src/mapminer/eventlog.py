"""Event-log ingestion: parse delimited incident logs into cases of activities.

A log is a delimited text file with a header row. Each data row is one event
belonging to a case (process instance). Events are grouped per case, ordered
by timestamp (stable, so ties keep file order) and the activity labels are
encoded as dense integer symbols for the HMM learner.
"""

from __future__ import annotations

import csv
import io
from collections import Counter
from dataclasses import dataclass, field
from datetime import datetime
from typing import Iterable, TextIO


class EventLogError(ValueError):
    """Base class for event-log problems."""


class SchemaError(EventLogError):
    def __init__(self, column: str, available: Iterable[str] = ()):
        self.column = column
        msg = f"missing column {column!r}"
        available = list(available)
        if available:
            msg += f" (header has: {', '.join(available)})"
        super().__init__(msg)


class RowError(EventLogError):
    def __init__(self, row: int, reason: str):
        self.row = row
        super().__init__(f"row {row}: {reason}")


class EmptyLogError(EventLogError):
    def __init__(self, msg: str = "event log contains no events"):
        super().__init__(msg)


@dataclass(frozen=True)
class ColumnSchema:
    """Where to find each field in the input file.

    Defaults follow the BPI 2014 incident-activity export. ``timestamp_format``
    is a :func:`datetime.strptime` pattern; day-first by default.
    """

    case_id: str = "Incident ID"
    timestamp: str = "DateStamp"
    activity: str = "IncidentActivity_Type"
    group: str = "Assignment Group"
    delimiter: str = ";"
    timestamp_format: str = "%d/%m/%Y %H:%M"

    def to_dict(self) -> dict:
        return {
            "case_id": self.case_id,
            "timestamp": self.timestamp,
            "activity": self.activity,
            "group": self.group,
            "delimiter": self.delimiter,
            "timestamp_format": self.timestamp_format,
        }


@dataclass(frozen=True)
class Event:
    case_id: str
    timestamp: datetime
    activity: str
    group: str = ""


@dataclass(frozen=True)
class Case:
    case_id: str
    events: tuple[Event, ...]

    def __post_init__(self):
        if not self.events:
            raise EventLogError(f"case {self.case_id!r} has no events")

    def __len__(self) -> int:
        return len(self.events)

    @property
    def activities(self) -> list[str]:
        return [e.activity for e in self.events]


class Vocabulary:
    """Bijection between activity labels and dense integer ids.

    Ids are assigned by descending frequency, ties broken alphabetically, so
    the encoding is a deterministic function of the log contents.
    """

    def __init__(self, labels: Iterable[str]):
        self.labels: tuple[str, ...] = tuple(labels)
        self._ids = {label: i for i, label in enumerate(self.labels)}
        if len(self._ids) != len(self.labels):
            raise EventLogError("vocabulary labels must be unique")

    @classmethod
    def from_counts(cls, counts: Counter) -> "Vocabulary":
        ordered = sorted(counts.items(), key=lambda kv: (-kv[1], kv[0]))
        return cls(label for label, _ in ordered)

    @classmethod
    def from_mapping(cls, mapping: dict[str, int]) -> "Vocabulary":
        labels = sorted(mapping, key=mapping.__getitem__)
        if [mapping[l] for l in labels] != list(range(len(labels))):
            raise EventLogError("vocabulary ids must be dense in [0, M)")
        return cls(labels)

    def __len__(self) -> int:
        return len(self.labels)

    def __contains__(self, label: str) -> bool:
        return label in self._ids

    def __eq__(self, other) -> bool:
        return isinstance(other, Vocabulary) and self.labels == other.labels

    def __repr__(self) -> str:
        return f"Vocabulary({len(self)} labels)"

    def id_of(self, label: str) -> int:
        return self._ids[label]

    def label_of(self, symbol: int) -> str:
        return self.labels[symbol]

    def to_dict(self) -> dict[str, int]:
        return dict(self._ids)


@dataclass(frozen=True)
class EventLog:
    cases: tuple[Case, ...]
    vocabulary: Vocabulary
    source_meta: dict = field(default_factory=dict, compare=False)

    @property
    def n_events(self) -> int:
        return sum(len(c) for c in self.cases)

    @property
    def n_cases(self) -> int:
        return len(self.cases)

    def summary(self) -> dict:
        return {
            "cases": self.n_cases,
            "events": self.n_events,
            "activities": len(self.vocabulary),
        }


def build_log(events: Iterable[Event], source_meta: dict | None = None) -> EventLog:
    """Group events into cases (first-appearance order) and build the vocabulary."""
    grouped: dict[str, list[Event]] = {}
    counts: Counter = Counter()
    for ev in events:
        grouped.setdefault(ev.case_id, []).append(ev)
        counts[ev.activity] += 1
    # sorted() is stable: equal timestamps keep input order
    cases = tuple(
        Case(cid, tuple(sorted(evs, key=lambda e: e.timestamp)))
        for cid, evs in grouped.items()
    )
    return EventLog(cases, Vocabulary.from_counts(counts), dict(source_meta or {}))


def parse_log(
    source: TextIO | str, schema: ColumnSchema | None = None, name: str | None = None
) -> EventLog:
    """Parse a delimited event log.

    ``source`` is an open text stream or the text itself. Raises
    :class:`SchemaError` for a missing column, :class:`RowError` (with the
    1-based file line number) for malformed rows and :class:`EmptyLogError`
    when there are no data rows.
    """
    schema = schema or ColumnSchema()
    if isinstance(source, str):
        source = io.StringIO(source)
    reader = csv.reader(source, delimiter=schema.delimiter)
    header = next(reader, None)
    if header is None:
        raise EmptyLogError()
    header = [h.strip().lstrip("﻿") for h in header]
    idx = {}
    for key in ("case_id", "timestamp", "activity", "group"):
        col = getattr(schema, key)
        if col not in header:
            raise SchemaError(col, header)
        idx[key] = header.index(col)
    width = max(idx.values()) + 1

    events = []
    for row in reader:
        if not row or all(not cell.strip() for cell in row):
            continue
        line = reader.line_num
        if len(row) < width:
            raise RowError(line, f"expected at least {width} fields, got {len(row)}")
        case_id = row[idx["case_id"]].strip()
        if not case_id:
            raise RowError(line, "empty case id")
        activity = row[idx["activity"]].strip()
        if not activity:
            raise RowError(line, "empty activity")
        raw_ts = row[idx["timestamp"]].strip()
        try:
            ts = datetime.strptime(raw_ts, schema.timestamp_format)
        except ValueError:
            raise RowError(
                line, f"timestamp {raw_ts!r} does not match {schema.timestamp_format!r}"
            ) from None
        events.append(Event(case_id, ts, activity, row[idx["group"]].strip()))

    if not events:
        raise EmptyLogError()
    meta = {"schema": schema.to_dict()}
    if name is not None:
        meta["source"] = name
    return build_log(events, meta)


def read_log(path, schema: ColumnSchema | None = None) -> EventLog:
    with open(path, newline="", encoding="utf-8") as fh:
        return parse_log(fh, schema, name=str(path))


def write_log(log: EventLog, stream: TextIO, schema: ColumnSchema | None = None) -> None:
    """Emit ``log`` in the delimited format :func:`parse_log` reads."""
    schema = schema or ColumnSchema()
    writer = csv.writer(stream, delimiter=schema.delimiter, lineterminator="\n")
    writer.writerow([schema.case_id, schema.timestamp, schema.activity, schema.group])
    for case in log.cases:
        for ev in case.events:
            writer.writerow(
                [
                    ev.case_id,
                    ev.timestamp.strftime(schema.timestamp_format),
                    ev.activity,
                    ev.group,
                ]
            )


def encode_cases(log: EventLog) -> list[list[int]]:
    vocab = log.vocabulary
    return [[vocab.id_of(e.activity) for e in case.events] for case in log.cases]


def activity_histogram(log: EventLog) -> list[tuple[str, int, float]]:
    """Activity counts in descending order with cumulative fractions (Pareto view)."""
    counts = Counter(e.activity for case in log.cases for e in case.events)
    total = sum(counts.values())
    if total == 0:
        raise EmptyLogError()
    rows = []
    running = 0
    for label, count in sorted(counts.items(), key=lambda kv: (-kv[1], kv[0])):
        running += count
        rows.append((label, count, running / total))
    return rows
