"""Loading, cleaning, and coordinate-merging of infection tables.

The input is a delimiter-separated table with a header row.  Only four
columns are consumed: parent unit, division name, active case count, and
the change in active cases since the previous day.  Rows whose division
name is empty or a placeholder ("Unassigned", "Unknown", "Other") carry
counts that cannot be placed on a map and are dropped.
"""

from __future__ import annotations

import csv
import io
import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Mapping, Sequence

from .model import (
    DataError,
    Division,
    DivisionKey,
    GeoPoint,
    InfectionRecord,
    ParseError,
    SchemaError,
)

logger = logging.getLogger(__name__)

BLACKLISTED_DIVISIONS = frozenset({"unassigned", "unknown", "other"})


@dataclass(frozen=True)
class TableSchema:
    """Column names for the four required fields."""

    division: str = "district"
    parent: str = "state"
    active: str = "active"
    delta_active: str = "delta_active"

    def required_columns(self) -> tuple[str, ...]:
        return (self.parent, self.division, self.active, self.delta_active)


@dataclass(frozen=True)
class IngestStats:
    rows_read: int
    rows_dropped: int


def load_infection_table(
    source,
    schema: TableSchema | None = None,
    delimiter: str = ",",
) -> list[InfectionRecord]:
    """Parse a table into cleaned infection records, preserving row order.

    ``source`` may be a path or an open text/binary stream.  Raises
    :class:`SchemaError` when a required column is missing,
    :class:`ParseError` when a count cell is not numeric, and
    :class:`DataError` for duplicate (division, parent) rows.
    """
    records, _ = read_infection_table(source, schema, delimiter)
    return records


def read_infection_table(
    source,
    schema: TableSchema | None = None,
    delimiter: str = ",",
) -> tuple[list[InfectionRecord], IngestStats]:
    """Like :func:`load_infection_table`, also reporting read/dropped counts."""
    schema = schema or TableSchema()
    with _as_text(source) as stream:
        reader = csv.DictReader(stream, delimiter=delimiter)
        if reader.fieldnames is None:
            raise SchemaError("input table has no header row")
        header = [name.strip() for name in reader.fieldnames]
        missing = [col for col in schema.required_columns() if col not in header]
        if missing:
            raise SchemaError(f"input table is missing required column(s): {', '.join(missing)}")
        reader.fieldnames = header

        records: list[InfectionRecord] = []
        seen: dict[tuple[str, str], int] = {}
        rows_read = 0
        rows_dropped = 0
        for row in reader:
            rows_read += 1
            line = reader.line_num
            division = (row.get(schema.division) or "").strip()
            parent = (row.get(schema.parent) or "").strip()
            if not division or division.lower() in BLACKLISTED_DIVISIONS or not parent:
                rows_dropped += 1
                continue
            active = _parse_count(row.get(schema.active), schema.active, line)
            if active < 0:
                raise DataError(f"row {line}: {schema.active} must be >= 0, got {active}")
            delta = _parse_count(row.get(schema.delta_active), schema.delta_active, line)

            key = DivisionKey(division, parent)
            norm = key.normalized()
            if norm in seen:
                raise DataError(
                    f"row {line}: duplicate division {key.label()!r} "
                    f"(first seen at row {seen[norm]})"
                )
            seen[norm] = line
            records.append(InfectionRecord(key=key, active=active, delta_active=delta))
    return records, IngestStats(rows_read=rows_read, rows_dropped=rows_dropped)


def clean_records(records: Iterable[InfectionRecord]) -> list[InfectionRecord]:
    """Trim names and drop unmappable divisions from already-built records.

    Idempotent: the output of :func:`load_infection_table` passes through
    unchanged.
    """
    out: list[InfectionRecord] = []
    for rec in records:
        division = rec.key.division_name.strip()
        parent = rec.key.parent_name.strip()
        if not division or division.lower() in BLACKLISTED_DIVISIONS or not parent:
            continue
        key = rec.key
        if division != rec.key.division_name or parent != rec.key.parent_name:
            key = DivisionKey(division, parent)
            rec = InfectionRecord(key=key, active=rec.active, delta_active=rec.delta_active)
        out.append(rec)
    return out


def merge_coordinates(
    records: Sequence[InfectionRecord],
    coords: Mapping[DivisionKey, GeoPoint],
) -> tuple[list[Division], list[DivisionKey]]:
    """Attach coordinates to records, matching case-insensitively.

    Every record lands in exactly one of the two outputs: divisions for
    keys that resolved, unresolved keys otherwise.  Nothing is dropped
    silently; callers decide how loud to be about the unresolved list.
    """
    lookup: dict[tuple[str, str], GeoPoint] = {}
    for key, point in coords.items():
        norm = key.normalized()
        if norm in lookup:
            logger.warning("coordinate map has colliding keys for %r; keeping the first", key.label())
            continue
        lookup[norm] = point

    divisions: list[Division] = []
    unresolved: list[DivisionKey] = []
    for rec in records:
        point = lookup.get(rec.key.normalized())
        if point is None:
            unresolved.append(rec.key)
        else:
            divisions.append(
                Division(key=rec.key, point=point, active=rec.active, delta_active=rec.delta_active)
            )
    return divisions, unresolved


def _parse_count(cell, column: str, line: int) -> int:
    text = (cell or "").strip()
    if not text:
        raise ParseError(f"row {line}: empty {column} cell")
    try:
        return int(text)
    except ValueError:
        raise ParseError(f"row {line}: cannot parse {column} value {text!r} as an integer") from None


class _as_text:
    """Context manager yielding a text stream from a path or open stream.

    Only closes what it opened itself.
    """

    def __init__(self, source):
        self.source = source
        self._opened = None
        self._wrapper = None

    def __enter__(self):
        if isinstance(self.source, (str, Path)):
            self._opened = open(self.source, "r", encoding="utf-8", newline="")
            return self._opened
        if hasattr(self.source, "read"):
            probe = self.source.read(0)
            if isinstance(probe, bytes):
                self._wrapper = io.TextIOWrapper(self.source, encoding="utf-8", newline="")
                return self._wrapper
            return self.source
        raise TypeError(f"expected a path or file object, got {type(self.source).__name__}")

    def __exit__(self, *exc):
        if self._wrapper is not None:
            self._wrapper.detach()
        if self._opened is not None:
            self._opened.close()
        return False
