"""Shared domain types and exceptions for the risk pipeline."""

from __future__ import annotations

from dataclasses import dataclass


class PipelineError(Exception):
    """Base class for every error raised by this package."""


class SchemaError(PipelineError):
    """The input table is missing its header or a required column."""


class ParseError(PipelineError):
    """A table cell could not be parsed; the message names the row."""


class DataError(PipelineError):
    """Structurally invalid data: duplicates, coincident centers, bad coordinates."""


class ConfigError(PipelineError):
    """An option value is out of range or unknown."""


class GeocodeTransportError(PipelineError):
    """Provider calls failed for some keys.

    Successful resolutions are already persisted to the cache, so rerunning
    the same request retries only the keys listed in ``failed_keys``.
    """

    def __init__(self, message: str, failed_keys):
        super().__init__(message)
        self.failed_keys = list(failed_keys)


@dataclass(frozen=True, order=True)
class DivisionKey:
    """Identity of an administrative division within its parent unit."""

    division_name: str
    parent_name: str

    def normalized(self) -> tuple[str, str]:
        """Case-folded, trimmed form used for matching across datasets."""
        return (self.division_name.strip().lower(), self.parent_name.strip().lower())

    def label(self) -> str:
        return f"{self.division_name}, {self.parent_name}"

    def to_id(self) -> str:
        """Stable file identifier, ``division|parent``."""
        return f"{self.division_name}|{self.parent_name}"

    @classmethod
    def from_id(cls, raw: str) -> "DivisionKey":
        parts = raw.split("|")
        if len(parts) != 2:
            raise DataError(f"malformed division id {raw!r}; expected 'division|parent'")
        return cls(parts[0], parts[1])


@dataclass(frozen=True)
class GeoPoint:
    """Latitude/longitude pair in decimal degrees."""

    lat: float
    lon: float

    def __post_init__(self):
        # NaN fails both comparisons and is rejected here too.
        if not -90.0 <= self.lat <= 90.0:
            raise DataError(f"latitude {self.lat!r} outside [-90, 90]")
        if not -180.0 <= self.lon <= 180.0:
            raise DataError(f"longitude {self.lon!r} outside [-180, 180]")


@dataclass(frozen=True)
class InfectionRecord:
    """One cleaned table row: active cases and the day-over-day change."""

    key: DivisionKey
    active: int
    delta_active: int


@dataclass(frozen=True)
class Division:
    """An administrative division with coordinates and case counts."""

    key: DivisionKey
    point: GeoPoint
    active: int
    delta_active: int
