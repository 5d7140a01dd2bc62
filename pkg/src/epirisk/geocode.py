"""Division-to-coordinate resolution with a persistent JSON cache.

Lookups go through a provider object; every successful resolution is
appended to a file-backed cache so later runs are offline and repeatable.
Two providers ship: a file-fixture provider reading the cache format
itself, and a generic HTTP provider configured with a URL template and
JSON paths for the latitude and longitude fields.
"""

from __future__ import annotations

import json
import logging
import os
import tempfile
import urllib.parse
from pathlib import Path
from typing import Iterable, Mapping

import requests

from .model import ConfigError, DataError, DivisionKey, GeocodeTransportError, GeoPoint

logger = logging.getLogger(__name__)


def form_query(key: DivisionKey) -> str:
    """Provider query string for a division: ``"<division>, <parent>"``."""
    return f"{key.division_name}, {key.parent_name}"


class GeocodeProvider:
    """Resolves a query string to a point, or None when unknown.

    ``max_in_flight`` declares how many requests may be issued
    concurrently; None means unbounded.
    """

    max_in_flight: int | None = 1

    def resolve(self, query: str) -> GeoPoint | None:
        raise NotImplementedError


class GeoCache:
    """File-backed map of division keys to coordinates.

    The file is a JSON object ``{"division|parent": {"lat": n, "lon": n}}``.
    A missing file is an empty cache; :meth:`save` writes atomically and
    creates it.  Coordinates survive a save/load round trip bit-exactly.
    """

    def __init__(self, path: str | Path | None = None):
        self.path = Path(path) if path is not None else None
        self._points: dict[DivisionKey, GeoPoint] = {}

    @classmethod
    def load(cls, path: str | Path) -> "GeoCache":
        cache = cls(path)
        if cache.path.exists():
            cache._points = load_points_file(cache.path)
        return cache

    def get(self, key: DivisionKey) -> GeoPoint | None:
        return self._points.get(key)

    def put(self, key: DivisionKey, point: GeoPoint) -> None:
        self._points[key] = point

    def save(self) -> None:
        """Persist the cache; no-op for a pathless (in-memory) cache."""
        if self.path is None:
            return
        payload = {
            key.to_id(): {"lat": point.lat, "lon": point.lon}
            for key, point in sorted(self._points.items())
        }
        data = json.dumps(payload, indent=2, sort_keys=True) + "\n"
        _write_atomic(self.path, data.encode("utf-8"))

    def as_mapping(self) -> dict[DivisionKey, GeoPoint]:
        return dict(self._points)

    def __contains__(self, key: DivisionKey) -> bool:
        return key in self._points

    def __len__(self) -> int:
        return len(self._points)


def load_points_file(path: str | Path) -> dict[DivisionKey, GeoPoint]:
    """Read a cache-format JSON file into a key-to-point map."""
    with open(path, "r", encoding="utf-8") as fh:
        try:
            payload = json.load(fh)
        except json.JSONDecodeError as exc:
            raise DataError(f"{path}: not valid JSON: {exc}") from exc
    if not isinstance(payload, dict):
        raise DataError(f"{path}: expected a JSON object of division ids to points")
    points = {}
    for raw_key, entry in payload.items():
        key = DivisionKey.from_id(raw_key)
        try:
            points[key] = GeoPoint(float(entry["lat"]), float(entry["lon"]))
        except (KeyError, TypeError, ValueError) as exc:
            raise DataError(f"{path}: bad coordinate entry for {raw_key!r}: {exc}") from exc
    return points


class FixtureGeocoder(GeocodeProvider):
    """Deterministic provider backed by a fixed key-to-point map."""

    max_in_flight = None

    def __init__(self, points: Mapping[DivisionKey, GeoPoint]):
        self._by_query: dict[str, GeoPoint] = {}
        for key, point in points.items():
            query = form_query(key)
            if query in self._by_query:
                logger.warning("fixture has colliding query %r; keeping the first entry", query)
                continue
            self._by_query[query] = point

    @classmethod
    def from_file(cls, path: str | Path) -> "FixtureGeocoder":
        return cls(load_points_file(path))

    def resolve(self, query: str) -> GeoPoint | None:
        return self._by_query.get(query)


class HttpGeocoder(GeocodeProvider):
    """Generic HTTP geocoder driven by a URL template.

    The template must contain ``{query}`` and may contain ``{key}``, filled
    from the environment variable named by ``api_key_env`` (the key never
    appears on a command line).  ``lat_path`` and ``lon_path`` are
    ``/``-separated paths into the JSON response; integer segments index
    arrays, so a path through ``results/0`` picks the first candidate when
    the service returns several.
    """

    max_in_flight = 1

    def __init__(
        self,
        url_template: str,
        lat_path: str,
        lon_path: str,
        api_key_env: str | None = None,
        timeout: float = 10.0,
        session: requests.Session | None = None,
    ):
        if "{query}" not in url_template:
            raise ConfigError("HTTP geocoder URL template must contain a {query} placeholder")
        self.url_template = url_template
        self.lat_path = lat_path
        self.lon_path = lon_path
        self.api_key_env = api_key_env
        self.timeout = timeout
        self._session = session or requests.Session()

    def resolve(self, query: str) -> GeoPoint | None:
        url = self._build_url(query)
        try:
            response = self._session.get(url, timeout=self.timeout)
            response.raise_for_status()
            payload = response.json()
        except requests.RequestException as exc:
            raise GeocodeTransportError(f"geocoding request failed for {query!r}: {exc}", []) from exc
        lat = _walk_json(payload, self.lat_path, query)
        lon = _walk_json(payload, self.lon_path, query)
        if lat is None or lon is None:
            return None
        try:
            return GeoPoint(float(lat), float(lon))
        except (TypeError, ValueError) as exc:
            raise GeocodeTransportError(
                f"geocoding response for {query!r} has non-numeric coordinates: {exc}", []
            ) from exc

    def _build_url(self, query: str) -> str:
        fields = {"query": urllib.parse.quote(query)}
        if "{key}" in self.url_template:
            if not self.api_key_env:
                raise ConfigError("URL template expects {key} but no API key env var is configured")
            key = os.environ.get(self.api_key_env)
            if not key:
                raise ConfigError(f"environment variable {self.api_key_env} is not set")
            fields["key"] = urllib.parse.quote(key)
        return self.url_template.format(**fields)


def _walk_json(payload, path: str, query: str):
    """Follow a /-separated path through nested dicts and lists."""
    node = payload
    for segment in path.strip("/").split("/"):
        if isinstance(node, list):
            if len(node) > 1 and segment == "0":
                logger.warning("ambiguous geocoding response for %r; using the first result", query)
            try:
                node = node[int(segment)]
            except (ValueError, IndexError):
                return None
        elif isinstance(node, dict):
            if segment not in node:
                return None
            node = node[segment]
        else:
            return None
    return node


def resolve_all(
    keys: Iterable[DivisionKey],
    provider: GeocodeProvider,
    cache: GeoCache,
) -> dict[DivisionKey, GeoPoint]:
    """Resolve every key, serving from the cache first.

    Cache hits never touch the provider.  New resolutions are appended to
    the cache and persisted, including when some provider calls fail, so a
    retry after a :class:`GeocodeTransportError` only re-queries the keys
    it reports.  Keys the provider does not know are omitted from the
    result and logged.
    """
    resolved: dict[DivisionKey, GeoPoint] = {}
    failed: list[DivisionKey] = []
    new_entries = 0
    seen: set[DivisionKey] = set()
    for key in keys:
        if key in seen:
            continue
        seen.add(key)
        cached = cache.get(key)
        if cached is not None:
            resolved[key] = cached
            continue
        try:
            point = provider.resolve(form_query(key))
        except GeocodeTransportError as exc:
            logger.warning("transport failure for %r: %s", key.label(), exc)
            failed.append(key)
            continue
        if point is None:
            logger.warning("geocoder has no result for %r; division will be unresolved", key.label())
            continue
        resolved[key] = point
        cache.put(key, point)
        new_entries += 1
    if new_entries:
        cache.save()
    if failed:
        raise GeocodeTransportError(
            f"{len(failed)} geocoding request(s) failed; rerun to retry them", failed
        )
    return resolved


def _write_atomic(path: Path, data: bytes) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=path.name, suffix=".tmp")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        try:
            os.unlink(tmp)
        except OSError:
            pass
        raise
