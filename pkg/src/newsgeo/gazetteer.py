"""GeoNames dump ingestion.

Reads the tab-separated ``allCountries.txt``-style main dump and the
``alternateNamesV2.txt``-style alternate-names dump into an in-memory
:class:`Gazetteer`. Only English alternates and abbreviations are kept.
See https://download.geonames.org/export/dump/readme.txt for the layouts.
"""

from __future__ import annotations

import logging
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Iterator, Mapping

log = logging.getLogger(__name__)

MAIN_FIELD_COUNT = 19
ABBREVIATION_MARKER = "abbr"

_COUNTRY_RE = re.compile(r"^[A-Z]{2}$")


class GazetteerParseError(ValueError):
    """A single dump row could not be parsed."""

    def __init__(self, message: str, line_number: int | None = None):
        self.line_number = line_number
        where = f"line {line_number}: " if line_number is not None else ""
        super().__init__(where + message)


@dataclass
class GazetteerEntry:
    id: int
    name: str
    latitude: float
    longitude: float
    feature_class: str = ""
    feature_code: str = ""
    country_code: str | None = None
    admin1: str | None = None
    population: int = 0
    alternate_names: list[str] = field(default_factory=list)
    abbreviations: list[str] = field(default_factory=list)

    def __post_init__(self) -> None:
        if not -90.0 <= self.latitude <= 90.0:
            raise GazetteerParseError(f"latitude {self.latitude} out of range")
        if not -180.0 <= self.longitude <= 180.0:
            raise GazetteerParseError(f"longitude {self.longitude} out of range")
        if self.population < 0:
            raise GazetteerParseError(f"negative population {self.population}")
        if self.country_code is not None and not _COUNTRY_RE.match(self.country_code):
            raise GazetteerParseError(f"bad country code {self.country_code!r}")

    @property
    def searchable_names(self) -> list[str]:
        return [self.name, *self.alternate_names, *self.abbreviations]

    def to_dict(self) -> dict:
        return {
            "id": self.id,
            "name": self.name,
            "latitude": self.latitude,
            "longitude": self.longitude,
            "feature_class": self.feature_class,
            "feature_code": self.feature_code,
            "country_code": self.country_code,
            "admin1": self.admin1,
            "population": self.population,
            "alternate_names": list(self.alternate_names),
            "abbreviations": list(self.abbreviations),
        }

    @classmethod
    def from_dict(cls, data: Mapping) -> "GazetteerEntry":
        return cls(**data)


@dataclass
class LoadStats:
    """Row counters reported by :func:`load_gazetteer`."""

    main_rows: int = 0
    main_dropped: int = 0
    alternate_rows: int = 0
    alternate_dropped: int = 0
    alternates_attached: int = 0
    abbreviations_attached: int = 0
    orphan_alternates: int = 0
    other_language: int = 0


class Gazetteer:
    """Immutable-after-load mapping of GeoNames id to entry."""

    def __init__(self, entries: Iterable[GazetteerEntry] = (), stats: LoadStats | None = None):
        self._entries: dict[int, GazetteerEntry] = {}
        for entry in entries:
            if entry.id in self._entries:
                raise ValueError(f"duplicate gazetteer id {entry.id}")
            self._entries[entry.id] = entry
        self.stats = stats or LoadStats()

    @property
    def count(self) -> int:
        return len(self._entries)

    def __len__(self) -> int:
        return len(self._entries)

    def __iter__(self) -> Iterator[GazetteerEntry]:
        return iter(self._entries.values())

    def __contains__(self, entry_id: object) -> bool:
        return entry_id in self._entries

    def get(self, entry_id: int) -> GazetteerEntry | None:
        return self._entries.get(entry_id)

    def ids(self) -> list[int]:
        return sorted(self._entries)


def lookup_by_id(gazetteer: Gazetteer, entry_id: int) -> GazetteerEntry | None:
    """Return the entry with ``entry_id`` or None; never raises on a miss."""
    return gazetteer.get(entry_id)


def _parse_float(text: str, what: str, line_number: int | None) -> float:
    try:
        return float(text)
    except ValueError:
        raise GazetteerParseError(f"non-numeric {what} {text!r}", line_number) from None


def parse_gazetteer_row(line: str, line_number: int | None = None) -> GazetteerEntry:
    """Parse one main-dump row; alternate lists are left empty."""
    fields = line.rstrip("\r\n").split("\t")
    if len(fields) < MAIN_FIELD_COUNT:
        raise GazetteerParseError(
            f"expected {MAIN_FIELD_COUNT} fields, got {len(fields)}", line_number
        )
    try:
        entry_id = int(fields[0])
    except ValueError:
        raise GazetteerParseError(f"non-numeric id {fields[0]!r}", line_number) from None
    if entry_id <= 0:
        raise GazetteerParseError(f"id must be positive, got {entry_id}", line_number)
    lat = _parse_float(fields[4], "latitude", line_number)
    lon = _parse_float(fields[5], "longitude", line_number)
    pop_text = fields[14].strip()
    try:
        population = int(pop_text) if pop_text else 0
    except ValueError:
        raise GazetteerParseError(f"non-numeric population {pop_text!r}", line_number) from None
    try:
        return GazetteerEntry(
            id=entry_id,
            name=fields[1],
            latitude=lat,
            longitude=lon,
            feature_class=fields[6],
            feature_code=fields[7],
            country_code=fields[8] or None,
            admin1=fields[10] or None,
            population=population,
        )
    except GazetteerParseError as exc:
        raise GazetteerParseError(str(exc), line_number) from None


def format_gazetteer_row(entry: GazetteerEntry) -> str:
    """Serialize an entry back into a 19-field main-dump row."""
    fields = [""] * MAIN_FIELD_COUNT
    fields[0] = str(entry.id)
    fields[1] = entry.name
    fields[2] = entry.name
    fields[4] = repr(entry.latitude)
    fields[5] = repr(entry.longitude)
    fields[6] = entry.feature_class
    fields[7] = entry.feature_code
    fields[8] = entry.country_code or ""
    fields[10] = entry.admin1 or ""
    fields[14] = str(entry.population)
    return "\t".join(fields)


def parse_alternate_name_row(
    line: str, line_number: int | None = None
) -> tuple[int, str, str, bool]:
    """Parse an alternate-names row into ``(entry_id, name, language, is_abbreviation)``."""
    fields = line.rstrip("\r\n").split("\t")
    if len(fields) < 4:
        raise GazetteerParseError(f"expected >= 4 fields, got {len(fields)}", line_number)
    try:
        entry_id = int(fields[1])
    except ValueError:
        raise GazetteerParseError(f"non-numeric geonameid {fields[1]!r}", line_number) from None
    name = fields[3]
    if not name:
        raise GazetteerParseError("empty alternate name", line_number)
    language = fields[2]
    return entry_id, name, language, language == ABBREVIATION_MARKER


def load_admin1_names(path: str | Path) -> dict[str, str]:
    """Read ``admin1CodesASCII.txt`` into ``{"AU.02": "New South Wales", ...}``."""
    names: dict[str, str] = {}
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            parts = line.rstrip("\r\n").split("\t")
            if len(parts) >= 2 and parts[0]:
                names[parts[0]] = parts[1]
    return names


def _iter_lines(path: Path) -> Iterator[tuple[int, str]]:
    with open(path, encoding="utf-8", newline="") as fh:
        for number, line in enumerate(fh, start=1):
            if not line.strip() or line.startswith("#"):
                continue
            yield number, line


def load_gazetteer(
    main_path: str | Path,
    alternates_path: str | Path | None = None,
    language_filter: str = "en",
    strict: bool = False,
    admin1_names: Mapping[str, str] | None = None,
) -> Gazetteer:
    """Load a gazetteer from GeoNames dump files.

    In lenient mode (the default) malformed rows are skipped and counted in
    ``gazetteer.stats``; with ``strict=True`` the first bad row raises
    :class:`GazetteerParseError`. When ``admin1_names`` is given, admin1
    codes are replaced with their human-readable division names.
    """
    stats = LoadStats()
    entries: dict[int, GazetteerEntry] = {}
    for number, line in _iter_lines(Path(main_path)):
        stats.main_rows += 1
        try:
            entry = parse_gazetteer_row(line, number)
            if entry.id in entries:
                raise GazetteerParseError(f"duplicate id {entry.id}", number)
        except GazetteerParseError as exc:
            if strict:
                raise
            stats.main_dropped += 1
            log.warning("skipping main row: %s", exc)
            continue
        if admin1_names and entry.country_code and entry.admin1:
            entry.admin1 = admin1_names.get(f"{entry.country_code}.{entry.admin1}", entry.admin1)
        entries[entry.id] = entry

    if alternates_path is not None:
        for number, line in _iter_lines(Path(alternates_path)):
            stats.alternate_rows += 1
            try:
                entry_id, name, language, is_abbr = parse_alternate_name_row(line, number)
            except GazetteerParseError as exc:
                if strict:
                    raise
                stats.alternate_dropped += 1
                log.warning("skipping alternate row: %s", exc)
                continue
            target = entries.get(entry_id)
            if target is None:
                stats.orphan_alternates += 1
                continue
            if is_abbr:
                target.abbreviations.append(name)
                stats.abbreviations_attached += 1
            elif language == language_filter:
                target.alternate_names.append(name)
                stats.alternates_attached += 1
            else:
                stats.other_language += 1

    if stats.orphan_alternates:
        log.info("dropped %d alternate names with unknown ids", stats.orphan_alternates)
    return Gazetteer(entries.values(), stats=stats)
