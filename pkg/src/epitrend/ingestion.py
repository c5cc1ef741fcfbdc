"""Read the upstream daily CSVs and turn them into per-unit count series.

Input files are comma-separated UTF-8 with a header row and ISO dates.
Column lookup is by name through a configurable schema (upstream header
names drift); the defaults match the published province- and region-level
files. Sources may be local paths or HTTP(S) URLs; offline operation from
files is first-class.
"""

from __future__ import annotations

import csv
import datetime
import enum
import io
import json
import logging
import urllib.error
import urllib.request
from dataclasses import dataclass
from typing import Iterable, Mapping, Optional

from .domain import CountSeries, ResponseKind
from .errors import (
    DateGap,
    DuplicateCode,
    EmptyFile,
    InvalidPopulation,
    MalformedHeader,
    NoUnits,
    SourceUnreachable,
)
from .selection import SelectionConfig

log = logging.getLogger(__name__)


class Level(enum.Enum):
    PROVINCE = "province"
    REGION = "region"


# Semantic field -> upstream header name. The province file carries only
# cumulative total cases; the region file adds deaths and occupancy counts.
DEFAULT_SCHEMAS: dict[Level, dict[str, str]] = {
    Level.PROVINCE: {
        "date": "data",
        "unit_code": "codice_provincia",
        "unit_name": "denominazione_provincia",
        "latitude": "lat",
        "longitude": "long",
        "cases": "totale_casi",
    },
    Level.REGION: {
        "date": "data",
        "unit_code": "codice_regione",
        "unit_name": "denominazione_regione",
        "latitude": "lat",
        "longitude": "long",
        "cases": "totale_casi",
        "deaths": "deceduti",
        "icu": "terapia_intensiva",
        "hospitalized": "ricoverati_con_sintomi",
    },
}

RESPONSES_BY_LEVEL: dict[Level, tuple[ResponseKind, ...]] = {
    Level.PROVINCE: (ResponseKind.CUMULATIVE_CASES,),
    Level.REGION: (
        ResponseKind.CUMULATIVE_CASES,
        ResponseKind.CUMULATIVE_DEATHS,
        ResponseKind.CURRENT_ICU,
        ResponseKind.CURRENT_HOSPITALIZED,
    ),
}


@dataclass(frozen=True)
class RawRow:
    """One parsed CSV row; count values are None when unparseable."""

    date: datetime.date
    unit_code: str
    unit_name: str
    latitude: float
    longitude: float
    counts: dict[ResponseKind, Optional[int]]


def load_schema(level: Level, override_path: Optional[str] = None) -> dict[str, str]:
    """Default header mapping for the level, overlaid with a JSON file."""
    schema = dict(DEFAULT_SCHEMAS[level])
    if override_path is not None:
        with open(override_path, encoding="utf-8") as fh:
            overrides = json.load(fh)
        unknown = set(overrides) - set(schema)
        if unknown:
            raise MalformedHeader(f"schema override names unknown fields: {sorted(unknown)}")
        schema.update(overrides)
    return schema


def _read_text(source: str) -> str:
    if source.startswith(("http://", "https://")):
        try:
            with urllib.request.urlopen(source) as resp:
                return resp.read().decode("utf-8")
        except (urllib.error.URLError, OSError) as exc:
            raise SourceUnreachable(f"cannot fetch {source}: {exc}") from exc
    try:
        with open(source, encoding="utf-8") as fh:
            return fh.read()
    except OSError as exc:
        raise SourceUnreachable(f"cannot read {source}: {exc}") from exc


def _parse_date(raw: str) -> datetime.date:
    # Upstream stamps look like 2020-03-10T17:00:00; keep the day part.
    return datetime.date.fromisoformat(raw.strip()[:10])


def _parse_count(raw: Optional[str]) -> Optional[int]:
    if raw is None:
        return None
    raw = raw.strip()
    if not raw:
        return None
    try:
        value = int(float(raw))
    except ValueError:
        return None
    return value


def load_dataset(source: str, level: Level,
                 schema: Optional[Mapping[str, str]] = None) -> list[RawRow]:
    """Parse the daily CSV at ``source`` (path or URL) into RawRows.

    Rows with unparseable counts carry a None marker and a logged warning
    rather than crashing the run.
    """
    schema = dict(schema) if schema is not None else dict(DEFAULT_SCHEMAS[level])
    text = _read_text(source)
    reader = csv.DictReader(io.StringIO(text))
    if reader.fieldnames is None:
        raise EmptyFile(f"{source}: no header row")
    missing = [name for name in schema.values() if name not in reader.fieldnames]
    if missing:
        raise MalformedHeader(f"{source}: expected columns absent: {missing}")

    responses = RESPONSES_BY_LEVEL[level]
    rows: list[RawRow] = []
    for line_no, record in enumerate(reader, start=2):
        counts: dict[ResponseKind, Optional[int]] = {}
        for resp in responses:
            value = _parse_count(record.get(schema[resp.value]))
            if value is None:
                log.warning("%s line %d: unparseable %s count %r",
                            source, line_no, resp.value, record.get(schema[resp.value]))
            elif value < 0:
                log.warning("%s line %d: negative %s count %d treated as missing",
                            source, line_no, resp.value, value)
                value = None
            counts[resp] = value
        rows.append(RawRow(
            date=_parse_date(record[schema["date"]]),
            unit_code=record[schema["unit_code"]].strip(),
            unit_name=record[schema["unit_name"]].strip(),
            latitude=float(record[schema["latitude"]]),
            longitude=float(record[schema["longitude"]]),
            counts=counts,
        ))
    if not rows:
        raise EmptyFile(f"{source}: header only, no data rows")
    return rows


def load_population(path: str, level: Level) -> dict[str, int]:
    """Two-column (code, population) CSV; an optional header row is skipped."""
    text = _read_text(path)
    out: dict[str, int] = {}
    for line_no, row in enumerate(csv.reader(io.StringIO(text)), start=1):
        if not row or not any(cell.strip() for cell in row):
            continue
        if len(row) < 2:
            raise InvalidPopulation(f"{path} line {line_no}: expected code,population")
        code = row[0].strip()
        raw = row[1].strip()
        try:
            population = int(float(raw))
        except ValueError:
            if line_no == 1:
                continue  # header row
            raise InvalidPopulation(f"{path} line {line_no}: bad population {raw!r}")
        if population < 1:
            raise InvalidPopulation(f"{path} line {line_no}: population must be >= 1, got {population}")
        if code in out:
            raise DuplicateCode(f"{path}: unit code {code!r} listed twice")
        out[code] = population
    if not out:
        raise EmptyFile(f"{path}: no population rows")
    return out


def build_series(rows: Iterable[RawRow], populations: Mapping[str, int],
                 response_kind: ResponseKind,
                 config: SelectionConfig = SelectionConfig()) -> list[CountSeries]:
    """Group rows per unit, apply the start-threshold alignment, validate.

    Each unit's series starts at the first day its count reached
    ``config.start_threshold``; units never reaching it keep their full
    span and come back flagged ``sub_threshold`` (the prevalence gate
    usually catches them downstream, but they are still mapped). Units
    missing from the population file are dropped with a warning.
    """
    by_unit: dict[str, list[RawRow]] = {}
    for row in rows:
        by_unit.setdefault(row.unit_code, []).append(row)
    if not by_unit:
        raise NoUnits("no rows to build series from")

    last_date_overall = max(row.date for unit in by_unit.values() for row in unit)
    out: list[CountSeries] = []
    for code in sorted(by_unit):
        unit_rows = sorted(by_unit[code], key=lambda r: r.date)
        population = populations.get(code)
        if population is None:
            log.warning("unit %s (%s): no population entry, dropped",
                        code, unit_rows[0].unit_name)
            continue

        dated = [(r.date, r.counts.get(response_kind)) for r in unit_rows]
        usable = [(d, c) for d, c in dated if c is not None]
        if not usable:
            log.warning("unit %s: no usable %s counts, dropped", code, response_kind.value)
            continue
        for (prev_d, _), (cur_d, _) in zip(usable, usable[1:]):
            if (cur_d - prev_d).days != 1:
                raise DateGap(code, prev_d + datetime.timedelta(days=1))
        if usable[-1][0] < last_date_overall:
            log.warning("unit %s: data end %s lags the most recent date %s",
                        code, usable[-1][0], last_date_overall)

        start = next((i for i, (_, c) in enumerate(usable) if c >= config.start_threshold), None)
        sub_threshold = start is None
        if sub_threshold:
            start = 0
        kept = usable[start:]
        out.append(CountSeries(
            unit_id=code,
            unit_name=unit_rows[-1].unit_name,
            latitude=unit_rows[-1].latitude,
            longitude=unit_rows[-1].longitude,
            population=population,
            response_kind=response_kind,
            t0_date=kept[0][0],
            counts=tuple(c for _, c in kept),
            sub_threshold=sub_threshold,
        ))
    if not out:
        raise NoUnits("no unit had both counts and a population entry")
    return out
