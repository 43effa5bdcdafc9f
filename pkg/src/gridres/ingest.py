"""Parse and validate the four input CSV datasets.

Input files and their headers:

  outages.csv        outage_id,component_id,latitude,longitude,start,end,
                     restore_minutes,customers,cause_code
  weather.csv        station_id,timestamp,wind_avg_ms,wind_fastest_2min_ms,
                     precip_in,snowfall_in,snow_depth_in
  stations.csv       station_id,latitude,longitude,capabilities
  severe_events.csv  event_id,event_type,start,end,latitude,longitude,description

Cleaning conventions:

  - All timestamps are ISO-8601 UTC ("2012-06-29T14:00:00Z" or "+00:00"
    offset; naive values are treated as UTC). An unparseable or empty
    timestamp counts as a missing key field.
  - Every row is tallied exactly once in the CleaningReport: it is either
    kept or attributed to the first cleaning rule it violates. Rules are
    checked in the order: missing/unparseable field, time inconsistency,
    out-of-bounds value.
  - Outage duration has a hard operational cap (default 30 days) and the
    customer count a sanity cap (default 10,000,000); both are configurable
    because utilities disagree on what "reasonable" means.
  - restore_minutes may exceed the start/end duration by at most 1 minute,
    absorbing the second-to-minute rounding done by outage management
    systems.
  - Empty weather measurement cells mean "sensor value absent", which is
    distinct from an explicit 0.0. Duplicate (station_id, timestamp) weather
    rows collapse to the row with the most present measurements (ties keep
    the last occurrence); the losing rows are tallied as
    dropped_inconsistent_time since they are competing claims about the
    same station-hour.

Parsing is a pure function of the input bytes, so the four files may be
parsed concurrently.
"""

from __future__ import annotations

import csv
import io
import json
import logging
from dataclasses import dataclass, field
from datetime import datetime, timezone

from .errors import SchemaError, ValidationError

log = logging.getLogger(__name__)

OUTAGES_HEADER = [
    "outage_id", "component_id", "latitude", "longitude",
    "start", "end", "restore_minutes", "customers", "cause_code",
]
WEATHER_HEADER = [
    "station_id", "timestamp", "wind_avg_ms", "wind_fastest_2min_ms",
    "precip_in", "snowfall_in", "snow_depth_in",
]
STATIONS_HEADER = ["station_id", "latitude", "longitude", "capabilities"]
SEVERE_HEADER = [
    "event_id", "event_type", "start", "end", "latitude", "longitude", "description",
]

CAPABILITY_WIND = "wind"
CAPABILITY_PRECIPITATION = "precipitation"
KNOWN_CAPABILITIES = {CAPABILITY_WIND, CAPABILITY_PRECIPITATION}

DEFAULT_MAX_OUTAGE_DAYS = 30.0
DEFAULT_MAX_CUSTOMERS = 10_000_000

# restore_minutes may round up past the true duration by this much
RESTORE_ROUNDING_SLACK_MIN = 1.0


# ---------------------------------------------------------------------------
# Domain types
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class OutageRecord:
    """One component outage from the outage management system."""
    outage_id: str
    component_id: str
    latitude: float
    longitude: float
    start: datetime
    end: datetime
    restore_minutes: float
    customers: int
    cause_code: str

    @property
    def duration_minutes(self) -> float:
        return (self.end - self.start).total_seconds() / 60.0


@dataclass(frozen=True)
class WeatherObservation:
    """One hourly station report; None marks an absent measurement."""
    station_id: str
    timestamp: datetime
    wind_avg: float | None
    wind_fastest_2min: float | None
    precip: float | None
    snowfall: float | None
    snow_depth: float | None

    def present_count(self) -> int:
        return sum(
            v is not None
            for v in (self.wind_avg, self.wind_fastest_2min,
                      self.precip, self.snowfall, self.snow_depth)
        )


@dataclass(frozen=True)
class Station:
    station_id: str
    latitude: float
    longitude: float
    capabilities: frozenset[str]


@dataclass(frozen=True)
class SevereWeatherRecord:
    """Agency-logged hazard event; carries a window and a location but no
    numeric intensity."""
    event_id: str
    event_type: str
    start: datetime
    end: datetime
    latitude: float
    longitude: float
    description: str


@dataclass
class CleaningReport:
    """Row accounting for one parsed file: kept + all drop buckets = total."""
    total_rows: int = 0
    kept: int = 0
    dropped_missing_field: int = 0
    dropped_inconsistent_time: int = 0
    dropped_out_of_bounds: int = 0
    samples: dict[str, list[str]] = field(default_factory=lambda: {
        "missing_field": [], "inconsistent_time": [], "out_of_bounds": [],
    })

    def drop(self, rule: str, row_id: str) -> None:
        setattr(self, f"dropped_{rule}", getattr(self, f"dropped_{rule}") + 1)
        bucket = self.samples[rule]
        if len(bucket) < 10:
            bucket.append(row_id)

    def check(self) -> None:
        total_drops = (self.dropped_missing_field + self.dropped_inconsistent_time
                       + self.dropped_out_of_bounds)
        if self.kept + total_drops != self.total_rows:
            raise AssertionError(
                f"cleaning report does not balance: kept={self.kept} "
                f"drops={total_drops} total={self.total_rows}")

    def to_json(self) -> str:
        doc = {
            "total_rows": self.total_rows,
            "kept": self.kept,
            "dropped_missing_field": self.dropped_missing_field,
            "dropped_inconsistent_time": self.dropped_inconsistent_time,
            "dropped_out_of_bounds": self.dropped_out_of_bounds,
            "samples": self.samples,
        }
        return json.dumps(doc, sort_keys=True, indent=2) + "\n"


# ---------------------------------------------------------------------------
# Field-level parsing helpers
# ---------------------------------------------------------------------------

def parse_instant(text: str) -> datetime | None:
    """Parse an ISO-8601 UTC instant; returns None when unparseable."""
    text = text.strip()
    if not text:
        return None
    if text.endswith(("Z", "z")):
        text = text[:-1] + "+00:00"
    try:
        dt = datetime.fromisoformat(text)
    except ValueError:
        return None
    if dt.tzinfo is None:
        return dt.replace(tzinfo=timezone.utc)
    return dt.astimezone(timezone.utc)


def format_instant(dt: datetime) -> str:
    """Serialize a UTC instant in the canonical Z-suffixed second form."""
    if dt.tzinfo is not None:
        dt = dt.astimezone(timezone.utc)
    return dt.strftime("%Y-%m-%dT%H:%M:%SZ")


def _parse_float(text: str) -> float | None:
    try:
        value = float(text)
    except ValueError:
        return None
    if value != value or value in (float("inf"), float("-inf")):
        return None
    return value


def _parse_optional_float(text: str) -> tuple[float, None] | tuple[None, float] | tuple[None, None]:
    """Returns (value, None) for a number, (None, None) for an empty cell,
    and (None, BAD) for garbage, where BAD is a sentinel float."""
    text = text.strip()
    if not text:
        return None, None
    value = _parse_float(text)
    if value is None:
        return None, float("nan")
    return value, None


def _reader(csv_bytes: bytes) -> csv.reader:
    return csv.reader(io.StringIO(csv_bytes.decode("utf-8")))


def _check_header(row: list[str] | None, expected: list[str], filename: str) -> None:
    if row is None:
        raise SchemaError(f"{filename}: file is empty, expected header {','.join(expected)}")
    got = [c.strip() for c in row]
    if got != expected:
        missing = [c for c in expected if c not in got]
        if missing:
            raise SchemaError(f"{filename}: header is missing column(s) {', '.join(missing)}")
        raise SchemaError(
            f"{filename}: header {','.join(got)} does not match expected order "
            f"{','.join(expected)}")


# ---------------------------------------------------------------------------
# Outages
# ---------------------------------------------------------------------------

def parse_outages(
    csv_bytes: bytes,
    max_outage_days: float = DEFAULT_MAX_OUTAGE_DAYS,
    max_customers: int = DEFAULT_MAX_CUSTOMERS,
) -> tuple[list[OutageRecord], CleaningReport]:
    """Parse outages.csv, returning kept records and the cleaning tally."""
    rows = _reader(csv_bytes)
    _check_header(next(rows, None), OUTAGES_HEADER, "outages.csv")

    report = CleaningReport()
    kept: list[OutageRecord] = []
    for line_no, row in enumerate(rows, start=2):
        if not row:
            continue
        report.total_rows += 1
        row_id = row[0].strip() if row and row[0].strip() else f"row{line_no}"

        if len(row) != len(OUTAGES_HEADER):
            report.drop("missing_field", row_id)
            continue
        outage_id, component_id = row[0].strip(), row[1].strip()
        lat = _parse_float(row[2])
        lon = _parse_float(row[3])
        start = parse_instant(row[4])
        end = parse_instant(row[5])
        restore = _parse_float(row[6])
        customers_f = _parse_float(row[7])
        cause = row[8].strip()
        if (not outage_id or not component_id or not cause
                or lat is None or lon is None or start is None or end is None
                or restore is None or customers_f is None):
            report.drop("missing_field", row_id)
            continue
        customers = int(customers_f)

        duration_min = (end - start).total_seconds() / 60.0
        if start >= end or restore > duration_min + RESTORE_ROUNDING_SLACK_MIN:
            report.drop("inconsistent_time", row_id)
            continue

        if (not -90.0 <= lat <= 90.0 or not -180.0 <= lon <= 180.0
                or restore < 0.0 or customers < 0 or customers > max_customers
                or duration_min > max_outage_days * 24.0 * 60.0):
            report.drop("out_of_bounds", row_id)
            continue

        report.kept += 1
        kept.append(OutageRecord(outage_id, component_id, lat, lon,
                                 start, end, restore, customers, cause))
    report.check()
    return kept, report


def write_outages_csv(records: list[OutageRecord]) -> bytes:
    out = io.StringIO()
    w = csv.writer(out, lineterminator="\n")
    w.writerow(OUTAGES_HEADER)
    for r in records:
        restore = int(r.restore_minutes) if r.restore_minutes == int(r.restore_minutes) \
            else r.restore_minutes
        w.writerow([r.outage_id, r.component_id, repr(r.latitude), repr(r.longitude),
                    format_instant(r.start), format_instant(r.end),
                    restore, r.customers, r.cause_code])
    return out.getvalue().encode("utf-8")


# ---------------------------------------------------------------------------
# Weather observations
# ---------------------------------------------------------------------------

def parse_weather(csv_bytes: bytes) -> tuple[list[WeatherObservation], CleaningReport]:
    """Parse weather.csv: validate, then collapse duplicate station-hours.

    Output is sorted by (station_id, timestamp). kept counts the surviving
    observations.
    """
    rows = _reader(csv_bytes)
    _check_header(next(rows, None), WEATHER_HEADER, "weather.csv")

    report = CleaningReport()
    # (station_id, timestamp) -> (obs, arrival_index); later arrivals win ties
    best: dict[tuple[str, datetime], tuple[WeatherObservation, int]] = {}
    arrival = 0
    for line_no, row in enumerate(rows, start=2):
        if not row:
            continue
        report.total_rows += 1
        row_id = row[0].strip() if row and row[0].strip() else f"row{line_no}"
        row_id = f"{row_id}@{row[1].strip()}" if len(row) > 1 and row[1].strip() else row_id

        if len(row) != len(WEATHER_HEADER):
            report.drop("missing_field", row_id)
            continue
        station_id = row[0].strip()
        ts = parse_instant(row[1])
        if not station_id or ts is None:
            report.drop("missing_field", row_id)
            continue

        values: list[float | None] = []
        bad = False
        for cell in row[2:7]:
            value, err = _parse_optional_float(cell)
            if err is not None:
                bad = True
                break
            values.append(value)
        if bad:
            report.drop("missing_field", row_id)
            continue
        wind_avg, wind_fast, precip, snowfall, snow_depth = values

        if any(v is not None and v < 0.0 for v in values):
            report.drop("out_of_bounds", row_id)
            continue
        if wind_avg is not None and wind_fast is not None and wind_fast < wind_avg:
            report.drop("out_of_bounds", row_id)
            continue

        obs = WeatherObservation(station_id, ts, wind_avg, wind_fast,
                                 precip, snowfall, snow_depth)
        key = (station_id, ts)
        arrival += 1
        prev = best.get(key)
        if prev is None:
            best[key] = (obs, arrival)
            report.kept += 1
        else:
            # collapse duplicates: most present fields wins, ties keep the later row
            if obs.present_count() >= prev[0].present_count():
                best[key] = (obs, arrival)
            report.drop("inconsistent_time", row_id)
    report.check()

    observations = [obs for obs, _ in best.values()]
    observations.sort(key=lambda o: (o.station_id, o.timestamp))
    return observations, report


def write_weather_csv(observations: list[WeatherObservation]) -> bytes:
    def cell(v: float | None) -> str:
        return "" if v is None else repr(v)

    out = io.StringIO()
    w = csv.writer(out, lineterminator="\n")
    w.writerow(WEATHER_HEADER)
    for o in observations:
        w.writerow([o.station_id, format_instant(o.timestamp),
                    cell(o.wind_avg), cell(o.wind_fastest_2min),
                    cell(o.precip), cell(o.snowfall), cell(o.snow_depth)])
    return out.getvalue().encode("utf-8")


# ---------------------------------------------------------------------------
# Stations
# ---------------------------------------------------------------------------

def parse_stations(csv_bytes: bytes) -> list[Station]:
    """Parse stations.csv; duplicate station ids are fatal."""
    rows = _reader(csv_bytes)
    _check_header(next(rows, None), STATIONS_HEADER, "stations.csv")

    stations: list[Station] = []
    seen: set[str] = set()
    for line_no, row in enumerate(rows, start=2):
        if not row:
            continue
        if len(row) != len(STATIONS_HEADER):
            raise SchemaError(f"stations.csv line {line_no}: expected "
                                  f"{len(STATIONS_HEADER)} columns, got {len(row)}")
        station_id = row[0].strip()
        lat = _parse_float(row[1])
        lon = _parse_float(row[2])
        caps_raw = [c.strip().lower() for c in row[3].split(";") if c.strip()]
        if not station_id or lat is None or lon is None:
            raise SchemaError(f"stations.csv line {line_no}: missing or "
                                  f"unparseable station fields")
        if station_id in seen:
            raise SchemaError(f"stations.csv: duplicate station_id {station_id!r}")
        seen.add(station_id)
        unknown = [c for c in caps_raw if c not in KNOWN_CAPABILITIES]
        if unknown:
            raise SchemaError(
                f"stations.csv line {line_no}: unknown capability {unknown[0]!r}")
        if not caps_raw:
            raise SchemaError(
                f"stations.csv line {line_no}: station {station_id!r} has no capabilities")
        stations.append(Station(station_id, lat, lon, frozenset(caps_raw)))

    for capability in sorted(KNOWN_CAPABILITIES):
        if not any(capability in s.capabilities for s in stations):
            log.warning("stations.csv: no station with capability %r", capability)
    return stations


def write_stations_csv(stations: list[Station]) -> bytes:
    out = io.StringIO()
    w = csv.writer(out, lineterminator="\n")
    w.writerow(STATIONS_HEADER)
    for s in stations:
        caps = ";".join(sorted(s.capabilities))
        w.writerow([s.station_id, repr(s.latitude), repr(s.longitude), caps])
    return out.getvalue().encode("utf-8")


# ---------------------------------------------------------------------------
# Severe weather records
# ---------------------------------------------------------------------------

def parse_severe(csv_bytes: bytes) -> tuple[list[SevereWeatherRecord], CleaningReport]:
    """Parse severe_events.csv; output sorted by start instant.

    Unknown event_type labels are kept: hazard classification happens
    downstream.
    """
    rows = _reader(csv_bytes)
    _check_header(next(rows, None), SEVERE_HEADER, "severe_events.csv")

    report = CleaningReport()
    kept: list[SevereWeatherRecord] = []
    for line_no, row in enumerate(rows, start=2):
        if not row:
            continue
        report.total_rows += 1
        row_id = row[0].strip() if row and row[0].strip() else f"row{line_no}"

        if len(row) != len(SEVERE_HEADER):
            report.drop("missing_field", row_id)
            continue
        event_id, event_type = row[0].strip(), row[1].strip()
        start = parse_instant(row[2])
        end = parse_instant(row[3])
        lat = _parse_float(row[4])
        lon = _parse_float(row[5])
        description = row[6]
        if not event_id or not event_type or start is None or end is None \
                or lat is None or lon is None:
            report.drop("missing_field", row_id)
            continue
        if start >= end:
            report.drop("inconsistent_time", row_id)
            continue
        if not -90.0 <= lat <= 90.0 or not -180.0 <= lon <= 180.0:
            report.drop("out_of_bounds", row_id)
            continue
        report.kept += 1
        kept.append(SevereWeatherRecord(event_id, event_type, start, end,
                                        lat, lon, description))
    report.check()
    kept.sort(key=lambda r: (r.start, r.event_id))
    return kept, report


def write_severe_csv(records: list[SevereWeatherRecord]) -> bytes:
    out = io.StringIO()
    w = csv.writer(out, lineterminator="\n")
    w.writerow(SEVERE_HEADER)
    for r in records:
        w.writerow([r.event_id, r.event_type, format_instant(r.start),
                    format_instant(r.end), repr(r.latitude), repr(r.longitude),
                    r.description])
    return out.getvalue().encode("utf-8")
