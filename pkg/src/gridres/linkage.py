"""Link severe-weather records to zones, station measurements, and outages.

The chain that turns agency hazard logs into fragility samples:

  classify  label each record wind / precipitation / excluded
  localize  assign the record's coordinates to a weather zone
  merge     union overlapping windows per zone so no outage counts twice
  intensity look up the zone station's measurements over the window
  count     count outages starting inside the window in that zone

Severe records carry no numeric magnitude, so intensity always comes from
the zone's own station: the max fastest-2-minute wind speed for wind
events, cumulative liquid-equivalent depth (precip + snowfall) for
precipitation events. Observation rows are hour-stamped while event starts
are minute-stamped, so the measurement range extends one hour before the
window start.

A window whose station has no usable observations is dropped with a logged
reason; it is never silently scored zero. Zero-outage windows are kept:
without them fragility curves bow upward at low intensity.
"""

from __future__ import annotations

import csv
import io
import logging
from bisect import bisect_left, bisect_right
from dataclasses import dataclass
from datetime import datetime, timedelta

import numpy as np

from .ingest import OutageRecord, SevereWeatherRecord, WeatherObservation
from .zoning import (
    HAZARD_PRECIPITATION,
    HAZARD_WIND,
    ZonePartition,
    assign_index,
    assign_many,
    assign_zone_flagged,
)

log = logging.getLogger(__name__)

HAZARD_EXCLUDED = "excluded"

DEFAULT_HAZARD_MAPPING: dict[str, str] = {
    "tornado": HAZARD_WIND,
    "high wind": HAZARD_WIND,
    "flood": HAZARD_PRECIPITATION,
    "heavy snow": HAZARD_PRECIPITATION,
    "snowstorm": HAZARD_PRECIPITATION,
}

PRECIP_MODE_CUMULATIVE = "cumulative"
PRECIP_MODE_PEAK = "peak"

# hour-stamped observations cover minute-stamped window starts
INTENSITY_LOOKBACK = timedelta(hours=1)


@dataclass(frozen=True)
class MergedWindow:
    start: datetime
    end: datetime
    source_event_ids: tuple[str, ...]


@dataclass(frozen=True)
class IntensityResult:
    value: float
    n_obs: int         # observations in [start - 1h, end]
    n_with_field: int  # of those, rows carrying the needed measurement
    coverage: float    # n_with_field / n_obs
    max_snow_depth: float | None


@dataclass(frozen=True)
class FragilitySample:
    zone_id: str
    window_start: datetime
    window_end: datetime
    intensity: float
    outage_count: int
    source_event_ids: tuple[str, ...]


# ---------------------------------------------------------------------------
# Classification and localization
# ---------------------------------------------------------------------------

def classify_hazard(
    record: SevereWeatherRecord, mapping: dict[str, str] | None = None,
) -> str:
    """Map an event_type label to wind / precipitation / excluded.

    Lookup is case-insensitive; labels absent from the mapping are excluded.
    """
    mapping = DEFAULT_HAZARD_MAPPING if mapping is None else mapping
    return mapping.get(record.event_type.strip().lower(), HAZARD_EXCLUDED)


def localize(record: SevereWeatherRecord, partition: ZonePartition) -> str:
    """Zone containing the record's coordinates (nearest station even when
    the point falls outside the service boundary)."""
    zone_id, inside = assign_zone_flagged(
        partition, (record.longitude, record.latitude))
    if not inside:
        log.debug("severe record %s lies outside the service boundary; "
                  "assigned to %s", record.event_id, zone_id)
    return zone_id


# ---------------------------------------------------------------------------
# Window merging
# ---------------------------------------------------------------------------

def merge_windows(records: list[SevereWeatherRecord]) -> list[MergedWindow]:
    """Union overlapping or touching closed [start, end] windows.

    Records must already share a zone and hazard class. Output is
    chronological; each merged window carries every source event id.
    """
    ordered = sorted(records, key=lambda r: (r.start, r.event_id))
    merged: list[MergedWindow] = []
    for rec in ordered:
        if merged and rec.start <= merged[-1].end:
            prev = merged[-1]
            merged[-1] = MergedWindow(
                start=prev.start,
                end=max(prev.end, rec.end),
                source_event_ids=prev.source_event_ids + (rec.event_id,),
            )
        else:
            merged.append(MergedWindow(rec.start, rec.end, (rec.event_id,)))
    return merged


# ---------------------------------------------------------------------------
# Intensity lookup
# ---------------------------------------------------------------------------

class StationIndex:
    """Per-station observation lists sorted by timestamp, for range lookup."""

    def __init__(self, observations: list[WeatherObservation]):
        self._by_station: dict[str, list[WeatherObservation]] = {}
        for obs in observations:
            self._by_station.setdefault(obs.station_id, []).append(obs)
        self._times: dict[str, list[datetime]] = {}
        for station_id, rows in self._by_station.items():
            rows.sort(key=lambda o: o.timestamp)
            self._times[station_id] = [o.timestamp for o in rows]

    def in_range(self, station_id: str, start: datetime, end: datetime,
                 ) -> list[WeatherObservation]:
        rows = self._by_station.get(station_id)
        if not rows:
            return []
        times = self._times[station_id]
        lo = bisect_left(times, start)
        hi = bisect_right(times, end)
        return rows[lo:hi]


def intensity(
    observations: list[WeatherObservation] | StationIndex,
    station_id: str,
    window: tuple[datetime, datetime],
    hazard_class: str,
    precip_mode: str = PRECIP_MODE_CUMULATIVE,
) -> IntensityResult | None:
    """Measured intensity over [window.start - 1h, window.end].

    Returns None when the station has no usable rows in range; callers must
    drop the sample and say why.
    """
    start, end = window
    lo = start - INTENSITY_LOOKBACK
    if isinstance(observations, StationIndex):
        rows = observations.in_range(station_id, lo, end)
    else:
        rows = [o for o in observations
                if o.station_id == station_id and lo <= o.timestamp <= end]
    if not rows:
        return None

    snow_depths = [o.snow_depth for o in rows if o.snow_depth is not None]
    max_snow_depth = max(snow_depths) if snow_depths else None

    if hazard_class == HAZARD_WIND:
        present = [o.wind_fastest_2min for o in rows
                   if o.wind_fastest_2min is not None]
        if not present:
            return None
        value = max(present)
    elif hazard_class == HAZARD_PRECIPITATION:
        contributions = [
            (o.precip or 0.0) + (o.snowfall or 0.0)
            for o in rows
            if o.precip is not None or o.snowfall is not None
        ]
        if not contributions:
            return None
        present = contributions
        value = sum(contributions) if precip_mode == PRECIP_MODE_CUMULATIVE \
            else max(contributions)
    else:
        raise ValueError(f"no intensity definition for hazard class {hazard_class!r}")

    return IntensityResult(
        value=value,
        n_obs=len(rows),
        n_with_field=len(present),
        coverage=len(present) / len(rows),
        max_snow_depth=max_snow_depth,
    )


# ---------------------------------------------------------------------------
# Outage counting and sample assembly
# ---------------------------------------------------------------------------

def count_outages(
    outages: list[OutageRecord],
    window: tuple[datetime, datetime],
    zone_id: str,
    partition: ZonePartition,
) -> int:
    """Outages whose start instant falls in the closed window and whose
    location assigns to zone_id. Membership is start-based: restorations
    may run long past the hazard."""
    start, end = window
    count = 0
    for rec in outages:
        if start <= rec.start <= end:
            idx = assign_index(partition, rec.longitude, rec.latitude)
            if partition.zones[idx].zone_id == zone_id:
                count += 1
    return count


def build_fragility_samples(
    severe: list[SevereWeatherRecord],
    partitions: dict[str, ZonePartition],
    observations: list[WeatherObservation],
    outages: list[OutageRecord],
    mapping: dict[str, str] | None = None,
    precip_mode: str = PRECIP_MODE_CUMULATIVE,
) -> dict[str, dict[str, list[FragilitySample]]]:
    """Run the full linkage chain.

    Returns {hazard_class: {zone_id: [FragilitySample, ...]}} covering every
    zone of every supplied partition (empty lists included). Zone keys
    follow partition order; samples are chronological within a zone.
    """
    station_index = StationIndex(observations)
    n_outages = len(outages)
    if n_outages:
        out_lons = np.array([r.longitude for r in outages])
        out_lats = np.array([r.latitude for r in outages])
        out_starts = np.array(
            [int(r.start.timestamp()) for r in outages], dtype=np.int64)

    excluded = 0
    by_class: dict[str, list[SevereWeatherRecord]] = {}
    for rec in severe:
        hazard = classify_hazard(rec, mapping)
        if hazard == HAZARD_EXCLUDED:
            excluded += 1
            continue
        by_class.setdefault(hazard, []).append(rec)
    if excluded:
        log.info("linkage: %d severe record(s) excluded by classification", excluded)

    result: dict[str, dict[str, list[FragilitySample]]] = {}
    for hazard_class, partition in partitions.items():
        records = by_class.get(hazard_class, [])
        per_zone: dict[str, list[SevereWeatherRecord]] = \
            {z.zone_id: [] for z in partition.zones}
        if records:
            lons = np.array([r.longitude for r in records])
            lats = np.array([r.latitude for r in records])
            for rec, zi in zip(records, assign_many(partition, lons, lats)):
                per_zone[partition.zones[zi].zone_id].append(rec)

        if n_outages:
            out_zone = assign_many(partition, out_lons, out_lats)
        samples_by_zone: dict[str, list[FragilitySample]] = {}
        for zi, zone in enumerate(partition.zones):
            samples: list[FragilitySample] = []
            for window in merge_windows(per_zone[zone.zone_id]):
                measured = intensity(
                    station_index, zone.station_id,
                    (window.start, window.end), hazard_class, precip_mode)
                if measured is None:
                    log.warning(
                        "linkage: dropping window %s..%s in %s: station %s has "
                        "no usable observations in range",
                        window.start.isoformat(), window.end.isoformat(),
                        zone.zone_id, zone.station_id)
                    continue
                if n_outages:
                    lo = int(window.start.timestamp())
                    hi = int(window.end.timestamp())
                    mask = ((out_starts >= lo) & (out_starts <= hi)
                            & (out_zone == zi))
                    count = int(mask.sum())
                else:
                    count = 0
                samples.append(FragilitySample(
                    zone_id=zone.zone_id,
                    window_start=window.start,
                    window_end=window.end,
                    intensity=measured.value,
                    outage_count=count,
                    source_event_ids=window.source_event_ids,
                ))
            samples_by_zone[zone.zone_id] = samples
        result[hazard_class] = samples_by_zone
    return result


def fragility_csv(samples_by_zone: dict[str, list[FragilitySample]]) -> bytes:
    from .ingest import format_instant

    out = io.StringIO()
    w = csv.writer(out, lineterminator="\n")
    w.writerow(["zone_id", "window_start", "window_end", "intensity",
                "outage_count", "source_event_ids"])
    for zone_id, samples in samples_by_zone.items():
        for s in samples:
            w.writerow([zone_id, format_instant(s.window_start),
                        format_instant(s.window_end), repr(s.intensity),
                        s.outage_count, ";".join(s.source_event_ids)])
    return out.getvalue().encode("utf-8")
