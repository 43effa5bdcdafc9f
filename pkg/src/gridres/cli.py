"""Command-line pipeline driver.

Subcommands mirror the pipeline stages:

  synth           generate a seeded synthetic input bundle
  ingest          parse and clean the four input CSV files
  zones           build Voronoi weather zones and the outage-density grid
  extract-events  sweep outages into outage-restoration events
  link            build fragility samples from severe-weather records
  fit             fit per-zone fragility and restoration models
  predict         evaluate one weather scenario into CSV + choropleth
  render          draw scatter/curve SVG plots for every fitted model
  run-all         everything above except synth, plus a summary table

Every stage hashes its inputs into manifest.json and skips itself when
nothing changed (override with --force). Exit codes: 0 success, 1 internal
error, 2 missing input, 3 validation failure. Log lines go to stderr as
LEVEL<TAB>stage<TAB>message.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import sys
from pathlib import Path

from .config import Config, canonical_hazard, load_config
from .errors import (
    MissingInputError,
    PipelineError,
    ValidationError,
)
from .events import events_csv, extract_events, extract_events_by_zone
from .fitting import (
    KIND_FRAGILITY,
    KIND_RESTORATION,
    FitError,
    ModelStore,
    exponential_record,
    fit_exponential,
    fit_restoration,
    restoration_record,
)
from .ingest import (
    parse_outages,
    parse_severe,
    parse_stations,
    parse_weather,
    write_outages_csv,
    write_severe_csv,
    write_stations_csv,
    write_weather_csv,
)
from .linkage import build_fragility_samples, fragility_csv
from .scenario import (
    ScenarioSpec,
    choropleth_filename,
    emit_choropleth,
    emit_scatter,
    predict_all,
    predictions_csv,
)
from .synth import SynthSpec, generate
from .workspace import Workspace, sha256_bytes
from .zoning import (
    HAZARD_CLASSES,
    HAZARD_WIND,
    build_partition,
    density_grid,
    density_grid_csv,
    density_grid_meta_json,
    load_boundary_geojson,
    partition_to_geojson,
)

log = logging.getLogger(__name__)

_current_stage = "cli"

INPUTS = {
    "outages": "inputs/outages.csv",
    "weather": "inputs/weather.csv",
    "stations": "inputs/stations.csv",
    "severe": "inputs/severe_events.csv",
}
CLEAN = {
    "outages": "clean_outages.csv",
    "weather": "clean_weather.csv",
    "stations": "clean_stations.csv",
    "severe": "clean_severe.csv",
}
DEFAULT_BOUNDARY = "inputs/boundary.geojson"
DEFAULT_SYNTH_SEED = 20240811


class _TabFormatter(logging.Formatter):
    def format(self, record: logging.LogRecord) -> str:
        return f"{record.levelname}\t{_current_stage}\t{record.getMessage()}"


def _setup_logging() -> None:
    handler = logging.StreamHandler(sys.stderr)
    handler.setFormatter(_TabFormatter())
    root = logging.getLogger()
    root.handlers[:] = [handler]
    root.setLevel(logging.INFO)


def _set_stage(name: str) -> None:
    global _current_stage
    _current_stage = name


def _boundary_path(ws: Workspace, cfg: Config) -> Path:
    if cfg.boundary_path is None:
        return ws.path(DEFAULT_BOUNDARY)
    p = Path(cfg.boundary_path)
    return p if p.is_absolute() else ws.path(cfg.boundary_path)


def _load_partitions(ws: Workspace, cfg: Config) -> dict:
    stations = parse_stations(ws.read_bytes(CLEAN["stations"]))
    boundary_file = _boundary_path(ws, cfg)
    if not boundary_file.exists():
        raise MissingInputError(str(boundary_file))
    boundary = load_boundary_geojson(boundary_file.read_text(encoding="utf-8"))
    partitions = {}
    for hazard_class in HAZARD_CLASSES:
        if any(hazard_class in s.capabilities for s in stations):
            partitions[hazard_class] = build_partition(
                stations, hazard_class, boundary)
        else:
            log.warning("no %s-capable stations; skipping that partition",
                        hazard_class)
    return partitions


def _zone_sort_key(zone_id: str):
    hazard_class, _, index = zone_id.partition(":")
    return (hazard_class, int(index)) if index.isdigit() else (hazard_class, -1)


# ---------------------------------------------------------------------------
# Stages
# ---------------------------------------------------------------------------

def stage_synth(ws: Workspace, seed: int, force: bool) -> str:
    stage = f"synth_{seed}"
    hashes = {"__seed__": sha256_bytes(str(seed).encode())}
    if not force and ws.stage_fresh(stage, hashes):
        log.info("outputs up to date, skipping")
        return "up to date"
    bundle = generate(SynthSpec(seed=seed))
    outputs = []
    for name, data in bundle.items():
        relative = "truth.json" if name == "truth.json" else f"inputs/{name}"
        ws.write_bytes(relative, data)
        outputs.append(relative)
    ws.record_stage(stage, hashes, outputs)
    n_outages = bundle["outages.csv"].count(b"\n") - 1
    n_weather = bundle["weather.csv"].count(b"\n") - 1
    detail = f"{n_outages} outages, {n_weather} weather rows, seed {seed}"
    log.info("wrote synthetic bundle: %s", detail)
    return detail


def stage_ingest(ws: Workspace, cfg: Config, cfg_digest: str, force: bool) -> str:
    hashes = ws.hash_inputs({k: ws.path(v) for k, v in INPUTS.items()})
    hashes["__config__"] = cfg_digest
    if not force and ws.stage_fresh("ingest", hashes):
        log.info("outputs up to date, skipping")
        return "up to date"

    outages, outage_report = parse_outages(
        ws.read_bytes(INPUTS["outages"]),
        max_outage_days=cfg.max_outage_days,
        max_customers=cfg.max_customers)
    weather, weather_report = parse_weather(ws.read_bytes(INPUTS["weather"]))
    stations = parse_stations(ws.read_bytes(INPUTS["stations"]))
    severe, severe_report = parse_severe(ws.read_bytes(INPUTS["severe"]))

    ws.write_bytes(CLEAN["outages"], write_outages_csv(outages))
    ws.write_text("report_outages.json", outage_report.to_json())
    ws.write_bytes(CLEAN["weather"], write_weather_csv(weather))
    ws.write_text("report_weather.json", weather_report.to_json())
    ws.write_bytes(CLEAN["stations"], write_stations_csv(stations))
    ws.write_bytes(CLEAN["severe"], write_severe_csv(severe))
    ws.write_text("report_severe.json", severe_report.to_json())

    ws.record_stage("ingest", hashes, [
        CLEAN["outages"], "report_outages.json",
        CLEAN["weather"], "report_weather.json",
        CLEAN["stations"], CLEAN["severe"], "report_severe.json",
    ])
    detail = (f"outages {outage_report.kept}/{outage_report.total_rows}, "
              f"weather {weather_report.kept}/{weather_report.total_rows}, "
              f"severe {severe_report.kept}/{severe_report.total_rows}, "
              f"{len(stations)} stations")
    log.info("kept %s", detail)
    return detail


def stage_zones(ws: Workspace, cfg: Config, cfg_digest: str, force: bool) -> str:
    inputs = {
        "stations": ws.require(CLEAN["stations"]),
        "outages": ws.require(CLEAN["outages"]),
        "boundary": _boundary_path(ws, cfg),
    }
    hashes = ws.hash_inputs(inputs)
    hashes["__config__"] = cfg_digest
    if not force and ws.stage_fresh("zones", hashes):
        log.info("outputs up to date, skipping")
        return "up to date"

    partitions = _load_partitions(ws, cfg)
    outputs = []
    counts = []
    for hazard_class, partition in partitions.items():
        relative = f"zones_{hazard_class}.geojson"
        ws.write_text(relative, partition_to_geojson(partition))
        outputs.append(relative)
        counts.append(f"{len(partition.zones)} {hazard_class}")

    outage_records, _ = parse_outages(ws.read_bytes(CLEAN["outages"]))
    boundary = load_boundary_geojson(
        _boundary_path(ws, cfg).read_text(encoding="utf-8"))
    lons = [lon for lon, _ in boundary]
    lats = [lat for _, lat in boundary]
    grid = density_grid(
        [(r.longitude, r.latitude) for r in outage_records],
        (min(lons), min(lats), max(lons), max(lats)),
        cfg.density_cell_size)
    ws.write_bytes("density.csv", density_grid_csv(grid))
    ws.write_text("density.json", density_grid_meta_json(grid))
    outputs += ["density.csv", "density.json"]

    ws.record_stage("zones", hashes, outputs)
    detail = " + ".join(counts) + " zones" if counts else "no partitions"
    log.info("built %s", detail)
    return detail


def stage_extract_events(ws: Workspace, cfg: Config, cfg_digest: str,
                         force: bool) -> str:
    inputs = {
        "outages": ws.require(CLEAN["outages"]),
        "stations": ws.require(CLEAN["stations"]),
        "boundary": _boundary_path(ws, cfg),
    }
    hashes = ws.hash_inputs(inputs)
    hashes["__config__"] = cfg_digest
    if not force and ws.stage_fresh("extract-events", hashes):
        log.info("outputs up to date, skipping")
        return "up to date"

    outages, _ = parse_outages(ws.read_bytes(CLEAN["outages"]))
    global_events = extract_events(outages)
    ws.write_bytes("events_global.csv", events_csv(global_events))
    outputs = ["events_global.csv"]

    partitions = _load_partitions(ws, cfg)
    zone_totals = []
    for hazard_class, partition in partitions.items():
        by_zone = extract_events_by_zone(outages, partition)
        rows = []
        for zone in partition.zones:
            rows.extend(by_zone[zone.zone_id])
        relative = f"events_{hazard_class}.csv"
        ws.write_bytes(relative, events_csv(rows))
        outputs.append(relative)
        zone_totals.append(f"{len(rows)} {hazard_class}")

    ws.record_stage("extract-events", hashes, outputs)
    detail = f"{len(global_events)} global events"
    if zone_totals:
        detail += "; per-zone " + ", ".join(zone_totals)
    log.info("extracted %s", detail)
    return detail


def stage_link(ws: Workspace, cfg: Config, cfg_digest: str, force: bool) -> str:
    inputs = {
        "severe": ws.require(CLEAN["severe"]),
        "weather": ws.require(CLEAN["weather"]),
        "outages": ws.require(CLEAN["outages"]),
        "stations": ws.require(CLEAN["stations"]),
        "boundary": _boundary_path(ws, cfg),
    }
    hashes = ws.hash_inputs(inputs)
    hashes["__config__"] = cfg_digest
    if not force and ws.stage_fresh("link", hashes):
        log.info("outputs up to date, skipping")
        return "up to date"

    severe, _ = parse_severe(ws.read_bytes(CLEAN["severe"]))
    weather, _ = parse_weather(ws.read_bytes(CLEAN["weather"]))
    outages, _ = parse_outages(ws.read_bytes(CLEAN["outages"]))
    partitions = _load_partitions(ws, cfg)

    samples = build_fragility_samples(
        severe, partitions, weather, outages,
        mapping=cfg.hazard_mapping, precip_mode=cfg.precip_intensity_mode)

    outputs = []
    counts = []
    for hazard_class in partitions:
        relative = f"fragility_{hazard_class}.csv"
        ws.write_bytes(relative, fragility_csv(samples[hazard_class]))
        outputs.append(relative)
        n = sum(len(v) for v in samples[hazard_class].values())
        counts.append(f"{n} {hazard_class}")
    ws.record_stage("link", hashes, outputs)
    detail = ", ".join(counts) + " samples" if counts else "no partitions"
    log.info("linked %s", detail)
    return detail


def _read_fragility_samples(data: bytes) -> dict[str, list[tuple[float, float]]]:
    samples: dict[str, list[tuple[float, float]]] = {}
    for row in csv.DictReader(io.StringIO(data.decode("utf-8"))):
        samples.setdefault(row["zone_id"], []).append(
            (float(row["intensity"]), float(row["outage_count"])))
    return samples


def _read_event_samples(data: bytes) -> dict[str, list[tuple[float, float]]]:
    samples: dict[str, list[tuple[float, float]]] = {}
    for row in csv.DictReader(io.StringIO(data.decode("utf-8"))):
        samples.setdefault(row["zone_id"], []).append(
            (float(row["n_outages"]), float(row["total_restoration_hours"])))
    return samples


def stage_fit(ws: Workspace, cfg: Config, cfg_digest: str, force: bool) -> str:
    classes = [c for c in HAZARD_CLASSES if ws.path(f"events_{c}.csv").exists()]
    if not classes:
        raise MissingInputError(str(ws.path(f"events_{HAZARD_WIND}.csv")))
    inputs = {}
    for hazard_class in classes:
        inputs[f"events_{hazard_class}"] = ws.require(f"events_{hazard_class}.csv")
        frag = ws.path(f"fragility_{hazard_class}.csv")
        if frag.exists():
            inputs[f"fragility_{hazard_class}"] = frag
    hashes = ws.hash_inputs(inputs)
    hashes["__config__"] = cfg_digest
    if not force and ws.stage_fresh("fit", hashes):
        log.info("outputs up to date, skipping")
        return "up to date"

    outputs = []
    details = []
    for hazard_class in classes:
        event_samples = _read_event_samples(
            ws.read_bytes(f"events_{hazard_class}.csv"))
        frag_path = ws.path(f"fragility_{hazard_class}.csv")
        frag_samples = _read_fragility_samples(frag_path.read_bytes()) \
            if frag_path.exists() else {}

        zone_ids = sorted(set(event_samples) | set(frag_samples),
                          key=_zone_sort_key)
        store = ModelStore(hazard_class=hazard_class, zones={})
        n_frag = n_rest = 0
        for zone_id in zone_ids:
            records = {}
            samples = frag_samples.get(zone_id, [])
            if len(samples) < 3:
                log.warning("zone %s has %d fragility sample(s); skipping "
                            "fragility fit", zone_id, len(samples))
            else:
                try:
                    model, diag = fit_exponential(
                        samples, zone_id=zone_id, hazard_class=hazard_class,
                        opts=cfg.solver)
                except FitError as exc:
                    log.warning("fragility fit failed: %s", exc)
                else:
                    xs = [x for x, _ in samples]
                    records[KIND_FRAGILITY] = exponential_record(
                        model, diag, (min(xs), max(xs)))
                    n_frag += 1
                    if not diag.converged:
                        log.warning("fragility fit for %s did not converge "
                                    "(kept best of restarts)", zone_id)

            events = event_samples.get(zone_id, [])
            if len(events) < 6:
                log.warning("zone %s has %d event(s); skipping restoration "
                            "fit", zone_id, len(events))
            else:
                try:
                    model, diag = fit_restoration(
                        events, zone_id=zone_id, opts=cfg.solver)
                except FitError as exc:
                    log.warning("restoration fit failed: %s", exc)
                else:
                    xs = [x for x, _ in events]
                    records[KIND_RESTORATION] = restoration_record(
                        model, diag, (min(xs), max(xs)))
                    n_rest += 1
                    if not diag.converged:
                        log.warning("restoration fit for %s did not converge "
                                    "(kept best of restarts)", zone_id)
            if records:
                store.zones[zone_id] = records

        relative = f"models_{hazard_class}.json"
        ws.write_text(relative, store.to_json())
        outputs.append(relative)
        details.append(f"{hazard_class}: {n_frag} fragility, {n_rest} restoration")

    ws.record_stage("fit", hashes, outputs)
    detail = "; ".join(details)
    log.info("fitted %s", detail)
    return detail


def stage_predict(ws: Workspace, cfg: Config, cfg_digest: str, force: bool,
                  scenario: ScenarioSpec) -> str:
    hazard_class = scenario.hazard_class
    stage = f"predict_{hazard_class}_{scenario.intensity:g}"
    inputs = {
        "models": ws.require(f"models_{hazard_class}.json"),
        "stations": ws.require(CLEAN["stations"]),
        "boundary": _boundary_path(ws, cfg),
    }
    hashes = ws.hash_inputs(inputs)
    hashes["__config__"] = cfg_digest
    if not force and ws.stage_fresh(stage, hashes):
        log.info("outputs up to date, skipping")
        return "up to date"

    store = ModelStore.from_json(
        ws.read_bytes(f"models_{hazard_class}.json").decode("utf-8"))
    partitions = _load_partitions(ws, cfg)
    if hazard_class not in partitions:
        raise ValidationError(
            f"no {hazard_class}-capable stations; cannot build the partition")
    partition = partitions[hazard_class]

    predictions = predict_all(store, partition, scenario)
    pred_rel = f"predictions_{hazard_class}_{scenario.intensity:g}.csv"
    ws.write_bytes(pred_rel, predictions_csv(scenario, predictions))
    choropleth_rel = choropleth_filename(scenario)
    ws.write_text(choropleth_rel,
                  emit_choropleth(partition, predictions, scenario))
    ws.record_stage(stage, hashes, [pred_rel, choropleth_rel])

    hours = [p.predicted_restoration_hours for p in predictions]
    detail = (f"{hazard_class}@{scenario.intensity:g}: {len(predictions)} "
              f"zones, {min(hours):.1f}-{max(hours):.1f} h")
    for p in predictions:
        log.info("%s: %.1f outages, %.1f h%s", p.zone_id, p.predicted_outages,
                 p.predicted_restoration_hours,
                 " (extrapolated)" if p.extrapolated else "")
    return detail


def stage_render(ws: Workspace, cfg: Config, cfg_digest: str, force: bool) -> str:
    classes = [c for c in HAZARD_CLASSES
               if ws.path(f"models_{c}.json").exists()]
    if not classes:
        raise MissingInputError(str(ws.path(f"models_{HAZARD_WIND}.json")))
    inputs = {}
    for hazard_class in classes:
        inputs[f"models_{hazard_class}"] = ws.path(f"models_{hazard_class}.json")
        for prefix in ("fragility", "events"):
            p = ws.path(f"{prefix}_{hazard_class}.csv")
            if p.exists():
                inputs[f"{prefix}_{hazard_class}"] = p
    hashes = ws.hash_inputs(inputs)
    hashes["__config__"] = cfg_digest
    if not force and ws.stage_fresh("render", hashes):
        log.info("outputs up to date, skipping")
        return "up to date"

    x_labels = {HAZARD_WIND: "wind speed (m/s)",
                "precipitation": "precipitation depth (in)"}
    outputs = []
    for hazard_class in classes:
        store = ModelStore.from_json(
            ws.read_bytes(f"models_{hazard_class}.json").decode("utf-8"))
        frag_path = ws.path(f"fragility_{hazard_class}.csv")
        frag_samples = _read_fragility_samples(frag_path.read_bytes()) \
            if frag_path.exists() else {}
        event_path = ws.path(f"events_{hazard_class}.csv")
        event_samples = _read_event_samples(event_path.read_bytes()) \
            if event_path.exists() else {}

        for zone_id in sorted(store.zones, key=_zone_sort_key):
            safe = zone_id.replace(":", "_")
            kinds = store.zones[zone_id]
            if KIND_FRAGILITY in kinds:
                rec = kinds[KIND_FRAGILITY]
                svg = emit_scatter(
                    frag_samples.get(zone_id, []), rec.to_model(zone_id),
                    x_labels[hazard_class], "outages",
                    title=f"{zone_id} fragility")
                relative = f"plots/fragility_{safe}.svg"
                ws.write_text(relative, svg)
                outputs.append(relative)
            if KIND_RESTORATION in kinds:
                rec = kinds[KIND_RESTORATION]
                svg = emit_scatter(
                    event_samples.get(zone_id, []), rec.to_model(zone_id),
                    "outages in event", "restoration hours",
                    title=f"{zone_id} restoration")
                relative = f"plots/restoration_{safe}.svg"
                ws.write_text(relative, svg)
                outputs.append(relative)

    ws.record_stage("render", hashes, outputs)
    detail = f"{len(outputs)} plot(s)"
    log.info("rendered %s", detail)
    return detail


# ---------------------------------------------------------------------------
# run-all
# ---------------------------------------------------------------------------

def _truth_comparison(ws: Workspace) -> str:
    truth = json.loads(ws.read_bytes("truth.json").decode("utf-8"))
    stores = {}
    for hazard_class in HAZARD_CLASSES:
        p = ws.path(f"models_{hazard_class}.json")
        if p.exists():
            stores[hazard_class] = ModelStore.from_json(
                p.read_text(encoding="utf-8"))

    zones_doc = {}
    b_errors = []
    c_errors = []
    for zone_id, zone_truth in sorted(truth["zones"].items()):
        hazard_class = zone_truth["hazard_class"]
        store = stores.get(hazard_class)
        entry: dict = {}
        fragility = store.zones.get(zone_id, {}).get(KIND_FRAGILITY) \
            if store else None
        if fragility is not None:
            true_b = zone_truth["fragility"]["b"]
            fitted_b = fragility.params["b"]
            rel = abs(fitted_b - true_b) / abs(true_b)
            entry["fragility_b"] = {"true": true_b, "fitted": fitted_b,
                                    "rel_error": rel}
            b_errors.append(rel)
        restoration = store.zones.get(zone_id, {}).get(KIND_RESTORATION) \
            if store else None
        if restoration is not None:
            true_c = zone_truth["restoration"]["c"]
            fitted_c = restoration.params["c"]
            rel = abs(fitted_c - true_c) / abs(true_c)
            entry["restoration_c"] = {"true": true_c, "fitted": fitted_c,
                                      "rel_error": rel}
            c_errors.append(rel)
        zones_doc[zone_id] = entry

    doc = {
        "zones": zones_doc,
        "max_fragility_b_rel_error": max(b_errors) if b_errors else None,
        "max_restoration_c_rel_error": max(c_errors) if c_errors else None,
    }
    ws.write_text("truth_comparison.json",
                  json.dumps(doc, sort_keys=True, indent=2) + "\n")
    parts = []
    if b_errors:
        parts.append(f"max b error {max(b_errors) * 100.0:.1f}%")
    if c_errors:
        parts.append(f"max c error {max(c_errors) * 100.0:.1f}%")
    return ", ".join(parts) if parts else "no fitted models to compare"


def run_all(ws: Workspace, cfg: Config, cfg_digest: str, force: bool) -> int:
    rows: list[tuple[str, str, str]] = []

    stages = [
        ("ingest", lambda: stage_ingest(ws, cfg, cfg_digest, force)),
        ("zones", lambda: stage_zones(ws, cfg, cfg_digest, force)),
        ("extract-events",
         lambda: stage_extract_events(ws, cfg, cfg_digest, force)),
        ("link", lambda: stage_link(ws, cfg, cfg_digest, force)),
        ("fit", lambda: stage_fit(ws, cfg, cfg_digest, force)),
    ]
    for name, fn in stages:
        _set_stage(name)
        rows.append((name, "ok", fn()))

    for scenario in cfg.scenarios:
        name = f"predict {scenario.hazard_class}@{scenario.intensity:g}"
        _set_stage("predict")
        store_path = ws.path(f"models_{scenario.hazard_class}.json")
        missing = None
        if not store_path.exists():
            missing = f"no models for {scenario.hazard_class}"
        else:
            store = ModelStore.from_json(store_path.read_text(encoding="utf-8"))
            incomplete = [
                zone_id for zone_id, kinds in store.zones.items()
                if KIND_FRAGILITY not in kinds or KIND_RESTORATION not in kinds]
            if not store.zones:
                missing = "model store is empty"
            elif incomplete:
                missing = ("incomplete models for "
                           + ", ".join(sorted(incomplete, key=_zone_sort_key)))
        if missing:
            log.warning("skipping scenario %s: %s", name, missing)
            rows.append((name, "skipped", missing))
            continue
        rows.append((name, "ok",
                     stage_predict(ws, cfg, cfg_digest, force, scenario)))

    _set_stage("run-all")
    if ws.path("truth.json").exists():
        rows.append(("truth-comparison", "ok", _truth_comparison(ws)))

    print(f"{'stage':<28}{'status':<10}detail")
    for name, status, detail in rows:
        print(f"{name:<28}{status:<10}{detail}")
    return 0


# ---------------------------------------------------------------------------
# Entry point
# ---------------------------------------------------------------------------

def _build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--workspace", default="workspace",
                        help="workspace directory (default: ./workspace)")
    common.add_argument("--config", default=None,
                        help="path to a JSON config file")
    common.add_argument("--force", action="store_true",
                        help="rerun even when outputs are up to date")

    parser = argparse.ArgumentParser(
        prog="gridres",
        description="Zone-level outage fragility and restoration analytics.")
    sub = parser.add_subparsers(dest="command", required=True)

    sub.add_parser("synth", parents=[common],
                   help="generate a seeded synthetic input bundle") \
        .add_argument("--seed", type=int, default=DEFAULT_SYNTH_SEED)
    sub.add_parser("ingest", parents=[common],
                   help="parse and clean the input CSV files")
    sub.add_parser("zones", parents=[common],
                   help="build weather zones and the density grid")
    sub.add_parser("extract-events", parents=[common],
                   help="extract outage-restoration events")
    sub.add_parser("link", parents=[common],
                   help="build fragility samples from severe records")
    sub.add_parser("fit", parents=[common],
                   help="fit fragility and restoration models")
    predict = sub.add_parser("predict", parents=[common],
                             help="evaluate one weather scenario")
    predict.add_argument("--hazard", required=True,
                         help="wind or precip")
    predict.add_argument("--intensity", type=float, required=True,
                         help="m/s for wind, inches for precipitation")
    sub.add_parser("render", parents=[common],
                   help="render model scatter/curve SVG plots")
    sub.add_parser("run-all", parents=[common],
                   help="run the whole pipeline plus configured scenarios")
    return parser


def main(argv: list[str] | None = None) -> int:
    _setup_logging()
    args = _build_parser().parse_args(argv)
    _set_stage(args.command)

    try:
        ws = Workspace(args.workspace)
        cfg = load_config(args.config)
        if args.config is not None:
            cfg_digest = sha256_bytes(Path(args.config).read_bytes())
        else:
            cfg_digest = sha256_bytes(b"default-config")

        if args.command == "synth":
            stage_synth(ws, args.seed, args.force)
        elif args.command == "ingest":
            stage_ingest(ws, cfg, cfg_digest, args.force)
        elif args.command == "zones":
            stage_zones(ws, cfg, cfg_digest, args.force)
        elif args.command == "extract-events":
            stage_extract_events(ws, cfg, cfg_digest, args.force)
        elif args.command == "link":
            stage_link(ws, cfg, cfg_digest, args.force)
        elif args.command == "fit":
            stage_fit(ws, cfg, cfg_digest, args.force)
        elif args.command == "predict":
            scenario = ScenarioSpec(
                hazard_class=canonical_hazard(args.hazard),
                intensity=args.intensity)
            stage_predict(ws, cfg, cfg_digest, args.force, scenario)
        elif args.command == "render":
            stage_render(ws, cfg, cfg_digest, args.force)
        elif args.command == "run-all":
            return run_all(ws, cfg, cfg_digest, args.force)
        return 0
    except MissingInputError as exc:
        log.error("missing input: %s", exc)
        return 2
    except ValidationError as exc:
        log.error("%s", exc)
        return 3
    except PipelineError as exc:
        log.error("%s", exc)
        return 1
    except Exception as exc:  # noqa: BLE001 - last-resort exit-code mapping
        log.error("internal error: %s: %s", type(exc).__name__, exc)
        return 1


if __name__ == "__main__":
    sys.exit(main())
