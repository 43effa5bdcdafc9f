"""Pipeline configuration: one JSON file, strict schema.

Every knob has a default, so a missing config file means "defaults
everywhere". Unknown keys are rejected rather than ignored; a typo that
silently falls back to a default is the worst kind of configuration bug.
Environment variables deliberately override nothing.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

from .errors import ValidationError
from .fitting import SolverOptions
from .ingest import DEFAULT_MAX_CUSTOMERS, DEFAULT_MAX_OUTAGE_DAYS
from .linkage import (
    DEFAULT_HAZARD_MAPPING,
    HAZARD_EXCLUDED,
    PRECIP_MODE_CUMULATIVE,
    PRECIP_MODE_PEAK,
)
from .scenario import ScenarioSpec
from .zoning import HAZARD_CLASSES, HAZARD_PRECIPITATION, HAZARD_WIND


def canonical_hazard(token: str) -> str:
    """Resolve CLI/config hazard tokens; "precip" is accepted shorthand."""
    token = token.strip().lower()
    if token == HAZARD_WIND:
        return HAZARD_WIND
    if token in (HAZARD_PRECIPITATION, "precip"):
        return HAZARD_PRECIPITATION
    raise ValidationError(f"unknown hazard class {token!r}; "
                          f"expected wind or precip")


@dataclass
class Config:
    max_outage_days: float = DEFAULT_MAX_OUTAGE_DAYS
    max_customers: int = DEFAULT_MAX_CUSTOMERS
    hazard_mapping: dict[str, str] = field(
        default_factory=lambda: dict(DEFAULT_HAZARD_MAPPING))
    precip_intensity_mode: str = PRECIP_MODE_CUMULATIVE
    solver: SolverOptions = field(default_factory=SolverOptions)
    boundary_path: str | None = None
    density_cell_size: float = 0.02
    scenarios: list[ScenarioSpec] = field(default_factory=list)


_TOP_KEYS = {"max_outage_days", "max_customers", "hazard_mapping",
             "precip_intensity_mode", "solver", "boundary_path",
             "density_cell_size", "scenarios"}
_SOLVER_KEYS = {"max_iterations", "gradient_tol", "step_tol", "initial_damping"}
_SCENARIO_KEYS = {"hazard", "intensity", "label"}


def parse_config(text: str) -> Config:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ValidationError(f"config is not valid JSON: {exc}") from exc
    if not isinstance(doc, dict):
        raise ValidationError("config must be a JSON object")

    unknown = sorted(set(doc) - _TOP_KEYS)
    if unknown:
        raise ValidationError(f"unknown config key(s): {', '.join(unknown)}")

    cfg = Config()
    if "max_outage_days" in doc:
        cfg.max_outage_days = float(doc["max_outage_days"])
        if cfg.max_outage_days <= 0.0:
            raise ValidationError("max_outage_days must be positive")
    if "max_customers" in doc:
        cfg.max_customers = int(doc["max_customers"])
        if cfg.max_customers < 1:
            raise ValidationError("max_customers must be at least 1")
    if "hazard_mapping" in doc:
        mapping = doc["hazard_mapping"]
        if not isinstance(mapping, dict):
            raise ValidationError("hazard_mapping must be an object")
        out = {}
        valid = set(HAZARD_CLASSES) | {HAZARD_EXCLUDED}
        for label, hazard in mapping.items():
            if hazard not in valid:
                raise ValidationError(
                    f"hazard_mapping[{label!r}] must be one of "
                    f"{sorted(valid)}, got {hazard!r}")
            out[label.strip().lower()] = hazard
        cfg.hazard_mapping = out
    if "precip_intensity_mode" in doc:
        mode = doc["precip_intensity_mode"]
        if mode not in (PRECIP_MODE_CUMULATIVE, PRECIP_MODE_PEAK):
            raise ValidationError(
                f"precip_intensity_mode must be "
                f"{PRECIP_MODE_CUMULATIVE!r} or {PRECIP_MODE_PEAK!r}")
        cfg.precip_intensity_mode = mode
    if "solver" in doc:
        solver = doc["solver"]
        if not isinstance(solver, dict):
            raise ValidationError("solver must be an object")
        unknown = sorted(set(solver) - _SOLVER_KEYS)
        if unknown:
            raise ValidationError(f"unknown solver key(s): {', '.join(unknown)}")
        opts = {
            "max_iterations": int(solver.get("max_iterations", 200)),
            "gradient_tol": float(solver.get("gradient_tol", 1e-10)),
            "step_tol": float(solver.get("step_tol", 1e-12)),
            "initial_damping": float(solver.get("initial_damping", 1e-3)),
        }
        if opts["max_iterations"] < 1:
            raise ValidationError("solver.max_iterations must be at least 1")
        for key in ("gradient_tol", "step_tol", "initial_damping"):
            if opts[key] <= 0.0:
                raise ValidationError(f"solver.{key} must be positive")
        cfg.solver = SolverOptions(**opts)
    if "boundary_path" in doc:
        if doc["boundary_path"] is not None \
                and not isinstance(doc["boundary_path"], str):
            raise ValidationError("boundary_path must be a string")
        cfg.boundary_path = doc["boundary_path"]
    if "density_cell_size" in doc:
        cfg.density_cell_size = float(doc["density_cell_size"])
        if cfg.density_cell_size <= 0.0:
            raise ValidationError("density_cell_size must be positive")
    if "scenarios" in doc:
        if not isinstance(doc["scenarios"], list):
            raise ValidationError("scenarios must be an array")
        scenarios = []
        for i, entry in enumerate(doc["scenarios"]):
            if not isinstance(entry, dict):
                raise ValidationError(f"scenarios[{i}] must be an object")
            unknown = sorted(set(entry) - _SCENARIO_KEYS)
            if unknown:
                raise ValidationError(
                    f"unknown scenarios[{i}] key(s): {', '.join(unknown)}")
            if "hazard" not in entry or "intensity" not in entry:
                raise ValidationError(
                    f"scenarios[{i}] needs hazard and intensity")
            scenarios.append(ScenarioSpec(
                hazard_class=canonical_hazard(str(entry["hazard"])),
                intensity=float(entry["intensity"]),
                label=str(entry.get("label", "")),
            ))
        cfg.scenarios = scenarios
    return cfg


def load_config(path: str | Path | None) -> Config:
    if path is None:
        return Config()
    path = Path(path)
    if not path.exists():
        from .errors import MissingInputError
        raise MissingInputError(f"config file not found: {path}")
    return parse_config(path.read_text(encoding="utf-8"))
