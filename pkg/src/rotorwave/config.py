"""Run configuration documents: parsing, validation, defaults and sweep planning.

A configuration is a single JSON document.  Field names carry their units
(``box_length``, ``omega_per_time``, ``time_step``); potentials and packet
profiles use the dictionaries of :meth:`PotentialSpec.to_dict`.
"""

from __future__ import annotations

import copy
import itertools
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

from .grid import Grid, PhysParams
from .potentials import PotentialSpec
from .propagator import FRAMES, MAX_ROTATION_PER_STEP

EXPERIMENTS = (
    "blade",
    "domain-scaling",
    "condition-check",
    "wave-operator",
    "boundedness",
    "frame-consistency",
    "free-diagnostics",
    "bench",
)
DEFAULT_MAX_JOBS = 256


class ConfigError(ValueError):
    """Malformed or invalid configuration document."""


# Per-experiment defaults, merged under the user's ``params`` block.
EXPERIMENT_DEFAULTS: dict[str, dict[str, Any]] = {
    "blade": {
        "impact_parameter": 3.0,
        "speed": 20.0,
        "time_step": 1e-3,
        "horizons": None,
        "frame": "rotating",
        "profile": None,
        "tail_tolerance": 1e-8,
        "transmission_limit": 1e-4,
        "require_specular": True,
        "guard_tolerance": 1e-6,
        "snapshot_times": [],
    },
    "domain-scaling": {
        "indices": [4, 8, 12, 16, 24, 32],
        "profile": None,
    },
    "condition-check": {
        "condition": "C18",
        "radii": [10.0, 12.9, 16.7, 21.5, 27.8, 35.9, 46.4, 59.9, 77.4, 100.0],
        "band_momentum": 1.5,
        "probe_trials": 4,
        "probe_iterations": 60,
    },
    "wave-operator": {
        "direction": "minus",
        "horizon": 2.0,
        "doublings": 2,
        "time_step": 0.01,
        "frame": "rotating",
        "velocity": [2.0, 0.0],
        "profile": None,
        "tail_tolerance": 1e-8,
    },
    "boundedness": {
        "periods": 20,
        "time_step": 0.01,
        "samples": 200,
        "tail_factor": 4.0,
        "velocity": [1.0, 0.0],
        "profile": {"kind": "gaussian", "sigma_p": 0.35},
        "wave_operator_horizon": 6.0,
        "frame": "rotating",
    },
    "frame-consistency": {
        "duration": 2.0,
        "time_steps": [0.02, 0.01, 0.005],
        "initial_width": 2.0,
        "initial_center": [-2.0, 0.0],
        "initial_momentum": [1.0, 0.0],
    },
    "free-diagnostics": {
        "velocity": [4.0, 0.0],
        "times": [0.0, 0.5, 1.0, 1.5, 2.0],
        "radii": [2.0, 3.0, 4.0, 6.0, 8.0],
        "spreading_velocity": [0.5, 0.0],
        "spreading_sigma_p": 0.25,
        "spreading_times": [16.0, 24.0, 32.0, 48.0, 64.0],
        "profile": None,
    },
    "bench": {
        "grids": [128, 256, 512, 1024],
        "steps": 100,
        "warmup": 5,
        "box_length": 40.0,
        "omega_per_time": 0.3,
    },
}


@dataclass
class Job:
    """One point of a sweep: its position in the plan and the merged parameters."""

    index: int
    key: dict
    params: dict
    seed_entropy: int = 0
    spawn_key: tuple = ()


@dataclass
class RunConfig:
    experiment: str
    grid: Grid | None
    physics: PhysParams
    potential: PotentialSpec | None
    params: dict
    sweep: dict
    seed: int = 0
    output_dir: str = "rotorwave-output"
    max_jobs: int = DEFAULT_MAX_JOBS
    source: dict = field(default_factory=dict)

    def plan(self) -> list["Job"]:
        return plan_jobs(self)

    def echo(self) -> dict:
        """Fully resolved configuration as a JSON-compatible document."""
        out = {
            "experiment": self.experiment,
            "grid": None if self.grid is None else {"points_per_axis": self.grid.n, "box_length": self.grid.L},
            "physics": {"mass": self.physics.m, "omega_per_time": self.physics.omega},
            "potential": None if self.potential is None else self.potential.to_dict(),
            "params": copy.deepcopy(self.params),
            "sweep": copy.deepcopy(self.sweep),
            "seed": self.seed,
            "output_dir": self.output_dir,
            "max_jobs": self.max_jobs,
        }
        return out


def _parse_json(text: str, origin: str) -> dict:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{origin}: parse error at line {exc.lineno}, column {exc.colno}: {exc.msg}") from None
    if not isinstance(doc, dict):
        raise ConfigError(f"{origin}: top level must be an object")
    return doc


def _require_keys(block: dict, allowed: set, where: str):
    unknown = set(block) - allowed
    if unknown:
        raise ConfigError(f"{where}: unknown field(s) {sorted(unknown)}")


def _grid_from(block: Any) -> Grid | None:
    if block is None:
        return None
    if not isinstance(block, dict):
        raise ConfigError("grid must be an object")
    _require_keys(block, {"points_per_axis", "box_length"}, "grid")
    try:
        return Grid(int(block["points_per_axis"]), float(block["box_length"]))
    except KeyError as exc:
        raise ConfigError(f"grid: missing field {exc.args[0]!r}") from None
    except ValueError as exc:
        raise ConfigError(f"grid: {exc}") from None


def _physics_from(block: Any) -> PhysParams:
    block = block or {}
    _require_keys(block, {"mass", "omega_per_time"}, "physics")
    try:
        return PhysParams(float(block.get("mass", 1.0)), float(block.get("omega_per_time", 0.0)))
    except ValueError as exc:
        raise ConfigError(f"physics: {exc}") from None


def _potential_from(block: Any) -> PotentialSpec | None:
    if block is None:
        return None
    try:
        return PotentialSpec.from_dict(block)
    except ValueError as exc:
        raise ConfigError(f"potential: {exc}") from None


def config_from_dict(doc: dict, origin: str = "<config>") -> RunConfig:
    """Validate a parsed document and resolve all defaults."""
    _require_keys(doc, {"experiment", "grid", "physics", "potential", "params", "sweep",
                        "seed", "output_dir", "max_jobs"}, origin)
    exp = doc.get("experiment")
    if exp not in EXPERIMENTS:
        raise ConfigError(f"{origin}: experiment must be one of {list(EXPERIMENTS)}, got {exp!r}")
    grid = _grid_from(doc.get("grid"))
    if grid is None and exp != "bench":
        raise ConfigError(f"{origin}: experiment {exp!r} needs a grid")
    physics = _physics_from(doc.get("physics"))
    potential = _potential_from(doc.get("potential"))
    user = doc.get("params") or {}
    if not isinstance(user, dict):
        raise ConfigError(f"{origin}: params must be an object")
    defaults = EXPERIMENT_DEFAULTS[exp]
    _require_keys(user, set(defaults), f"{origin}: params for {exp}")
    params = {**copy.deepcopy(defaults), **copy.deepcopy(user)}
    sweep = doc.get("sweep") or {}
    if not isinstance(sweep, dict):
        raise ConfigError(f"{origin}: sweep must be an object of lists")
    sweepable = set(defaults) | {"omega_per_time", "mass"}
    for k, v in sweep.items():
        if k not in sweepable:
            raise ConfigError(f"{origin}: cannot sweep {k!r} for experiment {exp}")
        if not isinstance(v, list) or not v:
            raise ConfigError(f"{origin}: sweep {k!r} must be a non-empty list")
    seed = doc.get("seed", 0)
    if not isinstance(seed, int) or seed < 0 or seed >= 2**64:
        raise ConfigError(f"{origin}: seed must be an unsigned 64-bit integer")
    max_jobs = int(doc.get("max_jobs", DEFAULT_MAX_JOBS))
    cfg = RunConfig(exp, grid, physics, potential, params, sweep, seed,
                    str(doc.get("output_dir", "rotorwave-output")), max_jobs, doc)
    _validate(cfg)
    return cfg


def _validate(cfg: RunConfig):
    n_jobs = 1
    for v in cfg.sweep.values():
        n_jobs *= len(v)
    if n_jobs > cfg.max_jobs:
        raise ConfigError(f"sweep plans {n_jobs} jobs, above the cap of {cfg.max_jobs}")
    for job in plan_jobs(cfg):
        p = job.params
        omega = job.key.get("omega_per_time", cfg.physics.omega)
        if "frame" in p and p["frame"] not in FRAMES:
            raise ConfigError(f"frame must be one of {FRAMES}, got {p['frame']!r}")
        dts = [p["time_step"]] if "time_step" in p else list(p.get("time_steps", []))
        for dt in dts:
            if not dt > 0:
                raise ConfigError(f"time step must be positive, got {dt}")
            if abs(omega) * dt > MAX_ROTATION_PER_STEP * (1 + 1e-12):
                raise ConfigError(f"|omega| dt = {abs(omega) * dt:.4g} exceeds {MAX_ROTATION_PER_STEP}")
    if cfg.experiment == "blade":
        from .potentials import Blade

        if not isinstance(cfg.potential, Blade):
            raise ConfigError("blade experiment needs a potential of kind 'blade'")
    if cfg.experiment in ("condition-check", "wave-operator", "boundedness", "frame-consistency") \
            and cfg.potential is None:
        raise ConfigError(f"experiment {cfg.experiment!r} needs a potential")


def plan_jobs(cfg: RunConfig) -> list[Job]:
    """Cross product of the sweep lists in key order; each job gets merged params."""
    keys = sorted(cfg.sweep)
    jobs = []
    for i, combo in enumerate(itertools.product(*(cfg.sweep[k] for k in keys))):
        key = dict(zip(keys, combo))
        params = {**copy.deepcopy(cfg.params), **{k: v for k, v in key.items() if k in cfg.params}}
        jobs.append(Job(i, key, params))
    return jobs


def load_config(path: str | Path) -> RunConfig:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc.strerror}") from None
    return config_from_dict(_parse_json(text, str(path)), str(path))
