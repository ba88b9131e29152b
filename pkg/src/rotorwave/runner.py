"""Experiment registry, job execution and the run manifest."""

from __future__ import annotations

import logging
import math
import os
import time
import traceback
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path
from typing import Callable

import numpy as np

from . import __version__
from .bench import BENCH_COLUMNS, bench
from .conditions import check_condition, check_condition_regularized
from .config import Job, RunConfig, config_from_dict
from .grid import PhysParams, WaveField, norm
from .persist import export_heatmap, sha256_file, write_csv, write_field, write_json
from .propagator import frame_consistency, propagate
from .scattering import (
    WaveOpConfig,
    blade_experiment,
    blade_horizons,
    boundedness_monitor,
    momentum_moments,
    position_moments,
    wave_operator,
)
from .spectral import kinetic_phase
from .states import domain_scaling_report, make_packet_D0, make_packet_impact, profile_from_dict
from .observables import propagation_tail_scan, spreading_scan

log = logging.getLogger(__name__)

MANIFEST_NAME = "manifest.json"
_SCATTER_COLUMNS = (
    "job", "E_in", "E_out", "J_in", "J_out", "dE_kin", "dJ", "dH_omega", "dE_pred_identity",
    "dE_pred_specular", "dE_classical", "specular_ratio", "identity_error", "reflected",
    "transmitted", "absorbed", "unitarity_deficit", "residual_potential", "incoming_potential",
    "cauchy", "max_boundary_mass", "T_minus", "T_plus", "dt", "omega", "b", "v", "flags",
)


@dataclass
class Experiment:
    run: Callable
    tables: dict


@dataclass
class JobOutcome:
    index: int
    key: dict
    status: str
    seconds: float
    seed: dict
    tables: dict = field(default_factory=dict)
    files: list = field(default_factory=list)
    summary: dict = field(default_factory=dict)
    error: str = ""


@dataclass
class RunManifest:
    path: Path
    doc: dict

    @property
    def failed(self) -> list[dict]:
        return [j for j in self.doc["jobs"] if j["status"] != "ok"]

    @property
    def ok(self) -> bool:
        return not self.failed


def _physics(cfg: RunConfig, job: Job) -> PhysParams:
    return PhysParams(float(job.key.get("mass", cfg.physics.m)),
                      float(job.key.get("omega_per_time", cfg.physics.omega)))


def _snapshot(out: Path, job: Job, tag: str, psi: WaveField, t: float) -> list[str]:
    base = out / "fields" / f"job{job.index:04d}_{tag}"
    f1 = write_field(base.with_suffix(".rwf"), psi, t)
    f2 = export_heatmap(psi.to_position(), base.with_suffix(".pgm"), "log", t=t)
    return [str(f1), str(f2)]


def _run_blade(cfg, job, seed, out):
    p = job.params
    params = _physics(cfg, job)
    b, v, m = float(p["impact_parameter"]), float(p["speed"]), params.m
    profile = profile_from_dict(p["profile"])
    psi = make_packet_impact(cfg.grid, b, v, profile, m, p["tail_tolerance"])
    horizons = p["horizons"]
    if horizons is None:
        _, sx = position_moments(psi)
        _, sp = momentum_moments(psi)
        horizons = blade_horizons(cfg.potential, b, v, params.omega, float(sx.max()), float(sp.max()), m)
    rep = blade_experiment(b, v, params.omega, cfg.potential, cfg.grid, p["time_step"],
                           tuple(horizons), m, profile, p["tail_tolerance"], p["require_specular"],
                           p["transmission_limit"], p["frame"], packet=psi,
                           guard_tol=p["guard_tolerance"])
    row = {"job": job.index, **rep.as_row(), "specular_ratio": rep.specular_ratio,
           "identity_error": rep.identity_error if rep.delta_kinetic != 0 else math.nan}
    files = []
    T_minus, T_plus = horizons
    times = sorted(float(t) for t in p["snapshot_times"])
    if times:
        state = kinetic_phase(psi, -T_minus, m).to_position()
        t_prev = -T_minus
        for t in times:
            if not -T_minus <= t <= T_plus:
                raise ValueError(f"snapshot time {t} outside [{-T_minus:g}, {T_plus:g}]")
            state, _ = propagate(state, t_prev, t, cfg.potential, params, p["time_step"],
                                 p["frame"], guard_tol=p["guard_tolerance"])
            t_prev = t
            files += _snapshot(out, job, f"t{t:+.6g}", state, t)
    return {"scatter": [row]}, files, {"dE_kin": rep.delta_kinetic, "dH_omega": rep.delta_h_omega}


def _run_domain(cfg, job, seed, out):
    params = _physics(cfg, job)
    rep = domain_scaling_report(cfg.grid, params.omega, [int(n) for n in job.params["indices"]],
                                params.m, profile_from_dict(job.params["profile"]))
    rows = [{"job": job.index, "omega": params.omega, **r} for r in rep.rows()]
    slopes = {"job": job.index, "omega": params.omega, "slope_h0": rep.slopes.get("h0"),
              "slope_j": rep.slopes.get("j"), "slope_homega": rep.slopes.get("homega")}
    return {"domain": rows, "slopes": [slopes]}, [], dict(rep.slopes)


def _run_condition(cfg, job, seed, out):
    p = job.params
    cond = p["condition"]
    if cond in ("C20", "C23"):
        rep = check_condition_regularized(cfg.potential, cond, p["band_momentum"], p["radii"], cfg.grid,
                                          trials=p["probe_trials"], iters=p["probe_iterations"],
                                          seed=int(seed.generate_state(1)[0]))
    else:
        rep = check_condition(cfg.potential, cond, p["radii"])
    rows = [{"job": job.index, **r} for r in rep.rows()]
    verdict = {"job": job.index, "condition": cond, "exponent": rep.exponent, "residual": rep.residual,
               "verdict": rep.verdict, "converged": rep.converged}
    return {"decay": rows, "verdict": [verdict]}, [], {"verdict": rep.verdict, "exponent": rep.exponent}


def cauchy_sequence(psi_in: WaveField, V, params: PhysParams, direction: str, horizon: float,
                    doublings: int, dt: float, frame: str = "rotating") -> list[dict]:
    """``d(T) = ||Psi(2T) - Psi(T)||`` for ``T = horizon * 2**k``, ``k = 0..doublings``."""
    fields = []
    for k in range(doublings + 2):
        wcfg = WaveOpConfig(direction, horizon * 2**k, dt, frame=frame, cauchy=False)
        fields.append(wave_operator(psi_in, wcfg, V, params)[0])
    rows, prev = [], None
    for k in range(doublings + 1):
        a, b = fields[k + 1].to_position(), fields[k].to_position()
        d = norm(a.with_values(a.values - b.values))
        rows.append({"horizon": horizon * 2**k, "difference": d,
                     "ratio": prev / d if prev is not None and d > 0 else math.nan})
        prev = d
    return rows


def _run_wave(cfg, job, seed, out):
    p = job.params
    params = _physics(cfg, job)
    psi = make_packet_D0(cfg.grid, p["velocity"], profile_from_dict(p["profile"]), params.m,
                         tail_tol=p["tail_tolerance"])
    rows = cauchy_sequence(psi, cfg.potential, params, p["direction"], p["horizon"], p["doublings"],
                           p["time_step"], p["frame"])
    rows = [{"job": job.index, "direction": p["direction"], **r} for r in rows]
    ratios = [r["ratio"] for r in rows if not math.isnan(r["ratio"])]
    return {"cauchy": rows}, [], {"min_ratio": min(ratios) if ratios else math.nan}


def _run_boundedness(cfg, job, seed, out):
    p = job.params
    params = _physics(cfg, job)
    if params.omega == 0:
        raise ValueError("boundedness monitor needs omega != 0 to count periods")
    psi0 = make_packet_D0(cfg.grid, p["velocity"], profile_from_dict(p["profile"]), params.m,
                          tail_tol=1.0)
    psi, _ = wave_operator(psi0, WaveOpConfig("minus", p["wave_operator_horizon"], p["time_step"],
                                              frame=p["frame"], cauchy=False), cfg.potential, params)
    horizon = p["periods"] * 2 * np.pi / abs(params.omega)
    curve = boundedness_monitor(psi, cfg.potential, params, horizon, p["time_step"], p["samples"],
                                p["tail_factor"], p["frame"])
    series = [{"job": job.index, **r} for r in curve.rows()]
    summary = {"job": job.index, "omega": params.omega, "periods": curve.periods, "E_star": curve.E_star,
               "sup_ratio": curve.sup_ratio, "tail_ratio": curve.tail_ratio,
               "trend_slope": curve.trend_slope, "trend_stderr": curve.trend_stderr,
               "absorbed": curve.absorbed}
    return {"series": series, "summary": [summary]}, [], {"sup_ratio": curve.sup_ratio,
                                                          "tail_ratio": curve.tail_ratio}


def gaussian_start(grid, center, momentum, width) -> WaveField:
    """Normalized ``exp(-|x - c|^2 / w^2 + i k.x)``."""
    c1, c2 = center
    k1, k2 = momentum
    vals = np.exp(-((grid.x1 - c1) ** 2 + (grid.x2 - c2) ** 2) / width**2 + 1j * (k1 * grid.x1 + k2 * grid.x2))
    return WaveField(grid, vals).normalized()


def _run_frames(cfg, job, seed, out):
    p = job.params
    params = _physics(cfg, job)
    psi = gaussian_start(cfg.grid, p["initial_center"], p["initial_momentum"], p["initial_width"])
    res = frame_consistency(psi, 0.0, p["duration"], cfg.potential, params, p["time_steps"])
    rows = [{"job": job.index, "omega": params.omega, **r} for r in res.rows()]
    return {"consistency": rows}, [], {"order": res.order, "finest": float(res.discrepancy[-1])}


def _run_free(cfg, job, seed, out):
    p = job.params
    prof = profile_from_dict(p["profile"])
    psi = make_packet_D0(cfg.grid, p["velocity"], prof, cfg.physics.m)
    tail = propagation_tail_scan(psi, p["velocity"], p["times"], p["radii"], cfg.physics.m)
    spread_prof = profile_from_dict({"kind": "gaussian", "sigma_p": p["spreading_sigma_p"]})
    psi_s = make_packet_D0(cfg.grid, p["spreading_velocity"], spread_prof, cfg.physics.m, tail_tol=1.0)
    spread = spreading_scan(psi_s, p["spreading_times"], cfg.physics.m)
    tail_rows = [{"job": job.index, "t": float(t), "rho": float(r), "abscissa": float(x),
                  "value": float(v), "used": bool(u)}
                 for t, r, x, v, u in zip(tail.times, tail.radii, tail.abscissae, tail.values, tail.used)]
    spread_rows = [{"job": job.index, "t": float(t), "peak_amplitude": float(v)}
                   for t, v in zip(spread.times, spread.values)]
    fits = [{"job": job.index, "scan": "tail", "exponent": tail.exponent, "prefactor": tail.prefactor,
             "residual": tail.residual},
            {"job": job.index, "scan": "spreading", "exponent": spread.exponent,
             "prefactor": spread.prefactor, "residual": spread.residual}]
    return ({"tail": tail_rows, "spreading": spread_rows, "fits": fits}, [],
            {"tail_exponent": tail.exponent, "spreading_exponent": spread.exponent})


def _run_bench(cfg, job, seed, out):
    p = job.params
    res = bench(p["grids"], p["steps"], p["warmup"], p["box_length"], p["omega_per_time"])
    rows = [{"job": job.index, **r} for r in res.rows]
    slopes = [{"job": job.index, "kind": k, "slope": s} for k, s in res.slopes.items()]
    return {"timing": rows, "slopes": slopes}, [], dict(res.slopes)


EXPERIMENTS: dict[str, Experiment] = {
    "blade": Experiment(_run_blade, {"scatter": _SCATTER_COLUMNS}),
    "domain-scaling": Experiment(_run_domain, {
        "domain": ("job", "omega", "n", "h0_norm", "j_norm", "homega_norm"),
        "slopes": ("job", "omega", "slope_h0", "slope_j", "slope_homega"),
    }),
    "condition-check": Experiment(_run_condition, {
        "decay": ("job", "condition", "rho", "sup_outside", "weighted"),
        "verdict": ("job", "condition", "exponent", "residual", "verdict", "converged"),
    }),
    "wave-operator": Experiment(_run_wave, {
        "cauchy": ("job", "direction", "horizon", "difference", "ratio"),
    }),
    "boundedness": Experiment(_run_boundedness, {
        "series": ("job", "t", "kinetic", "tail"),
        "summary": ("job", "omega", "periods", "E_star", "sup_ratio", "tail_ratio",
                    "trend_slope", "trend_stderr", "absorbed"),
    }),
    "frame-consistency": Experiment(_run_frames, {
        "consistency": ("job", "omega", "dt", "discrepancy", "order"),
    }),
    "free-diagnostics": Experiment(_run_free, {
        "tail": ("job", "t", "rho", "abscissa", "value", "used"),
        "spreading": ("job", "t", "peak_amplitude"),
        "fits": ("job", "scan", "exponent", "prefactor", "residual"),
    }),
    "bench": Experiment(_run_bench, {
        "timing": ("job",) + BENCH_COLUMNS,
        "slopes": ("job", "kind", "slope"),
    }),
}


def _execute(payload) -> JobOutcome:
    """Worker entry point: rebuild the config and run one job, never raising."""
    doc, job, out = payload
    cfg = config_from_dict(doc)
    seed = np.random.SeedSequence(job.seed_entropy, spawn_key=job.spawn_key)
    seed_info = {"entropy": job.seed_entropy, "spawn_key": list(job.spawn_key)}
    start = time.perf_counter()
    try:
        tables, files, summary = EXPERIMENTS[cfg.experiment].run(cfg, job, seed, Path(out))
        return JobOutcome(job.index, job.key, "ok", time.perf_counter() - start, seed_info,
                          tables, files, summary)
    except Exception as exc:
        log.warning("job %d failed: %s", job.index, exc)
        return JobOutcome(job.index, job.key, "failed", time.perf_counter() - start, seed_info,
                          error=f"{type(exc).__name__}: {exc}\n{traceback.format_exc(limit=3)}")


def _now() -> str:
    return datetime.now(timezone.utc).isoformat(timespec="seconds")


def assign_seeds(cfg: RunConfig, jobs: list[Job]) -> list[Job]:
    """One child of the config seed per job, by plan position (independent of scheduling)."""
    children = np.random.SeedSequence(cfg.seed).spawn(len(jobs))
    for job, child in zip(jobs, children):
        job.seed_entropy = cfg.seed
        job.spawn_key = tuple(int(k) for k in child.spawn_key)
    return jobs


def run(cfg: RunConfig, jobs: int = 1, output_dir: str | Path | None = None) -> RunManifest:
    """Execute every planned job, write merged CSVs, then the manifest."""
    out = Path(output_dir or cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    plan = assign_seeds(cfg, cfg.plan())
    started = _now()
    doc = cfg.echo()
    payloads = [(doc, job, str(out)) for job in plan]
    if jobs > 1 and len(plan) > 1:
        with ProcessPoolExecutor(max_workers=min(jobs, len(plan))) as pool:
            outcomes = list(pool.map(_execute, payloads))
    else:
        outcomes = [_execute(p) for p in payloads]
    outcomes.sort(key=lambda o: o.index)
    exp = EXPERIMENTS[cfg.experiment]
    files = []
    for name, columns in exp.tables.items():
        rows = [r for o in outcomes for r in o.tables.get(name, [])]
        files.append(str(write_csv(out / f"{name}.csv", columns, rows)))
    for o in outcomes:
        files.extend(o.files)
    inventory = []
    for f in sorted(files):
        rel = os.path.relpath(f, out)
        inventory.append({"path": rel, "sha256": sha256_file(f), "bytes": os.path.getsize(f)})
    manifest = {
        "config": doc,
        "version": __version__,
        "started": started,
        "finished": _now(),
        "jobs": [{"index": o.index, "key": o.key, "status": o.status, "seconds": o.seconds,
                  "seed": o.seed, "summary": o.summary, "files": [os.path.relpath(f, out) for f in o.files],
                  "error": o.error} for o in outcomes],
        "files": inventory,
    }
    path = write_json(out / MANIFEST_NAME, manifest)
    return RunManifest(path, manifest)


def verify_manifest(path: str | Path) -> list[str]:
    """Paths whose checksum no longer matches the inventory (empty when intact)."""
    import json

    path = Path(path)
    doc = json.loads(path.read_text())
    bad = []
    for entry in doc["files"]:
        f = path.parent / entry["path"]
        if not f.exists() or sha256_file(f) != entry["sha256"]:
            bad.append(entry["path"])
    return bad
