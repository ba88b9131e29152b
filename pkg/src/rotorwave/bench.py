"""Step-time benchmark for the inertial and rotating split steps."""

from __future__ import annotations

import time
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .grid import Grid, PhysParams
from .observables import fit_power_law
from .potentials import GaussianBump
from .propagator import SplitStepPropagator

MIN_STEPS = 100
BENCH_COLUMNS = ("kind", "n", "points", "steps", "mean_s", "min_s", "max_s")


@dataclass
class BenchResult:
    rows: list = field(default_factory=list)
    slopes: dict = field(default_factory=dict)

    def table(self, kind: str) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        sel = [r for r in self.rows if r["kind"] == kind]
        pts = np.array([r["points"] for r in sel], dtype=float)
        return pts, np.array([r["mean_s"] for r in sel]), np.array([r["min_s"] for r in sel])


def _time_steps(prop: SplitStepPropagator, a: np.ndarray, steps: int, warmup: int):
    for k in range(warmup):
        a = prop.step(a, k * prop.dt)
    per = np.empty(steps)
    clock = time.perf_counter
    for k in range(steps):
        t0 = clock()
        a = prop.step(a, k * prop.dt)
        per[k] = clock() - t0
    return per


def bench(grids: Sequence[int] = (128, 256, 512, 1024), steps: int = MIN_STEPS, warmup: int = 5,
          box_length: float = 40.0, omega: float = 0.3, dt: float = 0.01) -> BenchResult:
    """Per-step wall time on each grid for both step kinds.

    The inertial step uses a rotating Gaussian bump, so its potential phase
    is rebuilt every step; the rotating step runs the fused four-stage
    factor with a static phase.  The reported slope is the fitted exponent
    of min step time against total points ``n**2``.
    """
    if steps < MIN_STEPS:
        raise ValueError(f"need at least {MIN_STEPS} timed steps, got {steps}")
    V = GaussianBump(2.0, (1.5, 0.5), 1.0)
    params = PhysParams(1.0, omega)
    res = BenchResult()
    rng = np.random.default_rng(0)
    for n in grids:
        g = Grid(int(n), box_length)
        start = np.exp(-(g.x1**2 + g.x2**2) / 4.0) * np.exp(1j * rng.uniform(0, 2 * np.pi))
        for kind in ("inertial", "rotating"):
            prop = SplitStepPropagator(g, V, params, dt, kind)
            per = _time_steps(prop, start.astype(complex), steps, warmup)
            res.rows.append({
                "kind": kind, "n": g.n, "points": g.points, "steps": steps,
                "mean_s": float(per.mean()), "min_s": float(per.min()), "max_s": float(per.max()),
            })
    if len(grids) >= 2:
        for kind in ("inertial", "rotating"):
            pts, _, mins = res.table(kind)
            res.slopes[kind] = fit_power_law(pts, mins)[0]
    return res
