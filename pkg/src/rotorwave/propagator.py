"""Split-step time evolution in the inertial and in the co-rotating frame.

Inertial frame: ``H(t) = H0 + V_t`` with ``V_t(x) = V(R_{omega t}^{-1} x)``.
Rotating frame: the generator is ``H_omega + V`` with ``H_omega = H0 - omega J``
and a fixed potential.  The factor ``exp(-i dt H_omega)`` is exact: rotation
and free motion commute, so it equals ``rotate(., -omega dt)`` after the free
phase.  A rotating-frame state ``phi`` at time ``t`` corresponds to the
inertial state ``rotate(phi, omega t)``.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
import scipy.fft as sfft

from .grid import POSITION, Grid, PhysParams, RepresentationError, WaveField, norm
from .observables import ExpectationSet, expectations_array
from .potentials import PotentialSpec, Zero, _smooth_transition, evaluate_rotating
from .spectral import (
    GUARD_TOLERANCE,
    GuardError,
    boundary_mass_array,
    check_guard,
    rotate,
    rotation_shears,
)

log = logging.getLogger(__name__)

FRAMES = ("inertial", "rotating")
MAX_ROTATION_PER_STEP = 0.05


def _unit_phase(theta: np.ndarray) -> np.ndarray:
    """``exp(1j * theta)`` for real ``theta``."""
    out = np.empty(theta.shape, dtype=np.complex128)
    np.cos(theta, out=out.real)
    np.sin(theta, out=out.imag)
    return out


@dataclass(frozen=True)
class AbsorberConfig:
    """Real mask that is 1 in the interior and falls to ``strength`` at the box edge.

    The transition occupies a ring of ``width`` measured inward from each
    side of the box.
    """

    width: float
    strength: float = 0.0

    def __post_init__(self):
        if self.width <= 0:
            raise ValueError("absorber width must be positive")
        if not 0.0 <= self.strength < 1.0:
            raise ValueError("absorber strength must lie in [0, 1)")

    def mask(self, grid: Grid) -> np.ndarray:
        edge = 0.5 * grid.L - np.abs(grid.x)
        ramp = 1.0 - _smooth_transition(edge / self.width)
        prof = self.strength + (1.0 - self.strength) * ramp
        return prof[:, None] * prof[None, :]


def absorb(psi: WaveField, cfg: AbsorberConfig | None) -> WaveField:
    """Multiply a position-space field by the absorber mask (identity when ``cfg`` is None)."""
    if cfg is None:
        return psi
    if psi.rep != POSITION:
        raise RepresentationError("absorb needs a position-space field")
    return psi.with_values(psi.values * cfg.mask(psi.grid))


@dataclass(frozen=True)
class EvolveConfig:
    dt: float
    t0: float = 0.0
    t1: float = 1.0
    frame: str = "rotating"
    absorber: AbsorberConfig | None = None
    cadence: int = 10

    def __post_init__(self):
        if not self.dt > 0:
            raise ValueError(f"time step must be positive, got {self.dt}")
        if self.frame not in FRAMES:
            raise ValueError(f"frame must be one of {FRAMES}, got {self.frame!r}")
        if int(self.cadence) != self.cadence or self.cadence < 1:
            raise ValueError("trace cadence must be a positive integer")
        ratio = abs(self.t1 - self.t0) / self.dt
        if abs(ratio - round(ratio)) > 1e-9 * max(1.0, ratio):
            raise ValueError(
                f"interval {self.t1 - self.t0} is not an integral number of steps of {self.dt}"
            )

    @property
    def n_steps(self) -> int:
        return int(round(abs(self.t1 - self.t0) / self.dt))

    @property
    def signed_dt(self) -> float:
        return self.dt if self.t1 >= self.t0 else -self.dt

    def validate(self, params: PhysParams) -> None:
        if abs(params.omega) * self.dt > MAX_ROTATION_PER_STEP * (1 + 1e-12):
            raise ValueError(
                f"|omega| dt = {abs(params.omega) * self.dt:.4g} exceeds {MAX_ROTATION_PER_STEP}"
            )


def steps_for(duration: float, dt_max: float, even: bool = False) -> tuple[int, float]:
    """Smallest step count with step ``<= dt_max`` covering ``duration`` exactly."""
    n = max(1, int(np.ceil(abs(duration) / dt_max - 1e-9)))
    if even and n % 2:
        n += 1
    return n, abs(duration) / n


@dataclass
class PropagationTrace:
    times: list[float] = field(default_factory=list)
    steps: list[int] = field(default_factory=list)
    samples: list[ExpectationSet] = field(default_factory=list)
    boundary_mass: list[float] = field(default_factory=list)
    frame: str = "inertial"

    def column(self, name: str) -> np.ndarray:
        if name in ("time", "times"):
            return np.asarray(self.times)
        if name == "boundary_mass":
            return np.asarray(self.boundary_mass)
        return np.array([getattr(s, name) for s in self.samples])

    def __len__(self):
        return len(self.times)

    def rows(self) -> list[dict]:
        out = []
        for t, k, s, bm in zip(self.times, self.steps, self.samples, self.boundary_mass):
            out.append({"t": t, "step": k, **s.as_dict(), "boundary_mass": bm})
        return out


class SplitStepPropagator:
    """Strang splitting with cached phases for one (grid, potential, dt, frame).

    Arrays passed to :meth:`step` are position-space samples; the array is
    updated and returned (callers hand over ownership).
    """

    def __init__(self, grid: Grid, V: PotentialSpec | None, params: PhysParams,
                 dt: float, frame: str = "rotating"):
        if frame not in FRAMES:
            raise ValueError(f"frame must be one of {FRAMES}, got {frame!r}")
        if abs(params.omega * dt) > MAX_ROTATION_PER_STEP * (1 + 1e-12):
            raise ValueError(f"|omega| dt = {abs(params.omega * dt):.4g} exceeds {MAX_ROTATION_PER_STEP}")
        self.grid = grid
        self.V = V if V is not None else Zero()
        self.params = params
        self.dt = float(dt)
        self.frame = frame
        m = params.m
        self._zero_potential = isinstance(self.V, Zero)
        self._static = (
            self._zero_potential or params.omega == 0.0 or self.V.is_radial or frame == "rotating"
        )
        self._half = None
        if self._static and not self._zero_potential:
            self._half = self.half_phase(0.0)
        self._rotating_stages = frame == "rotating" and params.omega != 0.0
        if self._rotating_stages:
            s1, s2 = rotation_shears(-params.omega * dt)
            p1, p2, x1, x2 = grid.p1, grid.p2, grid.x1, grid.x2
            shear1 = _unit_phase(-s1 * (p1 * x2))
            self._stage1 = shear1
            self._stage2 = _unit_phase(-s2 * (x1 * p2))
            self._stage3 = shear1 * _unit_phase((-0.5 * dt / m) * p1**2)
            self._stage4 = _unit_phase((-0.5 * dt / m) * p2**2)
        else:
            self._kin = _unit_phase((-0.5 * dt / m) * grid.p_squared)

    def potential_at(self, t: float) -> np.ndarray:
        g = self.grid
        if self.frame == "rotating":
            return np.broadcast_to(evaluate_rotating(self.V, g.x1, g.x2, 0.0, 0.0), g.shape)
        return np.broadcast_to(evaluate_rotating(self.V, g.x1, g.x2, t, self.params.omega), g.shape)

    def half_phase(self, t: float) -> np.ndarray:
        return _unit_phase((-0.5 * self.dt) * self.potential_at(t))

    def free_factor(self, a: np.ndarray) -> np.ndarray:
        if self._rotating_stages:
            for mult, axis in ((self._stage1, 0), (self._stage2, 1), (self._stage3, 0), (self._stage4, 1)):
                a = sfft.fft(a, axis=axis, norm="ortho", overwrite_x=True)
                a *= mult
                a = sfft.ifft(a, axis=axis, norm="ortho", overwrite_x=True)
            return a
        a = sfft.fft2(a, norm="ortho", overwrite_x=True)
        a *= self._kin
        return sfft.ifft2(a, norm="ortho", overwrite_x=True)

    def step(self, a: np.ndarray, t: float) -> np.ndarray:
        """Advance from ``t`` to ``t + dt``."""
        if self._zero_potential:
            return self.free_factor(a)
        half = self._half if self._half is not None else self.half_phase(t + 0.5 * self.dt)
        a *= half
        a = self.free_factor(a)
        a *= half
        return a


def _as_position(psi: WaveField) -> WaveField:
    if psi.rep != POSITION:
        raise RepresentationError("propagation needs a position-space field")
    return psi


def step_inertial(psi: WaveField, t: float, dt: float, V: PotentialSpec | None,
                  params: PhysParams) -> WaveField:
    """One inertial Strang step from ``t`` to ``t + dt`` with ``V`` at the midpoint time."""
    psi = _as_position(psi)
    prop = SplitStepPropagator(psi.grid, V, params, dt, "inertial")
    return psi.with_values(prop.step(psi.values.copy(), t))


def step_rotating(phi: WaveField, dt: float, V: PotentialSpec | None,
                  params: PhysParams) -> WaveField:
    """One rotating-frame Strang step for ``H_omega + V``."""
    phi = _as_position(phi)
    check_guard(phi, "step_rotating")
    prop = SplitStepPropagator(phi.grid, V, params, dt, "rotating")
    return phi.with_values(prop.step(phi.values.copy(), 0.0))


def _sample(a, grid, params, prop: SplitStepPropagator, t, guard):
    pot = None if prop._zero_potential else prop.potential_at(t)
    return expectations_array(a, grid, params, pot, guard=False)


def evolve(psi: WaveField, cfg: EvolveConfig, V: PotentialSpec | None,
           params: PhysParams, observe: bool = True,
           guard_tol: float = GUARD_TOLERANCE) -> tuple[WaveField, PropagationTrace]:
    """Evolve ``psi`` from ``cfg.t0`` to ``cfg.t1``.

    In the rotating frame the input and output are rotating-frame states;
    use :func:`frame_transfer` to return to the inertial frame.  The guard
    is checked at every trace sample and aborts with the step index.  With
    ``observe=False`` only times and guard values are recorded.
    """
    psi = _as_position(psi)
    cfg.validate(params)
    grid = psi.grid
    n = cfg.n_steps
    dt = cfg.signed_dt
    trace = PropagationTrace(frame=cfg.frame)
    a = psi.values.copy()
    if n == 0:
        _record(trace, a, grid, params, None, cfg.t0, 0, observe, cfg, guard_tol, V)
        return psi.copy(), trace
    prop = SplitStepPropagator(grid, V, params, dt, cfg.frame)
    mask = cfg.absorber.mask(grid) if cfg.absorber is not None else None
    _record(trace, a, grid, params, prop, cfg.t0, 0, observe, cfg, guard_tol, V)
    for k in range(1, n + 1):
        t = cfg.t0 + (k - 1) * dt
        a = prop.step(a, t)
        if mask is not None:
            a *= mask
        if k % cfg.cadence == 0:
            _record(trace, a, grid, params, prop, cfg.t0 + k * dt, k, observe, cfg, guard_tol, V)
    if n % cfg.cadence:
        bm = boundary_mass_array(a, grid)
        if cfg.absorber is None and bm > guard_tol:
            raise GuardError(f"evolve: boundary mass {bm:.3e} at final step {n}", bm)
    return WaveField(grid, a, POSITION), trace


def _record(trace, a, grid, params, prop, t, k, observe, cfg, guard_tol, V):
    bm = boundary_mass_array(a, grid)
    if cfg.absorber is None and bm > guard_tol:
        raise GuardError(f"evolve: boundary mass {bm:.3e} exceeds {guard_tol:g} at step {k} (t={t:.6g})", bm)
    trace.times.append(float(t))
    trace.steps.append(int(k))
    trace.boundary_mass.append(bm)
    if observe:
        if prop is None:
            pot = None
            if V is not None and not isinstance(V, Zero):
                tt = 0.0 if cfg.frame == "rotating" else t
                pot = evaluate_rotating(V, grid.x1, grid.x2, tt, params.omega) * np.ones(grid.shape)
            trace.samples.append(expectations_array(a, grid, params, pot, guard=False))
        else:
            trace.samples.append(_sample(a, grid, params, prop, t, False))


def frame_transfer(phi_rot: WaveField, t: float, omega: float, guard: bool = True,
                   tol: float = GUARD_TOLERANCE) -> WaveField:
    """Inertial state ``R(t) phi`` from the rotating-frame state at time ``t``."""
    return rotate(phi_rot, omega * t, guard=guard, tol=tol)


def to_rotating_frame(psi: WaveField, s: float, omega: float, guard: bool = True,
                      tol: float = GUARD_TOLERANCE) -> WaveField:
    """Rotating-frame state ``R(s)^* psi`` of the inertial state at time ``s``."""
    return rotate(psi, -omega * s, guard=guard, tol=tol)


def propagate(psi: WaveField, t0: float, t1: float, V: PotentialSpec | None,
              params: PhysParams, dt: float, frame: str = "rotating",
              observe: bool = False, cadence: int = 10,
              guard_tol: float = GUARD_TOLERANCE) -> tuple[WaveField, PropagationTrace]:
    """Inertial-frame ``U(t1, t0) psi``; ``dt`` is an upper bound on the step.

    The rotating route realizes ``R(t1) exp(-i (t1-t0)(H_omega+V)) R(t0)^*``.
    """
    n, step = steps_for(t1 - t0, dt)
    if t1 == t0:
        return psi.copy(), PropagationTrace(frame=frame)
    cfg = EvolveConfig(step, t0, t0 + np.sign(t1 - t0) * n * step, frame, None, cadence)
    if frame == "rotating" and params.omega != 0.0:
        phi = to_rotating_frame(psi, t0, params.omega, tol=guard_tol)
        phi, trace = evolve(phi, cfg, V, params, observe, guard_tol)
        return frame_transfer(phi, t1, params.omega, tol=guard_tol), trace
    return evolve(psi, cfg, V, params, observe, guard_tol)


def monodromy(psi: WaveField, s: float, V: PotentialSpec | None, params: PhysParams,
              dt: float, frame: str = "inertial") -> WaveField:
    """``U(s + 2 pi/|omega|, s) psi``: evolution over one full turn of the potential.

    The step is shrunk to the nearest value dividing the period exactly.
    """
    if params.omega == 0:
        raise ValueError("monodromy needs a rotating potential (omega != 0)")
    period = 2.0 * np.pi / abs(params.omega)
    out, _ = propagate(psi, s, s + period, V, params, dt, frame)
    return out


@dataclass
class FrameConsistency:
    """Inertial-vs-rotating discrepancy per time step and the observed orders."""

    dts: np.ndarray
    discrepancy: np.ndarray
    orders: np.ndarray

    @property
    def order(self) -> float:
        return float(self.orders.min()) if len(self.orders) else math.nan

    def rows(self) -> list[dict]:
        out = []
        for i, (dt, e) in enumerate(zip(self.dts, self.discrepancy)):
            out.append({"dt": float(dt), "discrepancy": float(e),
                        "order": float(self.orders[i - 1]) if i > 0 else math.nan})
        return out


def frame_consistency(psi: WaveField, t0: float, t1: float, V: PotentialSpec | None,
                      params: PhysParams, dts: Sequence[float]) -> FrameConsistency:
    """Evolve ``psi`` by both routes for each ``dt`` and compare after frame transfer.

    Orders are ``log(e_k / e_{k+1}) / log(dt_k / dt_{k+1})`` between
    consecutive levels.
    """
    errs = []
    for dt in dts:
        a, _ = propagate(psi, t0, t1, V, params, dt, "inertial", cadence=10**9)
        b, _ = propagate(psi, t0, t1, V, params, dt, "rotating", cadence=10**9)
        errs.append(norm(a.with_values(a.values - b.values)))
    dts = np.asarray(dts, dtype=float)
    errs = np.array(errs)
    orders = np.log(errs[:-1] / errs[1:]) / np.log(dts[:-1] / dts[1:])
    return FrameConsistency(dts, errs, orders)
