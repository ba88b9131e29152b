"""Angular momentum, expectation values, projectors and free-motion diagnostics."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .grid import (
    MOMENTUM,
    POSITION,
    Grid,
    PhysParams,
    RepresentationError,
    WaveField,
    apply_momentum_multiplier,
    fft2,
)
from .potentials import PotentialSpec, _smooth_transition, evaluate_rotating
from .spectral import (
    GUARD_TOLERANCE,
    GuardError,
    box_boundary_mass,
    check_guard,
    check_guard_array,
    derivative_array,
    kinetic_phase,
)

log = logging.getLogger(__name__)

IMAG_TOLERANCE = 1e-10


def apply_J_array(a: np.ndarray, grid: Grid) -> np.ndarray:
    """``x1 * p2 a - x2 * p1 a`` for a position-space array."""
    out = grid.x1 * derivative_array(a, grid, 2)
    out -= grid.x2 * derivative_array(a, grid, 1)
    return out


def apply_J(psi: WaveField, guard: bool = True) -> WaveField:
    """Angular momentum ``J = x1 p2 - x2 p1`` applied spectrally."""
    if psi.rep != POSITION:
        raise RepresentationError("apply_J needs a position-space field")
    if guard:
        check_guard(psi, "apply_J")
    return WaveField(psi.grid, apply_J_array(psi.values, psi.grid), POSITION)


def apply_H0(psi: WaveField, m: float = 1.0) -> WaveField:
    """Free Hamiltonian ``|p|^2 / 2m``; keeps the representation."""
    mult = psi.grid.p_squared / (2.0 * m)
    if psi.rep == MOMENTUM:
        return psi.with_values(psi.values * mult)
    return psi.with_values(apply_momentum_multiplier(psi.values, mult))


@dataclass(frozen=True)
class ExpectationSet:
    """Expectation values per unit norm; ``norm`` records the raw state norm."""

    kinetic: float
    angular: float
    potential: float
    norm: float
    omega: float = 0.0

    @property
    def h_omega(self) -> float:
        return self.kinetic - self.omega * self.angular

    @property
    def total_rotating(self) -> float:
        return self.h_omega + self.potential

    def as_dict(self) -> dict:
        return {
            "kinetic": self.kinetic,
            "angular": self.angular,
            "h_omega": self.h_omega,
            "potential": self.potential,
            "total_rotating": self.total_rotating,
            "norm": self.norm,
        }


def _real_part(z: complex, scale: float, what: str) -> float:
    if abs(z.imag) > IMAG_TOLERANCE * max(1.0, abs(scale)):
        raise ArithmeticError(f"{what} has imaginary residual {z.imag:.3e}")
    return float(z.real)


def expectations_array(a: np.ndarray, grid: Grid, params: PhysParams,
                       potential: np.ndarray | None = None,
                       guard: bool = True, tol: float = GUARD_TOLERANCE) -> ExpectationSet:
    """Expectations of a position-space array; ``potential`` is ``V_t`` on the grid."""
    dens = a.real**2 + a.imag**2
    total = float(dens.sum())
    if total == 0:
        raise ValueError("expectations of the zero field")
    if guard:
        check_guard_array(a, grid, "angular expectation", tol=tol)
    b = fft2(a)
    kin = float(np.sum((b.real**2 + b.imag**2) * grid.p_squared)) / (2.0 * params.m * total)
    Ja = apply_J_array(a, grid)
    ang_c = np.vdot(a, Ja) / total
    ang = _real_part(complex(ang_c), abs(ang_c), "<J>")
    pot = float(np.sum(dens * potential)) / total if potential is not None else 0.0
    return ExpectationSet(kin, ang, pot, float(np.sqrt(total) * grid.dx), params.omega)


def expectations(psi: WaveField, V: PotentialSpec | None, t: float,
                 params: PhysParams, guard: bool = True,
                 tol: float = GUARD_TOLERANCE) -> ExpectationSet:
    """All expectations of ``psi`` at time ``t`` in the inertial frame.

    ``<V_t>`` uses the potential rotated to time ``t``; pass ``t=0`` for a
    rotating-frame state.  ``V=None`` means no potential.
    """
    pos = psi.to_position()
    g = pos.grid
    pot = None
    if V is not None:
        pot = evaluate_rotating(V, g.x1, g.x2, t, params.omega)
    return expectations_array(pos.values, g, params, pot, guard, tol)


def band_multiplier(grid: Grid, P: float) -> np.ndarray:
    """Smooth cutoff: 1 for ``|p| <= P``, 0 for ``|p| >= 1.1 P``."""
    if not 0 < P < grid.p_max:
        raise ValueError(f"band edge must lie in (0, {grid.p_max:.4g}), got {P}")
    pr = np.sqrt(grid.p_squared)
    return _smooth_transition((pr - P) / (0.1 * P))


def band_project(psi: WaveField, P: float) -> WaveField:
    """Apply the smooth momentum cutoff ``g(H0)`` of band edge ``P``."""
    mult = band_multiplier(psi.grid, P)
    if psi.rep == MOMENTUM:
        return psi.with_values(psi.values * mult)
    return psi.with_values(apply_momentum_multiplier(psi.values, mult))


def energy_tail(psi: WaveField, E: float, m: float = 1.0) -> float:
    """Mass of the momentum distribution with ``|p|^2/2m > E`` (per unit norm)."""
    mom = psi.to_momentum()
    dens = mom.density()
    total = dens.sum()
    return float(dens[psi.grid.p_squared / (2.0 * m) > E].sum() / total)


def localization(psi: WaveField, radius: float, center: Sequence[float] = (0.0, 0.0)) -> float:
    """Mass of ``|psi|^2`` outside the disk ``|x - center| < radius`` (sharp indicator)."""
    pos = psi.to_position()
    g = pos.grid
    d2 = (g.x1 - center[0]) ** 2 + (g.x2 - center[1]) ** 2
    dens = pos.density()
    return float(dens[d2 >= radius**2].sum() * g.dx**2)


def outside_disk(psi: WaveField, rho: float) -> float:
    return localization(psi, rho)


def outside_moving_disk(psi: WaveField, center: Sequence[float], radius: float) -> float:
    return localization(psi, radius, center)


@dataclass
class TailFit:
    """Power-law fit ``value ~ C * abscissa**exponent`` over the clean samples."""

    abscissae: np.ndarray
    values: np.ndarray
    exponent: float
    prefactor: float
    residual: float
    used: np.ndarray
    times: np.ndarray | None = None
    radii: np.ndarray | None = None

    @property
    def decay_rate(self) -> float:
        return -self.exponent


def fit_power_law(x, y, floor: float = 0.0):
    """Least-squares line through ``(log x, log y)`` for ``y > floor``.

    Returns ``(slope, prefactor, rms_residual, used_mask)``.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    used = (y > floor) & (x > 0) & np.isfinite(y)
    if used.sum() < 2:
        raise ValueError("need at least two samples above the floor to fit a power law")
    lx, ly = np.log(x[used]), np.log(y[used])
    A = np.vstack([lx, np.ones_like(lx)]).T
    (slope, icpt), *_ = np.linalg.lstsq(A, ly, rcond=None)
    res = ly - (slope * lx + icpt)
    return float(slope), float(np.exp(icpt)), float(np.sqrt(np.mean(res**2))), used


def propagation_tail_scan(psi0: WaveField, v: Sequence[float], times: Sequence[float],
                          radii: Sequence[float], m: float = 1.0,
                          floor: float = 1e-12) -> TailFit:
    """Norm of ``e^{-itH0} psi0`` outside ``|x - t v| < rho + |t| |v| / 2``.

    Samples below ``floor`` are reported but left out of the power-law fit
    in ``1 + rho + |t|``.
    """
    v = np.asarray(v, dtype=float)
    speed = float(np.hypot(*v))
    g = psi0.grid
    mom = psi0.to_momentum()
    ts, rs, xs, vals = [], [], [], []
    for t in times:
        psi_t = kinetic_phase(mom, t, m).to_position()
        c = t * v
        reach = np.max(np.abs(c)) + 0.0
        if reach > 0.45 * g.L or box_boundary_mass(psi_t) > 1e-6:
            raise GuardError(f"classical trajectory leaves the box at t={t}", box_boundary_mass(psi_t))
        for rho in radii:
            tail = np.sqrt(localization(psi_t, rho + abs(t) * speed / 2.0, c))
            ts.append(t)
            rs.append(rho)
            xs.append(1.0 + rho + abs(t))
            vals.append(tail)
    xs, vals = np.array(xs), np.array(vals)
    slope, pre, res, used = fit_power_law(xs, vals, floor)
    return TailFit(xs, vals, slope, pre, res, used, np.array(ts), np.array(rs))


def spreading_scan(psi0: WaveField, times: Sequence[float], m: float = 1.0,
                   fraction: float = 0.45, tol: float = 1e-6) -> TailFit:
    """``max_x |e^{-itH0} psi0|`` per time with a power-law fit in ``1 + |t|``.

    Raises :class:`GuardError` when the evolved packet has more than ``tol``
    of its mass outside the centred square of half side ``fraction * L``.
    """
    mom = psi0.to_momentum()
    xs, vals = [], []
    for t in times:
        psi_t = kinetic_phase(mom, t, m).to_position()
        bm = box_boundary_mass(psi_t, fraction)
        if bm > tol:
            raise GuardError(f"packet leaves the box at t={t}: boundary mass {bm:.3e}", bm)
        xs.append(1.0 + abs(t))
        vals.append(float(np.sqrt(psi_t.density().max())))
    xs, vals = np.array(xs), np.array(vals)
    slope, pre, res, used = fit_power_law(xs, vals)
    return TailFit(xs, vals, slope, pre, res, used, np.asarray(times, dtype=float))


@dataclass(frozen=True)
class NormEstimate:
    """Lower estimate of an operator norm from power iteration."""

    value: float
    converged: bool
    per_trial: tuple[float, ...] = field(default=())

    def __float__(self):
        return self.value


def op_norm_probe(A: Callable[[WaveField], WaveField], grid: Grid, P: float,
                  trials: int = 4, iters: int = 60, seed: int = 0,
                  adjoint: Callable[[WaveField], WaveField] | None = None,
                  right: Callable[[WaveField], WaveField] | None = None,
                  rtol: float = 1e-4) -> NormEstimate:
    """Power-iteration lower estimate of ``||A g(H0) R||``.

    ``adjoint`` defaults to ``A`` (self-adjoint maps such as multiplication
    by a real function); ``right`` is an optional self-adjoint right factor
    ``R`` such as a region indicator.  Starts are seeded random fields.
    """
    if trials < 4:
        raise ValueError(f"need at least 4 trials, got {trials}")
    Astar = adjoint or A
    ident = (lambda f: f)
    R = right or ident
    gmult = band_multiplier(grid, P)

    def band(f: WaveField) -> WaveField:
        return f.with_values(apply_momentum_multiplier(f.values, gmult))

    def forward(f):
        return A(band(R(f)))

    def backward(f):
        return R(band(Astar(f)))

    rng = np.random.default_rng(seed)
    best, all_converged, per_trial = 0.0, True, []
    for _ in range(trials):
        start = rng.standard_normal(grid.shape) + 1j * rng.standard_normal(grid.shape)
        f = backward(forward(WaveField(grid, start)))
        estimate, converged = 0.0, False
        for _ in range(iters):
            nf = np.linalg.norm(f.values)
            if nf == 0:
                converged = True
                estimate = 0.0
                break
            f = f.with_values(f.values / nf)
            h = forward(f)
            new = float(np.linalg.norm(h.values))
            if estimate > 0 and abs(new - estimate) <= rtol * new:
                estimate = new
                converged = True
                break
            estimate = new
            f = backward(h)
        per_trial.append(estimate)
        best = max(best, estimate)
        all_converged &= converged
    if not all_converged:
        log.info("op_norm_probe: some trials did not converge within %d iterations", iters)
    return NormEstimate(best, all_converged, tuple(per_trial))
