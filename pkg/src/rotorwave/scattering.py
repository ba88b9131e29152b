"""Finite-horizon wave operators, scattering runs and the rotating-blade experiment."""

from __future__ import annotations

import logging
import math
from dataclasses import asdict, dataclass, field

import numpy as np

from .grid import Grid, PhysParams, WaveField, norm
from .observables import ExpectationSet, energy_tail, expectations, expectations_array, fit_power_law
from .potentials import Blade, PotentialSpec, Zero
from .propagator import (
    FRAMES,
    EvolveConfig,
    PropagationTrace,
    SplitStepPropagator,
    evolve,
    frame_transfer,
    propagate,
    steps_for,
    to_rotating_frame,
)
from .spectral import GUARD_TOLERANCE, GuardError, check_guard, check_guard_array, kinetic_phase
from .states import Profile, make_packet_impact

log = logging.getLogger(__name__)


class ReflectionRegimeError(RuntimeError):
    """Blade run outside the specular (fully reflecting) regime."""

    def __init__(self, message, report=None):
        super().__init__(message)
        self.report = report


@dataclass(frozen=True)
class WaveOpConfig:
    direction: str
    horizon: float
    dt: float
    s: float = 0.0
    frame: str = "rotating"
    cauchy: bool = True
    cauchy_threshold: float = 1e-2

    def __post_init__(self):
        if self.direction not in ("minus", "plus"):
            raise ValueError(f"direction must be 'minus' or 'plus', got {self.direction!r}")
        if not self.horizon > 0:
            raise ValueError("wave-operator horizon must be positive")
        if not self.dt > 0:
            raise ValueError("time step must be positive")
        if self.frame not in FRAMES:
            raise ValueError(f"frame must be one of {FRAMES}")


@dataclass
class WaveOpResult:
    horizon: float
    cauchy: float
    converged: bool
    steps: int
    dt: float


def _wave_op_at(psi_in, T, n, dt, cfg: WaveOpConfig, V, params):
    sign = -1.0 if cfg.direction == "minus" else 1.0
    # free asymptote at the far end: exp(+iH0 T) for minus, exp(-iH0 T) for plus
    far = kinetic_phase(psi_in, sign * T, params.m).to_position()
    check_guard(far, f"wave_operator free asymptote at horizon {T:g}")
    t_far = cfg.s + sign * T
    out, _ = propagate(far, t_far, cfg.s, V, params, dt * (1 + 1e-12), cfg.frame)
    return out


def wave_operator(psi_in: WaveField, cfg: WaveOpConfig, V: PotentialSpec | None,
                  params: PhysParams) -> tuple[WaveField, WaveOpResult]:
    """Finite-horizon ``Omega^-`` (``U(s, s-T) e^{iH0 T}``) or ``Omega^+``.

    ``s`` is the reference time.  The step count is made even so that the
    half-horizon run shares the time lattice near ``s``; the Cauchy
    diagnostic is ``||Psi(T) - Psi(T/2)||``.
    """
    n, dt = steps_for(cfg.horizon, cfg.dt, even=True)
    full = _wave_op_at(psi_in, cfg.horizon, n, dt, cfg, V, params)
    diag = math.nan
    if cfg.cauchy:
        half = _wave_op_at(psi_in, 0.5 * cfg.horizon, n // 2, dt, cfg, V, params)
        diag = norm(full.with_values(full.values - half.values))
    converged = not (diag > cfg.cauchy_threshold)
    if not converged:
        log.warning("wave operator: Cauchy diagnostic %.3e above %.1e at horizon %g",
                    diag, cfg.cauchy_threshold, cfg.horizon)
    return full, WaveOpResult(cfg.horizon, diag, converged, n, dt)


@dataclass
class ScatterReport:
    pre: ExpectationSet
    post: ExpectationSet
    delta_kinetic: float
    delta_angular: float
    delta_h_omega: float
    predicted_from_angular: float
    reflected: float
    transmitted: float
    absorbed: float
    unitarity_deficit: float
    T_minus: float
    T_plus: float
    dt: float
    omega: float
    residual_potential: float = math.nan
    incoming_potential: float = math.nan
    cauchy: float = math.nan
    specular_prediction: float = math.nan
    classical_delta_e: float = math.nan
    impact_parameter: float = math.nan
    speed: float = math.nan
    max_boundary_mass: float = math.nan
    flags: list = field(default_factory=list)

    @property
    def energy_in(self) -> float:
        return self.pre.kinetic

    @property
    def specular_ratio(self) -> float:
        """``|dE| / (2 |omega| b m v)``."""
        return abs(self.delta_kinetic) / self.specular_prediction

    @property
    def identity_error(self) -> float:
        """Relative mismatch between ``dE`` and ``omega * dJ``."""
        return abs(self.delta_kinetic - self.predicted_from_angular) / abs(self.delta_kinetic)

    def as_row(self) -> dict:
        row = {
            "E_in": self.pre.kinetic,
            "E_out": self.post.kinetic,
            "J_in": self.pre.angular,
            "J_out": self.post.angular,
            "dE_kin": self.delta_kinetic,
            "dJ": self.delta_angular,
            "dH_omega": self.delta_h_omega,
            "dE_pred_identity": self.predicted_from_angular,
            "dE_pred_specular": self.specular_prediction,
            "dE_classical": self.classical_delta_e,
            "reflected": self.reflected,
            "transmitted": self.transmitted,
            "absorbed": self.absorbed,
            "unitarity_deficit": self.unitarity_deficit,
            "residual_potential": self.residual_potential,
            "incoming_potential": self.incoming_potential,
            "cauchy": self.cauchy,
            "max_boundary_mass": self.max_boundary_mass,
            "T_minus": self.T_minus,
            "T_plus": self.T_plus,
            "dt": self.dt,
            "omega": self.omega,
            "b": self.impact_parameter,
            "v": self.speed,
            "flags": ";".join(self.flags),
        }
        return row


def _free_expectations(psi: WaveField, params: PhysParams,
                       tol: float = GUARD_TOLERANCE) -> ExpectationSet:
    return expectations(psi, None, 0.0, params, tol=tol)


def _direction_split(psi_out: WaveField, direction: np.ndarray) -> tuple[float, float]:
    """Momentum mass continuing along ``direction`` and mass turned back."""
    mom = psi_out.to_momentum()
    g = psi_out.grid
    dens = mom.density()
    total = dens.sum()
    along = g.p1 * direction[0] + g.p2 * direction[1]
    forward = float(dens[np.broadcast_to(along > 0, g.shape)].sum() / total)
    return 1.0 - forward, forward


def scattering_operator(psi_in: WaveField, T_minus: float, T_plus: float, dt: float,
                        V: PotentialSpec | None, params: PhysParams,
                        frame: str = "rotating", observe: bool = False,
                        guard_tol: float = GUARD_TOLERANCE
                        ) -> tuple[WaveField, ScatterReport, PropagationTrace]:
    """Outgoing asymptote ``e^{iH0 T+} U(T+, -T-) e^{iH0 T-} psi_in`` with its report.

    Mass fractions split the outgoing momentum distribution by the sign of
    its projection on the incoming mean momentum ("transmitted" keeps going,
    "reflected" turned back); ``absorbed`` is the lost norm.  ``guard_tol``
    bounds the boundary mass tolerated anywhere along the run.
    """
    m = params.m
    pre = _free_expectations(psi_in, params, guard_tol)
    p_in = _mean_momentum(psi_in)
    start = kinetic_phase(psi_in, -T_minus, m).to_position()
    check_guard(start, "scattering: incoming asymptote", tol=guard_tol)
    incoming = math.nan
    if V is not None and not isinstance(V, Zero):
        incoming = expectations(start, V, -T_minus, params, tol=guard_tol).potential
    mid, trace = propagate(start, -T_minus, T_plus, V, params, dt, frame, observe=observe,
                           cadence=max(1, int(round((T_minus + T_plus) / dt / 200))),
                           guard_tol=guard_tol)
    residual = math.nan
    if V is not None and not isinstance(V, Zero):
        residual = expectations(mid, V, T_plus, params, tol=guard_tol).potential
    out = kinetic_phase(mid, -T_plus, m).to_position()
    post = _free_expectations(out, params, guard_tol)
    nrm = norm(out)
    direction = p_in / np.hypot(*p_in) if np.hypot(*p_in) > 0 else np.array([1.0, 0.0])
    refl, trans = _direction_split(out, direction)
    absorbed = max(0.0, 1.0 - nrm**2)
    refl *= nrm**2
    trans *= nrm**2
    dE = post.kinetic - pre.kinetic
    dJ = post.angular - pre.angular
    n_steps, used_dt = steps_for(T_minus + T_plus, dt)
    rep = ScatterReport(
        pre=pre, post=post, delta_kinetic=dE, delta_angular=dJ,
        delta_h_omega=post.h_omega - pre.h_omega,
        predicted_from_angular=params.omega * dJ,
        reflected=refl, transmitted=trans, absorbed=absorbed,
        unitarity_deficit=abs(1.0 - nrm), T_minus=T_minus, T_plus=T_plus,
        dt=used_dt, omega=params.omega, residual_potential=residual,
        incoming_potential=incoming,
        max_boundary_mass=float(max(trace.boundary_mass, default=0.0)),
    )
    if absorbed > 1e-3:
        rep.flags.append("absorbed_mass")
    return out, rep, trace


def _mean_momentum(psi: WaveField) -> np.ndarray:
    mom = psi.to_momentum()
    g = psi.grid
    dens = mom.density()
    tot = dens.sum()
    return np.array([float((dens * g.p1).sum() / tot), float((dens * g.p2).sum() / tot)])


def position_moments(psi: WaveField) -> tuple[np.ndarray, np.ndarray]:
    """Centroid and per-axis standard deviation of ``|psi|^2``."""
    pos = psi.to_position()
    g = pos.grid
    dens = pos.density()
    tot = dens.sum()
    c1 = float((dens * g.x1).sum() / tot)
    c2 = float((dens * g.x2).sum() / tot)
    v1 = float((dens * (g.x1 - c1) ** 2).sum() / tot)
    v2 = float((dens * (g.x2 - c2) ** 2).sum() / tot)
    return np.array([c1, c2]), np.sqrt([v1, v2])


def momentum_moments(psi: WaveField) -> tuple[np.ndarray, np.ndarray]:
    mom = psi.to_momentum()
    g = psi.grid
    dens = mom.density()
    tot = dens.sum()
    c1 = float((dens * g.p1).sum() / tot)
    c2 = float((dens * g.p2).sum() / tot)
    v1 = float((dens * (g.p1 - c1) ** 2).sum() / tot)
    v2 = float((dens * (g.p2 - c2) ** 2).sum() / tot)
    return np.array([c1, c2]), np.sqrt([v1, v2])


def homega_conservation_test(psi_in: WaveField, V: PotentialSpec | None, params: PhysParams,
                             T_minus: float, T_plus: float, dt: float,
                             frame: str = "rotating") -> dict:
    """Change of ``<H_omega>`` between the free incoming and outgoing asymptotes."""
    _, rep, _ = scattering_operator(psi_in, T_minus, T_plus, dt, V, params, frame)
    return {
        "E_in": rep.pre.kinetic,
        "dE_kin": rep.delta_kinetic,
        "dJ": rep.delta_angular,
        "dH_omega": rep.delta_h_omega,
        "relative": abs(rep.delta_h_omega) / rep.pre.kinetic,
        "report": rep,
    }


def classical_blade_energy_change(b: float, v: float, omega: float, m: float = 1.0) -> float:
    """Kinetic-energy change of a ball reflecting off a rotating wall.

    The face point at height ``b`` moves along ``-e1`` with speed
    ``omega * b``; the ball arrives with velocity ``-v e1`` and leaves with
    speed ``v - 2 omega b``.
    """
    return 0.5 * m * ((v - 2.0 * omega * b) ** 2 - v**2)


def free_spread(sigma0: float, sigma_p: float, t: float, m: float = 1.0) -> float:
    return float(np.hypot(sigma0, sigma_p * t / m))


def clearance_time(distance: float, speed: float, sigma0: float, sigma_p: float,
                   m: float = 1.0, k: float = 5.0) -> float:
    """Smallest ``T`` with ``speed*T - k*sigma(T) >= distance`` for a spreading packet."""
    if speed <= k * sigma_p / m:
        raise ValueError("packet spreads faster than it travels; no finite clearance time")
    T = (distance + k * sigma0) / speed
    for _ in range(200):
        T_new = (distance + k * free_spread(sigma0, sigma_p, T, m)) / speed
        if abs(T_new - T) < 1e-10 * T_new:
            return T_new
        T = T_new
    return T


def blade_horizons(blade: Blade, b: float, v: float, omega: float, sigma0: float,
                   sigma_p: float, m: float = 1.0, k: float = 5.0) -> tuple[float, float]:
    """Horizons putting the free asymptotes ``k`` spreads clear of the blade's swept disk."""
    reach = blade.reach
    v_out = abs(v - 2.0 * omega * b)
    return (
        clearance_time(reach, v, sigma0, sigma_p, m, k),
        clearance_time(reach, v_out, sigma0, sigma_p, m, k),
    )


def blade_experiment(b: float, v: float, omega: float, blade: Blade, grid: Grid,
                     dt: float, horizons: tuple[float, float] | None = None,
                     m: float = 1.0, profile: Profile | None = None,
                     tail_tol: float = 1e-8, require_specular: bool = True,
                     transmission_limit: float = 1e-4, frame: str = "rotating",
                     packet: WaveField | None = None,
                     guard_tol: float = GUARD_TOLERANCE) -> ScatterReport:
    """Scatter an impact packet off the rotating blade and compare with the predictions.

    The incoming asymptote sits at ``(0, b)`` at time zero with momentum
    ``-m v e1``.  Reported predictions: the exact-identity value
    ``omega * dJ``, the specular magnitude ``2 |omega| b m v`` and the
    classical moving-wall energy change.
    """
    if not 0 < abs(b) < blade.B:
        raise ValueError(f"impact parameter {b} misses the blade (half length {blade.B})")
    if abs(omega) * blade.B >= v:
        raise ValueError("blade tip moves faster than the particle; no reflection regime")
    E_nominal = 0.5 * m * v**2
    if blade.V0 <= E_nominal:
        raise ReflectionRegimeError(
            f"barrier height {blade.V0} does not exceed the kinetic energy {E_nominal:.4g}")
    params = PhysParams(m, omega)
    psi = packet if packet is not None else make_packet_impact(grid, b, v, profile, m, tail_tol)
    if horizons is None:
        _, sx = position_moments(psi)
        _, sp = momentum_moments(psi)
        horizons = blade_horizons(blade, b, v, omega, float(sx.max()), float(sp.max()), m)
    T_minus, T_plus = horizons
    _, rep, _ = scattering_operator(psi, T_minus, T_plus, dt, blade, params, frame,
                                    guard_tol=guard_tol)
    rep.specular_prediction = 2.0 * abs(omega) * abs(b) * m * v
    rep.classical_delta_e = classical_blade_energy_change(b, v, omega, m)
    rep.impact_parameter = b
    rep.speed = v
    if omega != 0 and np.sign(rep.delta_kinetic) != np.sign(rep.classical_delta_e):
        rep.flags.append("sign_mismatch")
    if rep.transmitted > transmission_limit:
        rep.flags.append("transmission")
        if require_specular:
            raise ReflectionRegimeError(
                f"transmitted mass {rep.transmitted:.3e} exceeds {transmission_limit:g}", rep)
    return rep


@dataclass
class BoundednessCurve:
    times: np.ndarray
    kinetic: np.ndarray
    tail: np.ndarray
    E_star: float
    sup_ratio: float
    tail_ratio: float
    trend_slope: float
    trend_stderr: float
    absorbed: float
    periods: float

    def rows(self) -> list[dict]:
        return [
            {"t": float(t), "kinetic": float(k), "tail": float(q)}
            for t, k, q in zip(self.times, self.kinetic, self.tail)
        ]


def boundedness_monitor(psi: WaveField, V: PotentialSpec | None, params: PhysParams,
                        horizon: float, dt: float, samples: int = 200,
                        tail_factor: float = 4.0, frame: str = "rotating",
                        absorbed_limit: float = 1e-3) -> BoundednessCurve:
    """Sample ``<H0>`` and the tail above ``E* = tail_factor * <H0>(0)`` over ``[0, horizon]``.

    ``psi`` is the state at time zero (normally a wave-operator image).
    The trend is a least-squares line through the kinetic samples.
    """
    n, step = steps_for(horizon, dt)
    cadence = max(1, n // samples)
    n = cadence * int(np.ceil(n / cadence))
    step = horizon / n
    m = params.m
    e0 = expectations(psi, None, 0.0, params).kinetic
    E_star = tail_factor * e0
    a = psi.to_position()
    if frame == "rotating" and params.omega != 0.0:
        a = to_rotating_frame(a, 0.0, params.omega)
    grid = a.grid
    prop = SplitStepPropagator(grid, V, params, step, frame)
    times, kin, tail = [0.0], [e0], [energy_tail(a, E_star, m)]
    arr = a.values.copy()
    for k in range(1, n + 1):
        arr = prop.step(arr, (k - 1) * step)
        if k % cadence == 0:
            check_guard_array(arr, grid, f"boundedness monitor step {k}")
            # kinetic energy and the |p| tail are rotation invariant, so the
            # rotating-frame state serves directly
            field_k = WaveField(grid, arr)
            times.append(k * step)
            kin.append(expectations_array(arr, grid, params, None, guard=False).kinetic)
            tail.append(energy_tail(field_k, E_star, m))
    a = WaveField(grid, arr)
    times, kin, tail = np.array(times), np.array(kin), np.array(tail)
    A = np.vstack([times, np.ones_like(times)]).T
    coef, res, *_ = np.linalg.lstsq(A, kin, rcond=None)
    dof = max(1, len(times) - 2)
    resid = kin - A @ coef
    s2 = float(resid @ resid) / dof
    cov = s2 * np.linalg.inv(A.T @ A)
    absorbed = max(0.0, 1.0 - norm(a) ** 2)
    if absorbed > absorbed_limit:
        raise GuardError(f"boundedness window invalid: absorbed mass {absorbed:.3e}", absorbed)
    periods = horizon * abs(params.omega) / (2 * np.pi) if params.omega else math.nan
    tail0 = tail[0]
    return BoundednessCurve(
        times, kin, tail, E_star,
        sup_ratio=float(kin.max() / kin[0]),
        tail_ratio=float(tail.max() / tail0) if tail0 > 0 else math.inf,
        trend_slope=float(coef[0]), trend_stderr=float(np.sqrt(cov[0, 0])),
        absorbed=absorbed, periods=periods,
    )
