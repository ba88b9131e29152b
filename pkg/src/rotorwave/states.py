"""Wave packets: momentum-localized packets, impact packets and the domain sequence."""

from __future__ import annotations

from dataclasses import asdict, dataclass, field
from typing import Sequence

import numpy as np

from .grid import MOMENTUM, Grid, WaveField, inner, norm, transform
from .observables import apply_H0, apply_J, fit_power_law
from .potentials import _smooth_transition
from .spectral import GuardError, boundary_mass

DEFAULT_TAIL_TOLERANCE = 1e-8


class PacketError(ValueError):
    """A packet cannot be represented on the requested grid."""


class GridTooSmallError(PacketError):
    """The grid cannot hold a domain-sequence state; carries sizing hints."""

    def __init__(self, message, index=None, largest_index=None, required_n=None, required_L=None):
        super().__init__(message)
        self.index = index
        self.largest_index = largest_index
        self.required_n = required_n
        self.required_L = required_L


@dataclass(frozen=True)
class GaussianProfile:
    """``exp(-|q|^2 / (4 sigma_p^2))``: ``|psi_hat|^2`` has per-axis std ``sigma_p``.

    With ``cutoff`` set the profile is multiplied by a smooth window that is
    1 for ``|q| <= cutoff/2`` and vanishes for ``|q| >= cutoff``, giving exact
    compact support.
    """

    sigma_p: float
    cutoff: float | None = None
    kind: str = "gaussian"

    def __post_init__(self):
        if self.sigma_p <= 0:
            raise ValueError("sigma_p must be positive")
        if self.cutoff is not None and self.cutoff <= 0:
            raise ValueError("cutoff must be positive")

    def __call__(self, q1, q2):
        q2sum = q1**2 + q2**2
        out = np.exp(-q2sum / (4.0 * self.sigma_p**2))
        if self.cutoff is not None:
            out = out * _smooth_transition((np.sqrt(q2sum) - 0.5 * self.cutoff) / (0.5 * self.cutoff))
        return out

    @property
    def support_radius(self) -> float:
        return np.inf if self.cutoff is None else self.cutoff


@dataclass(frozen=True)
class BumpProfile:
    """``exp(1 - 1/(1 - (|q|/radius)^2))`` on ``|q| < radius``."""

    radius: float
    kind: str = "smooth_bump"

    def __post_init__(self):
        if self.radius <= 0:
            raise ValueError("bump radius must be positive")

    def __call__(self, q1, q2):
        u2 = (q1**2 + q2**2) / self.radius**2
        inside = u2 < 1.0
        uu = np.where(inside, u2, 0.0)
        return np.where(inside, np.exp(1.0 - 1.0 / (1.0 - uu)), 0.0)

    @property
    def support_radius(self) -> float:
        return self.radius


Profile = GaussianProfile | BumpProfile


def profile_from_dict(d: dict | None) -> Profile | None:
    if d is None:
        return None
    d = dict(d)
    kind = d.pop("kind", "gaussian")
    if kind == "gaussian":
        return GaussianProfile(**d)
    if kind == "smooth_bump":
        return BumpProfile(**d)
    raise ValueError(f"unknown momentum profile {kind!r}")


def gaussian_sigma_for_tail(radius: float, tol: float = DEFAULT_TAIL_TOLERANCE) -> float:
    """Largest ``sigma_p`` whose 2D Gaussian mass outside ``radius`` is below ``tol``.

    The mass outside radius ``R`` is ``exp(-R^2 / (2 sigma^2))``; a 2% safety
    factor covers lattice sampling.
    """
    return 0.98 * radius / np.sqrt(2.0 * np.log(1.0 / tol))


def _momentum_field(grid: Grid, values: np.ndarray) -> WaveField:
    psi = transform(WaveField(grid, values, MOMENTUM), "inverse")
    return psi.normalized()


def _shift_phase(grid: Grid, center: Sequence[float]) -> np.ndarray | float:
    c1, c2 = float(center[0]), float(center[1])
    if c1 == 0 and c2 == 0:
        return 1.0
    return np.exp(-1j * (grid.p1 * c1 + grid.p2 * c2))


def momentum_ball_mass(psi: WaveField, center: Sequence[float], radius: float) -> float:
    """Fraction of momentum mass outside ``|p - center| < radius``."""
    mom = psi.to_momentum()
    g = psi.grid
    dens = mom.density()
    outside = (g.p1 - center[0]) ** 2 + (g.p2 - center[1]) ** 2 >= radius**2
    return float(dens[outside].sum() / dens.sum())


def _check_ball_fits(grid: Grid, p0: np.ndarray, radius: float):
    reach = np.max(np.abs(p0)) + radius
    if reach >= grid.p_max:
        raise PacketError(
            f"momentum ball |p - {p0.tolist()}| < {radius:.4g} reaches {reach:.4g}, "
            f"beyond the lattice edge {grid.p_max:.4g}"
        )


def make_packet_D0(grid: Grid, v: Sequence[float], profile: Profile | None = None,
                   m: float = 1.0, center: Sequence[float] = (0.0, 0.0),
                   tail_tol: float = DEFAULT_TAIL_TOLERANCE) -> WaveField:
    """Packet with mean momentum ``m v`` concentrated inside ``B_{m|v|/3}(m v)``.

    The momentum mass outside that ball is measured on the lattice and must
    be below ``tail_tol``.  The default profile is the widest Gaussian that
    meets the tolerance.
    """
    v = np.asarray(v, dtype=float)
    speed = float(np.hypot(v[0], v[1]))
    if speed == 0:
        raise PacketError("packet velocity must be nonzero")
    p0 = m * v
    radius = m * speed / 3.0
    _check_ball_fits(grid, p0, radius)
    if profile is None:
        profile = GaussianProfile(gaussian_sigma_for_tail(radius, tail_tol))
    vals = profile(grid.p1 - p0[0], grid.p2 - p0[1]) * _shift_phase(grid, center)
    psi = _momentum_field(grid, vals)
    tail = momentum_ball_mass(psi, p0, radius)
    if tail > tail_tol:
        raise PacketError(
            f"momentum mass {tail:.3e} outside B_{{{radius:.4g}}}({p0.tolist()}) exceeds {tail_tol:g}"
        )
    return psi


def make_packet_impact(grid: Grid, b: float, v: float, profile: Profile | None = None,
                       m: float = 1.0, tail_tol: float = DEFAULT_TAIL_TOLERANCE) -> WaveField:
    """Packet sitting at ``(0, b)`` with momentum ``-m v e1`` at time zero.

    Momentum space: ``exp(-i b p2) * profile(p + m v e1)``.
    """
    if v <= 0:
        raise PacketError("impact packet speed must be positive")
    if abs(b) >= 0.3 * grid.L:
        raise PacketError(f"impact parameter {b} too large for box of side {grid.L}")
    return make_packet_D0(grid, (-v, 0.0), profile, m, (0.0, b), tail_tol)


DEFAULT_DOMAIN_PROFILE = GaussianProfile(sigma_p=0.06, cutoff=0.49)


def domain_center(n: int, omega: float, m: float = 1.0) -> float:
    """x2 coordinate of the domain-sequence state's centroid, ``-n / (2 m omega)``."""
    return -n / (2.0 * m * omega)


def _profile_extent(profile: Profile, tol: float = 1e-7) -> float:
    """Radius containing all but ``tol`` of the position mass of ``profile``."""
    # resolve the profile finely in momentum and widely in position
    g = Grid(512, 512 * np.pi / (8.0 * max(profile.support_radius if np.isfinite(profile.support_radius) else 6 * profile.sigma_p, 0.2)))
    psi = _momentum_field(g, profile(g.p1, g.p2))
    dens = psi.density().ravel()
    r = g.radius.ravel()
    order = np.argsort(r)
    cum = np.cumsum(dens[order]) / dens.sum()
    idx = np.searchsorted(cum, 1.0 - tol)
    return float(r[order][min(idx, r.size - 1)])


def make_domain_sequence(grid: Grid, omega: float, n: int, profile: Profile | None = None,
                         m: float = 1.0, guard_tol: float = 1e-6) -> WaveField:
    """Member ``n`` of the sequence ``exp(i n p2/(2 m omega)) psi0_hat(p - n e1)``.

    The profile must be radial with support inside ``|p| < 1/2``.  The state
    sits near ``x2 = -n/(2 m omega)`` with momentum near ``n e1``.
    """
    if omega == 0:
        raise PacketError("domain sequence needs a nonzero angular velocity")
    profile = profile or DEFAULT_DOMAIN_PROFILE
    if not profile.support_radius < 0.5:
        raise PacketError("domain-sequence profile must be supported inside |p| < 1/2")
    shift = n / (2.0 * m * omega)
    dp_margin = grid.dp
    largest_mom = int(np.floor(grid.p_max - dp_margin - 0.5))
    extent = None
    if n + 0.5 > grid.p_max - dp_margin:
        extent = _profile_extent(profile)
        raise _too_small(grid, omega, n, m, extent, largest_mom,
                         f"momentum lattice edge {grid.p_max:.4g} cannot hold |p| <= {n + 0.5}")
    vals = profile(grid.p1 - n, grid.p2) * np.exp(1j * shift * grid.p2)
    psi = _momentum_field(grid, vals)
    bm = boundary_mass(psi)
    if bm > guard_tol:
        extent = _profile_extent(profile)
        raise _too_small(grid, omega, n, m, extent, largest_mom,
                         f"state centred at |x2| = {abs(shift):.4g} has boundary mass {bm:.3e}")
    return psi


def _too_small(grid, omega, n, m, extent, largest_mom, reason):
    from .spectral import GUARD_RADIUS_FRACTION as frac

    need_L = (abs(n / (2 * m * omega)) + extent) / frac
    need_dx = np.pi / (n + 0.5 + 2 * np.pi / need_L + 0.5)
    need_n = int(2 ** np.ceil(np.log2(max(need_L / need_dx, 8))))
    largest_pos = int(np.floor((frac * grid.L - extent) * 2 * m * abs(omega)))
    largest = max(-1, min(largest_mom, largest_pos))
    return GridTooSmallError(
        f"grid n={grid.n}, L={grid.L:g} too small for index {n}: {reason}; "
        f"largest index that fits this grid is {largest}; index {n} needs about "
        f"L >= {need_L:.4g} with n >= {need_n}",
        index=n, largest_index=largest, required_n=need_n, required_L=need_L,
    )


@dataclass
class DomainScalingReport:
    n_values: np.ndarray
    h0_norm: np.ndarray
    j_norm: np.ndarray
    homega_norm: np.ndarray
    cross_term: np.ndarray
    slopes: dict = field(default_factory=dict)

    def rows(self) -> list[dict]:
        return [
            {"n": int(n), "h0_norm": float(a), "j_norm": float(b), "homega_norm": float(c)}
            for n, a, b, c in zip(self.n_values, self.h0_norm, self.j_norm, self.homega_norm)
        ]


def domain_scaling_report(grid: Grid, omega: float, n_values: Sequence[int],
                          m: float = 1.0, profile: Profile | None = None) -> DomainScalingReport:
    """Norms of ``H0``, ``J`` and ``H_omega = H0 - omega J`` on the domain sequence."""
    ns, h0s, js, hws, cross = [], [], [], [], []
    for n in n_values:
        psi = make_domain_sequence(grid, omega, n, profile, m)
        h0 = apply_H0(psi, m)
        Jp = apply_J(psi)
        hw = h0.with_values(h0.values - omega * Jp.values)
        ns.append(n)
        h0s.append(norm(h0))
        js.append(norm(Jp))
        hws.append(norm(hw))
        cross.append(inner(h0, Jp).real)
    ns = np.array(ns, dtype=float)
    rep = DomainScalingReport(ns, np.array(h0s), np.array(js), np.array(hws), np.array(cross))
    if len(ns) >= 2:
        rep.slopes = {
            "h0": fit_power_law(ns, rep.h0_norm)[0],
            "j": fit_power_law(ns, rep.j_norm)[0],
            "homega": fit_power_law(ns, rep.homega_norm)[0],
        }
    return rep
