"""Closed-form potential families and their rotating evaluation.

Every potential is a real function of ``(x1, x2)`` that broadcasts over numpy
arrays.  A potential rotating counterclockwise with angular velocity ``omega``
is ``V_t(x) = V(R_{omega t}^{-1} x)``.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass, field
from typing import Callable, ClassVar

import numpy as np

_REGISTRY: dict[str, type["PotentialSpec"]] = {}


def _register(cls):
    _REGISTRY[cls.kind] = cls
    return cls


def _smooth_transition(t):
    """C-infinity step: 1 for ``t <= 0``, 0 for ``t >= 1``."""
    t = np.clip(t, 0.0, 1.0)
    with np.errstate(divide="ignore", over="ignore", invalid="ignore"):
        a = np.where(t < 1.0, np.exp(-1.0 / np.where(t < 1.0, 1.0 - t, 1.0)), 0.0)
        b = np.where(t > 0.0, np.exp(-1.0 / np.where(t > 0.0, t, 1.0)), 0.0)
    return a / (a + b)


def _smooth_transition_derivative(t):
    t = np.asarray(t, dtype=float)
    inside = (t > 0.0) & (t < 1.0)
    tt = np.where(inside, t, 0.5)
    u = 1.0 - tt
    a = np.exp(-1.0 / u)
    b = np.exp(-1.0 / tt)
    da = -a / u**2
    db = b / tt**2
    d = (da * b - a * db) / (a + b) ** 2
    return np.where(inside, d, 0.0)


def smooth_edge(u):
    """Step falling from 1 at ``u <= -3`` to 0 at ``u >= 3``; equals 1/2 at 0."""
    return _smooth_transition((np.asarray(u, dtype=float) + 3.0) / 6.0)


def smooth_edge_derivative(u):
    return _smooth_transition_derivative((np.asarray(u, dtype=float) + 3.0) / 6.0) / 6.0


def rotate_points(x1, x2, angle: float):
    """Coordinates of ``R_angle x`` (counterclockwise)."""
    c, s = np.cos(angle), np.sin(angle)
    return c * x1 - s * x2, s * x1 + c * x2


class PotentialSpec:
    """Base class: subclasses implement :meth:`evaluate` and usually :meth:`gradient`."""

    kind: ClassVar[str] = "abstract"
    is_radial: ClassVar[bool] = False
    phi_step: ClassVar[float] = 1e-5

    def evaluate(self, x1, x2):
        raise NotImplementedError

    def __call__(self, x1, x2):
        return self.evaluate(x1, x2)

    def gradient(self, x1, x2):
        """``(d1 V, d2 V)``; ``None`` when no closed form exists."""
        return None

    def azimuthal_derivative(self, x1, x2):
        """``x1 * d2 V - x2 * d1 V``.

        Falls back to a central difference in the polar angle when the
        variant has no analytic gradient.
        """
        x1 = np.asarray(x1, dtype=float)
        x2 = np.asarray(x2, dtype=float)
        grad = self.gradient(x1, x2)
        if grad is not None:
            out = x1 * grad[1] - x2 * grad[0]
        else:
            h = self.phi_step
            ap1, ap2 = rotate_points(x1, x2, h)
            am1, am2 = rotate_points(x1, x2, -h)
            out = (self.evaluate(ap1, ap2) - self.evaluate(am1, am2)) / (2.0 * h)
        return np.where((x1 == 0) & (x2 == 0), 0.0, out)

    def rotated(self, angle: float) -> "PotentialSpec | None":
        """Closed-form description of ``x -> V(R_angle^{-1} x)`` if the family allows it."""
        return None

    def sup_bound(self) -> float:
        """An upper bound for ``sup |V|`` used for step-size heuristics."""
        raise NotImplementedError

    def to_dict(self) -> dict:
        d = asdict(self)
        for k, v in d.items():
            if isinstance(v, tuple):
                d[k] = list(v)
        return {"kind": self.kind, **d}

    @staticmethod
    def from_dict(d: dict) -> "PotentialSpec":
        d = dict(d)
        kind = d.pop("kind", None)
        if kind not in _REGISTRY:
            raise ValueError(f"unknown potential kind {kind!r}; known: {sorted(_REGISTRY)}")
        cls = _REGISTRY[kind]
        for k, v in list(d.items()):
            if isinstance(v, list):
                d[k] = tuple(v)
        try:
            return cls(**d)
        except TypeError as exc:
            raise ValueError(f"bad parameters for potential {kind!r}: {exc}") from None


def _require(cond: bool, msg: str):
    if not cond:
        raise ValueError(msg)


@_register
@dataclass(frozen=True)
class Zero(PotentialSpec):
    kind: ClassVar[str] = "zero"
    is_radial: ClassVar[bool] = True

    def evaluate(self, x1, x2):
        return np.zeros(np.broadcast(np.asarray(x1), np.asarray(x2)).shape)

    def gradient(self, x1, x2):
        z = self.evaluate(x1, x2)
        return z, z

    def rotated(self, angle):
        return self

    def sup_bound(self):
        return 0.0


@_register
@dataclass(frozen=True)
class GaussianBump(PotentialSpec):
    """``V0 * exp(-|x - center|^2 / (2 width^2))``."""

    kind: ClassVar[str] = "gaussian_bump"
    V0: float = 1.0
    center: tuple[float, float] = (0.0, 0.0)
    width: float = 1.0

    def __post_init__(self):
        _require(self.width > 0, "GaussianBump width must be positive")
        object.__setattr__(self, "center", tuple(float(c) for c in self.center))

    @property
    def is_radial(self):
        return self.center == (0.0, 0.0)

    def evaluate(self, x1, x2):
        c1, c2 = self.center
        k = -0.5 / self.width**2
        # separable form keeps broadcasting cheap on grids
        return self.V0 * np.exp(k * (np.asarray(x1) - c1) ** 2) * np.exp(k * (np.asarray(x2) - c2) ** 2)

    def gradient(self, x1, x2):
        v = self.evaluate(x1, x2)
        c1, c2 = self.center
        w2 = self.width**2
        return -(np.asarray(x1) - c1) / w2 * v, -(np.asarray(x2) - c2) / w2 * v

    def rotated(self, angle):
        c1, c2 = rotate_points(self.center[0], self.center[1], angle)
        return GaussianBump(self.V0, (float(c1), float(c2)), self.width)

    def sup_bound(self):
        return abs(self.V0)


@_register
@dataclass(frozen=True)
class Blade(PotentialSpec):
    """Plateau of height ``V0`` on the strip ``|x1| <= w``, ``|x2| <= B``.

    Both edges fall off smoothly over ``[-3s, 3s]`` around the nominal
    boundary, so the support lies inside ``|x1| <= w+3s, |x2| <= B+3s``.
    """

    kind: ClassVar[str] = "blade"
    V0: float = 100.0
    w: float = 0.25
    B: float = 5.0
    s: float = 0.05

    def __post_init__(self):
        _require(self.w > 0 and self.B > 0 and self.s > 0, "Blade w, B, s must be positive")
        _require(self.w > 3 * self.s and self.B > 3 * self.s,
                 "Blade edges wider than the blade itself (need w, B > 3s)")

    def _factors(self, x1, x2):
        e1 = smooth_edge((np.abs(x1) - self.w) / self.s)
        e2 = smooth_edge((np.abs(x2) - self.B) / self.s)
        return e1, e2

    def evaluate(self, x1, x2):
        e1, e2 = self._factors(np.asarray(x1, dtype=float), np.asarray(x2, dtype=float))
        return self.V0 * e1 * e2

    def gradient(self, x1, x2):
        x1 = np.asarray(x1, dtype=float)
        x2 = np.asarray(x2, dtype=float)
        e1, e2 = self._factors(x1, x2)
        d1 = smooth_edge_derivative((np.abs(x1) - self.w) / self.s) * np.sign(x1) / self.s
        d2 = smooth_edge_derivative((np.abs(x2) - self.B) / self.s) * np.sign(x2) / self.s
        return self.V0 * d1 * e2, self.V0 * e1 * d2

    def sup_bound(self):
        return abs(self.V0)

    @property
    def reach(self) -> float:
        """Radius of the disk swept by the rotating support."""
        return float(np.hypot(self.w + 3 * self.s, self.B + 3 * self.s))


@_register
@dataclass(frozen=True)
class AnisotropicProduct(PotentialSpec):
    """``V1(x1) * V2(x2)`` concentrated near the x1 axis.

    ``V1 = amplitude * (1 + (x1/core)^2)^(-exponent/2)`` and ``V2`` is the
    compactly supported bump ``exp(1 - 1/(1 - (x2/d)^2))`` on ``|x2| < d``.
    """

    kind: ClassVar[str] = "anisotropic_product"
    amplitude: float = 1.0
    exponent: float = 2.0
    core: float = 1.0
    d: float = 1.0

    def __post_init__(self):
        _require(self.core > 0 and self.d > 0, "AnisotropicProduct core and d must be positive")

    def v1(self, x1):
        return self.amplitude * (1.0 + (np.asarray(x1, dtype=float) / self.core) ** 2) ** (-0.5 * self.exponent)

    def v1_derivative(self, x1):
        x1 = np.asarray(x1, dtype=float)
        base = 1.0 + (x1 / self.core) ** 2
        return -self.amplitude * self.exponent * x1 / self.core**2 * base ** (-0.5 * self.exponent - 1.0)

    def v2(self, x2):
        u = np.asarray(x2, dtype=float) / self.d
        inside = np.abs(u) < 1.0
        uu = np.where(inside, u, 0.0)
        return np.where(inside, np.exp(1.0 - 1.0 / (1.0 - uu**2)), 0.0)

    def v2_derivative(self, x2):
        u = np.asarray(x2, dtype=float) / self.d
        inside = np.abs(u) < 1.0
        uu = np.where(inside, u, 0.0)
        q = 1.0 - uu**2
        val = np.exp(1.0 - 1.0 / q) * (-2.0 * uu / q**2) / self.d
        return np.where(inside, val, 0.0)

    def evaluate(self, x1, x2):
        return self.v1(x1) * self.v2(x2)

    def gradient(self, x1, x2):
        return self.v1_derivative(x1) * self.v2(x2), self.v1(x1) * self.v2_derivative(x2)

    def sup_bound(self):
        return abs(self.amplitude)


@_register
@dataclass(frozen=True)
class SectorOscillation(PotentialSpec):
    """``cos(r^alpha * phi) / (r^2 ln^2 r)`` inside an angular sector, beyond ``r0``.

    The sector ``[phi_min, phi_max]`` (within ``(-pi, pi)``, angle from
    ``atan2``) has smooth tapers of angular width ``taper`` at both sides, and
    the radial onset rises smoothly over ``[r0, r0 + 1]``.  The potential is
    identically zero for ``r <= r0``.
    """

    kind: ClassVar[str] = "sector_oscillation"
    alpha: float = 1.0
    phi_min: float = -np.pi / 2
    phi_max: float = np.pi / 2
    r0: float = 2.0
    taper: float = 0.2

    def __post_init__(self):
        _require(self.r0 >= 2.0, "SectorOscillation needs r0 >= 2")
        _require(-np.pi < self.phi_min < self.phi_max < np.pi, "sector must lie inside (-pi, pi)")
        _require(0 < 2 * self.taper <= self.phi_max - self.phi_min, "taper too wide for sector")

    def _window(self, phi):
        lo = 1.0 - _smooth_transition((phi - self.phi_min) / self.taper)
        hi = _smooth_transition((phi - (self.phi_max - self.taper)) / self.taper)
        return lo * hi

    def _window_derivative(self, phi):
        lo = 1.0 - _smooth_transition((phi - self.phi_min) / self.taper)
        hi = _smooth_transition((phi - (self.phi_max - self.taper)) / self.taper)
        dlo = -_smooth_transition_derivative((phi - self.phi_min) / self.taper) / self.taper
        dhi = _smooth_transition_derivative((phi - (self.phi_max - self.taper)) / self.taper) / self.taper
        return dlo * hi + lo * dhi

    def _radial(self, r):
        onset = 1.0 - _smooth_transition(r - self.r0)
        rr = np.where(r > self.r0, r, 2.0 * self.r0)
        return np.where(r > self.r0, onset / (rr**2 * np.log(rr) ** 2), 0.0)

    def evaluate(self, x1, x2):
        x1 = np.asarray(x1, dtype=float)
        x2 = np.asarray(x2, dtype=float)
        r = np.hypot(x1, x2)
        phi = np.arctan2(x2, x1)
        return np.cos(r**self.alpha * phi) * self._window(phi) * self._radial(r)

    def azimuthal_derivative(self, x1, x2):
        x1 = np.asarray(x1, dtype=float)
        x2 = np.asarray(x2, dtype=float)
        r = np.hypot(x1, x2)
        phi = np.arctan2(x2, x1)
        k = r**self.alpha
        ang = -k * np.sin(k * phi) * self._window(phi) + np.cos(k * phi) * self._window_derivative(phi)
        return ang * self._radial(r)

    def sup_bound(self):
        return 1.0 / (self.r0**2 * np.log(self.r0) ** 2)


@_register
@dataclass(frozen=True)
class PowerLaw(PotentialSpec):
    """``V0 * (1 + (|x - center|/core)^2)^(-beta/2)``."""

    kind: ClassVar[str] = "power_law"
    V0: float = 1.0
    beta: float = 4.0
    core: float = 1.0
    center: tuple[float, float] = (0.0, 0.0)

    def __post_init__(self):
        _require(self.core > 0, "PowerLaw core must be positive")
        _require(self.beta > 0, "PowerLaw exponent must be positive")
        object.__setattr__(self, "center", tuple(float(c) for c in self.center))

    @property
    def is_radial(self):
        return self.center == (0.0, 0.0)

    def evaluate(self, x1, x2):
        r2 = (np.asarray(x1, dtype=float) - self.center[0]) ** 2 + (np.asarray(x2, dtype=float) - self.center[1]) ** 2
        return self.V0 * (1.0 + r2 / self.core**2) ** (-0.5 * self.beta)

    def gradient(self, x1, x2):
        y1 = np.asarray(x1, dtype=float) - self.center[0]
        y2 = np.asarray(x2, dtype=float) - self.center[1]
        base = 1.0 + (y1**2 + y2**2) / self.core**2
        f = -self.V0 * self.beta / self.core**2 * base ** (-0.5 * self.beta - 1.0)
        return f * y1, f * y2

    def rotated(self, angle):
        c1, c2 = rotate_points(self.center[0], self.center[1], angle)
        return PowerLaw(self.V0, self.beta, self.core, (float(c1), float(c2)))

    def sup_bound(self):
        return abs(self.V0)


@_register
@dataclass(frozen=True)
class DipolePeaks(PotentialSpec):
    """Pairs of opposite-sign Gaussian peaks along the positive x1 axis.

    Pair ``k`` sits at radius ``r_k = r_first + k * spacing`` with half
    separation ``delta_k = width0 * (r_first / r_k) ** shrink``; each peak has
    standard deviation ``delta_k / 2``.  Peaks keep height ``V0`` while
    becoming thinner and closer, so the sup outside any radius stays put.
    """

    kind: ClassVar[str] = "dipole_peaks"
    V0: float = 1.0
    r_first: float = 2.0
    spacing: float = 2.0
    count: int = 12
    width0: float = 1.0
    shrink: float = 0.5

    def __post_init__(self):
        _require(self.r_first > 0 and self.spacing > 0 and self.width0 > 0, "DipolePeaks lengths must be positive")
        _require(int(self.count) >= 1, "DipolePeaks needs at least one pair")

    def pairs(self):
        k = np.arange(int(self.count))
        r = self.r_first + k * self.spacing
        return r, self.width0 * (self.r_first / r) ** self.shrink

    def _terms(self, x1, x2):
        x1 = np.asarray(x1, dtype=float)
        x2 = np.asarray(x2, dtype=float)
        for rk, dk in zip(*self.pairs()):
            sd2 = (0.5 * dk) ** 2
            for sign, c in ((1.0, rk + dk), (-1.0, rk - dk)):
                g = sign * self.V0 * np.exp(-((x1 - c) ** 2 + x2**2) / (2 * sd2))
                yield g, c, sd2

    def evaluate(self, x1, x2):
        out = np.zeros(np.broadcast(np.asarray(x1), np.asarray(x2)).shape)
        for g, _, _ in self._terms(x1, x2):
            out = out + g
        return out

    def gradient(self, x1, x2):
        x1 = np.asarray(x1, dtype=float)
        x2 = np.asarray(x2, dtype=float)
        shape = np.broadcast(x1, x2).shape
        d1 = np.zeros(shape)
        d2 = np.zeros(shape)
        for g, c, sd2 in self._terms(x1, x2):
            d1 = d1 - (x1 - c) / sd2 * g
            d2 = d2 - x2 / sd2 * g
        return d1, d2

    def sup_bound(self):
        return abs(self.V0)


@dataclass(frozen=True)
class NonInvariantPart(PotentialSpec):
    """``V - V_inv``: the part of ``base`` with zero angular average."""

    kind: ClassVar[str] = "noninvariant_part"
    base: PotentialSpec = field(default_factory=Zero)
    n_theta: int = 256

    def evaluate(self, x1, x2):
        x1 = np.asarray(x1, dtype=float)
        x2 = np.asarray(x2, dtype=float)
        r = np.hypot(x1, x2)
        return self.base.evaluate(x1, x2) - invariant_split(self.base, r, self.n_theta)

    def sup_bound(self):
        return 2.0 * self.base.sup_bound()

    def to_dict(self):
        return {"kind": self.kind, "base": self.base.to_dict(), "n_theta": self.n_theta}


def evaluate(V: PotentialSpec, x1, x2):
    """``V(x)`` at broadcastable coordinate arrays."""
    return V.evaluate(x1, x2)


def evaluate_rotating(V: PotentialSpec, x1, x2, t: float, omega: float):
    """``V(R_{omega t}^{-1} x)`` by closed-form coordinate rotation."""
    angle = omega * t
    if angle == 0.0 or V.is_radial:
        return V.evaluate(x1, x2)
    rot = V.rotated(angle)
    if rot is not None:
        return rot.evaluate(x1, x2)
    y1, y2 = rotate_points(x1, x2, -angle)
    return V.evaluate(y1, y2)


def azimuthal_derivative(V: PotentialSpec, x1, x2):
    return V.azimuthal_derivative(x1, x2)


def invariant_split(V: PotentialSpec | Callable, r, n_theta: int = 256):
    """Angular average of ``V`` over the circle of radius ``r``.

    Periodic trapezoid rule with ``n_theta`` nodes, exact for angular
    harmonics below ``n_theta / 2``.  ``r`` may be an array.
    """
    if n_theta < 64:
        raise ValueError(f"n_theta must be >= 64, got {n_theta}")
    f = V.evaluate if isinstance(V, PotentialSpec) else V
    r = np.asarray(r, dtype=float)
    theta = 2.0 * np.pi * np.arange(n_theta) / n_theta
    rr = r[..., None]
    vals = f(rr * np.cos(theta), rr * np.sin(theta))
    return vals.mean(axis=-1)


def noninvariant_part(V: PotentialSpec, n_theta: int = 256) -> NonInvariantPart:
    return NonInvariantPart(V, n_theta)
