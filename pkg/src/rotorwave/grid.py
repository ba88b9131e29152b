"""Square periodic grids, wave fields and the unitary Fourier transform.

Axis 0 of every array is the x1 coordinate and axis 1 is x2 (``ij``
indexing).  Sample ``j`` on an axis sits at ``(j - n/2) * dx`` so the origin
is a lattice point.  Momentum samples are stored in FFT order with
``p_k = 2*pi*k/L`` for signed ``k``.

The momentum representation carries the phase ``(-1)**(k1 + k2)`` that makes
it the transform relative to the physical origin rather than relative to the
first lattice site.  A field built in momentum space as ``f(p)`` is therefore
centred at ``x = 0`` in position space.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np
import scipy.fft as sfft

POSITION = "position"
MOMENTUM = "momentum"
_REPRESENTATIONS = (POSITION, MOMENTUM)


class GridMismatchError(ValueError):
    """Raised when two fields on different grids are combined."""


class RepresentationError(ValueError):
    """Raised when a field is in the wrong representation for an operation."""


def _is_power_of_two(n: int) -> bool:
    return n > 0 and (n & (n - 1)) == 0


@dataclass(frozen=True)
class Grid:
    """Square ``n x n`` lattice of side ``L`` with periodic boundary."""

    n: int
    L: float

    def __post_init__(self):
        if isinstance(self.n, bool) or int(self.n) != self.n:
            raise ValueError(f"grid size must be an integer, got {self.n!r}")
        n = int(self.n)
        if not _is_power_of_two(n) or n < 8:
            raise ValueError(f"grid size must be a power of two >= 8, got {n}")
        if not np.isfinite(self.L) or self.L <= 0:
            raise ValueError(f"box side must be positive, got {self.L!r}")
        object.__setattr__(self, "n", n)
        object.__setattr__(self, "L", float(self.L))

    @property
    def dx(self) -> float:
        return self.L / self.n

    @property
    def dp(self) -> float:
        return 2.0 * np.pi / self.L

    @property
    def p_max(self) -> float:
        """Largest representable momentum magnitude per axis, ``pi/dx``."""
        return np.pi / self.dx

    @property
    def shape(self) -> tuple[int, int]:
        return (self.n, self.n)

    @property
    def points(self) -> int:
        return self.n * self.n

    @cached_property
    def x(self) -> np.ndarray:
        """Coordinate samples along one axis, ascending, origin included."""
        return (np.arange(self.n) - self.n // 2) * self.dx

    @cached_property
    def p(self) -> np.ndarray:
        """Momentum samples along one axis in FFT order."""
        return 2.0 * np.pi * sfft.fftfreq(self.n, d=self.dx)

    @cached_property
    def p_derivative(self) -> np.ndarray:
        """Momentum samples with the Nyquist entry zeroed (odd-order use)."""
        p = self.p.copy()
        p[self.n // 2] = 0.0
        return p

    @cached_property
    def x1(self) -> np.ndarray:
        """x1 coordinate as an ``(n, 1)`` column for broadcasting."""
        return self.x[:, None]

    @cached_property
    def x2(self) -> np.ndarray:
        """x2 coordinate as a ``(1, n)`` row for broadcasting."""
        return self.x[None, :]

    @cached_property
    def p1(self) -> np.ndarray:
        return self.p[:, None]

    @cached_property
    def p2(self) -> np.ndarray:
        return self.p[None, :]

    @cached_property
    def p_squared(self) -> np.ndarray:
        """``|p|^2`` on the full momentum lattice."""
        return self.p1**2 + self.p2**2

    @cached_property
    def radius(self) -> np.ndarray:
        """``|x|`` on the full position lattice."""
        return np.hypot(self.x1, self.x2)

    @cached_property
    def origin_phase(self) -> np.ndarray:
        """``(-1)**(k1 + k2)`` relating raw FFT output to the origin-centred transform."""
        s = 1.0 - 2.0 * (np.arange(self.n) % 2)
        return s[:, None] * s[None, :]

    def meshgrid(self) -> tuple[np.ndarray, np.ndarray]:
        """Full ``(n, n)`` coordinate arrays ``(X1, X2)``."""
        return np.meshgrid(self.x, self.x, indexing="ij")

    def momentum_meshgrid(self) -> tuple[np.ndarray, np.ndarray]:
        return np.meshgrid(self.p, self.p, indexing="ij")


def make_grid(n: int, L: float) -> Grid:
    """Build a square grid with ``n`` points per axis and side ``L``."""
    return Grid(n, L)


@dataclass(frozen=True)
class PhysParams:
    """Mass and (signed) angular velocity of the rotating potential."""

    m: float = 1.0
    omega: float = 0.0

    def __post_init__(self):
        if not np.isfinite(self.m) or self.m <= 0:
            raise ValueError(f"mass must be positive, got {self.m!r}")
        if not np.isfinite(self.omega):
            raise ValueError(f"angular velocity must be finite, got {self.omega!r}")
        object.__setattr__(self, "m", float(self.m))
        object.__setattr__(self, "omega", float(self.omega))


@dataclass(frozen=True, eq=False)
class WaveField:
    """Samples of a wave function on ``grid`` in one representation."""

    grid: Grid
    values: np.ndarray
    rep: str = POSITION

    def __post_init__(self):
        if self.rep not in _REPRESENTATIONS:
            raise RepresentationError(f"unknown representation {self.rep!r}")
        values = np.asarray(self.values, dtype=np.complex128)
        if values.shape != self.grid.shape:
            raise ValueError(
                f"values have shape {values.shape}, grid expects {self.grid.shape}"
            )
        object.__setattr__(self, "values", values)

    def copy(self) -> "WaveField":
        return WaveField(self.grid, self.values.copy(), self.rep)

    def with_values(self, values: np.ndarray) -> "WaveField":
        return WaveField(self.grid, values, self.rep)

    def to_position(self) -> "WaveField":
        return self if self.rep == POSITION else transform(self, "inverse")

    def to_momentum(self) -> "WaveField":
        return self if self.rep == MOMENTUM else transform(self, "forward")

    def density(self) -> np.ndarray:
        """``|psi|^2`` in the current representation."""
        v = self.values
        return v.real**2 + v.imag**2

    def normalized(self) -> "WaveField":
        nrm = norm(self)
        if nrm == 0:
            raise ValueError("cannot normalize the zero field")
        return self.with_values(self.values / nrm)


# Raw array kernels.  ``a`` is always a position-space array unless a name
# says otherwise; the momentum arrays here omit the origin phase, which is
# harmless for any diagonal multiplier.

def fft2(a: np.ndarray) -> np.ndarray:
    return sfft.fft2(a, norm="ortho")


def ifft2(a: np.ndarray) -> np.ndarray:
    return sfft.ifft2(a, norm="ortho")


def apply_momentum_multiplier(a: np.ndarray, multiplier: np.ndarray) -> np.ndarray:
    """Return ``ifft2(fft2(a) * multiplier)`` without extra temporaries."""
    b = sfft.fft2(a, norm="ortho")
    b *= multiplier
    return sfft.ifft2(b, norm="ortho", overwrite_x=True)


def apply_axis_multiplier(a: np.ndarray, multiplier: np.ndarray, axis: int) -> np.ndarray:
    """One-axis transform, multiply, inverse.  ``axis`` is the array axis."""
    b = sfft.fft(a, axis=axis, norm="ortho")
    b *= multiplier
    return sfft.ifft(b, axis=axis, norm="ortho", overwrite_x=True)


def transform(psi: WaveField, direction: str = "forward") -> WaveField:
    """Unitary Fourier transform between position and momentum samples.

    ``direction`` is ``"forward"`` (position to momentum) or ``"inverse"``.
    """
    if direction in ("forward", "fwd"):
        if psi.rep != POSITION:
            raise RepresentationError("forward transform needs a position-space field")
        out = fft2(psi.values)
        out *= psi.grid.origin_phase
        return WaveField(psi.grid, out, MOMENTUM)
    if direction in ("inverse", "inv"):
        if psi.rep != MOMENTUM:
            raise RepresentationError("inverse transform needs a momentum-space field")
        return WaveField(psi.grid, ifft2(psi.values * psi.grid.origin_phase), POSITION)
    raise ValueError(f"unknown transform direction {direction!r}")


def _check_compatible(psi: WaveField, phi: WaveField) -> None:
    if psi.grid != phi.grid:
        raise GridMismatchError(f"grids differ: {psi.grid} vs {phi.grid}")
    if psi.rep != phi.rep:
        raise RepresentationError(
            f"representations differ: {psi.rep} vs {phi.rep}"
        )


def inner(psi: WaveField, phi: WaveField) -> complex:
    """``<psi, phi>`` with the ``dx^2`` weight, antilinear in ``psi``."""
    _check_compatible(psi, phi)
    return complex(np.vdot(psi.values, phi.values) * psi.grid.dx**2)


def norm(psi: WaveField) -> float:
    v = psi.values.ravel()
    return float(np.sqrt(np.vdot(v, v).real) * psi.grid.dx)


def mass(psi: WaveField) -> float:
    """Squared norm."""
    return norm(psi) ** 2
