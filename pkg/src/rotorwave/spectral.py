"""Exactly unitary elementary operations: free phase, shears and rotations."""

from __future__ import annotations

import numpy as np

from .grid import (
    POSITION,
    Grid,
    RepresentationError,
    WaveField,
    apply_axis_multiplier,
    apply_momentum_multiplier,
    transform,
)

GUARD_RADIUS_FRACTION = 0.35
GUARD_TOLERANCE = 1e-6
MAX_SHEAR = 1.2


class GuardError(RuntimeError):
    """Raised when a field has too much mass near the periodic boundary."""

    def __init__(self, message: str, boundary_mass: float):
        super().__init__(message)
        self.boundary_mass = boundary_mass


def boundary_mass(psi: WaveField, fraction: float = GUARD_RADIUS_FRACTION) -> float:
    """Fraction of the mass outside the central disk of radius ``fraction * L``."""
    psi = psi.to_position()
    return boundary_mass_array(psi.values, psi.grid, fraction)


def boundary_mass_array(a: np.ndarray, grid: Grid, fraction: float = GUARD_RADIUS_FRACTION) -> float:
    dens = a.real**2 + a.imag**2
    total = dens.sum()
    if total == 0:
        return 0.0
    outside = dens[grid.radius > fraction * grid.L].sum()
    return float(outside / total)


def box_boundary_mass(psi: WaveField, fraction: float = 0.45) -> float:
    """Fraction of the mass outside the centred square ``|x_i| <= fraction * L``."""
    psi = psi.to_position()
    g = psi.grid
    dens = psi.density()
    total = dens.sum()
    if total == 0:
        return 0.0
    inside_1 = np.abs(g.x) <= fraction * g.L
    inside = dens[np.ix_(inside_1, inside_1)].sum()
    return float(1.0 - inside / total)


def check_guard(psi: WaveField, what: str = "operation",
                fraction: float = GUARD_RADIUS_FRACTION,
                tol: float = GUARD_TOLERANCE) -> None:
    bm = boundary_mass(psi, fraction)
    if bm > tol:
        raise GuardError(
            f"{what}: boundary mass {bm:.3e} outside radius {fraction:g}*L exceeds {tol:g}",
            bm,
        )


def check_guard_array(a: np.ndarray, grid: Grid, what: str = "operation",
                      fraction: float = GUARD_RADIUS_FRACTION,
                      tol: float = GUARD_TOLERANCE) -> None:
    bm = boundary_mass_array(a, grid, fraction)
    if bm > tol:
        raise GuardError(
            f"{what}: boundary mass {bm:.3e} outside radius {fraction:g}*L exceeds {tol:g}",
            bm,
        )


def kinetic_multiplier(grid: Grid, dt: float, m: float) -> np.ndarray:
    """``exp(-i dt |p|^2 / 2m)`` on the momentum lattice."""
    return np.exp((-0.5j * dt / m) * grid.p_squared)


def kinetic_phase(psi: WaveField, dt: float, m: float = 1.0) -> WaveField:
    """Free evolution ``exp(-i dt H0) psi``; the result keeps ``psi``'s representation."""
    mult = kinetic_multiplier(psi.grid, dt, m)
    if psi.rep == POSITION:
        return WaveField(psi.grid, apply_momentum_multiplier(psi.values, mult), POSITION)
    return psi.with_values(psi.values * mult)


def shear_multiplier(grid: Grid, axis: int, s: float) -> np.ndarray:
    """Phase realizing a shear of the given physical ``axis`` by ``s``.

    For ``axis=1`` the array is transformed along x1 and multiplied by
    ``exp(-i p1 s x2)``; for ``axis=2`` the roles swap.
    """
    if axis == 1:
        return np.exp(-1j * s * (grid.p1 * grid.x2))
    if axis == 2:
        return np.exp(-1j * s * (grid.x1 * grid.p2))
    raise ValueError(f"axis must be 1 or 2, got {axis!r}")


def shear_array(a: np.ndarray, grid: Grid, axis: int, s: float) -> np.ndarray:
    if s == 0:
        return a.copy()
    return apply_axis_multiplier(a, shear_multiplier(grid, axis, s), axis - 1)


def shear(psi: WaveField, axis: int, s: float) -> WaveField:
    """Shear ``f(x1, x2) -> f(x1 - s*x2, x2)`` (axis 1) or ``f(x1, x2 - s*x1)`` (axis 2).

    Periodic band-limited interpolation along one axis, so the map is
    exactly unitary and wraps around the box.
    """
    if abs(s) > MAX_SHEAR:
        raise ValueError(f"|shear| must be <= {MAX_SHEAR}, got {s}")
    pos = psi.to_position()
    out = WaveField(pos.grid, shear_array(pos.values, pos.grid, axis, s), POSITION)
    return out if psi.rep == POSITION else transform(out, "forward")


def quarter_turn_array(a: np.ndarray, quarters: int) -> np.ndarray:
    """Rotate lattice samples counterclockwise by ``quarters * pi/2`` exactly."""
    q = quarters % 4
    if q == 0:
        return a.copy()
    n = a.shape[0]
    neg = (-np.arange(n)) % n
    if q == 1:
        return np.ascontiguousarray(a.T[neg, :])
    if q == 2:
        return a[neg][:, neg]
    return np.ascontiguousarray(a.T[:, neg])


def reduce_angle(a: float) -> tuple[int, float]:
    """Split ``a`` into quarter turns and a residual in ``[-pi/4, pi/4]``."""
    q = int(np.round(a / (0.5 * np.pi)))
    return q, a - q * 0.5 * np.pi


def rotation_shears(residual: float) -> tuple[float, float]:
    """Shear amounts ``(s1, s2)`` with ``R = S1(s1) S2(s2) S1(s1)``."""
    return -np.tan(0.5 * residual), np.sin(residual)


def rotate_array(a: np.ndarray, grid: Grid, angle: float) -> np.ndarray:
    q, r = reduce_angle(angle)
    out = quarter_turn_array(a, q)
    if r == 0:
        return out
    s1, s2 = rotation_shears(r)
    m1 = shear_multiplier(grid, 1, s1)
    out = apply_axis_multiplier(out, m1, 0)
    out = apply_axis_multiplier(out, shear_multiplier(grid, 2, s2), 1)
    return apply_axis_multiplier(out, m1, 0)


def rotate(psi: WaveField, a: float, guard: bool = True,
           tol: float = GUARD_TOLERANCE) -> WaveField:
    """Return ``exp(-i a J) psi``: samples of ``x -> psi(R_a^{-1} x)``.

    ``R_a`` turns counterclockwise by ``a``.  Whole quarter turns are exact
    index permutations; the residual angle uses three shears.
    """
    pos = psi.to_position()
    if guard:
        check_guard(pos, "rotate", tol=tol)
    out = WaveField(pos.grid, rotate_array(pos.values, pos.grid, a), POSITION)
    return out if psi.rep == POSITION else transform(out, "forward")


def derivative_array(a: np.ndarray, grid: Grid, axis: int) -> np.ndarray:
    """``-i d/dx_axis`` of a position-space array, Nyquist mode zeroed."""
    if axis == 1:
        return apply_axis_multiplier(a, grid.p_derivative[:, None], 0)
    if axis == 2:
        return apply_axis_multiplier(a, grid.p_derivative[None, :], 1)
    raise ValueError(f"axis must be 1 or 2, got {axis!r}")


def spectral_derivative(psi: WaveField, axis: int) -> WaveField:
    """Momentum component ``-i d/dx_axis psi`` computed spectrally."""
    if psi.rep != POSITION:
        raise RepresentationError("spectral_derivative needs a position-space field")
    return WaveField(psi.grid, derivative_array(psi.values, psi.grid, axis), POSITION)
