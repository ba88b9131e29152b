import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from rotorwave.grid import Grid, MOMENTUM, POSITION, RepresentationError, WaveField, inner, norm
from rotorwave.spectral import (
    GuardError,
    boundary_mass,
    kinetic_phase,
    quarter_turn_array,
    reduce_angle,
    rotate,
    shear,
    spectral_derivative,
)

from oracles import angular_harmonic, free_gaussian_2d


def gaussian(g, c=(0.0, 0.0), k=(0.0, 0.0), w=1.0):
    x1, x2 = g.meshgrid()
    v = np.exp(-((x1 - c[0]) ** 2 + (x2 - c[1]) ** 2) / (2 * w**2) + 1j * (k[0] * x1 + k[1] * x2))
    return WaveField(g, v).normalized()


@pytest.mark.parametrize("n", [100, 6, 0, 12])
def test_grid_rejects_non_power_of_two(n):
    with pytest.raises(ValueError, match="power of two"):
        Grid(n, 10.0)


def test_grid_rejects_bad_side():
    with pytest.raises(ValueError):
        Grid(64, -1.0)


def test_lattice_layout():
    g = Grid(8, 4.0)
    assert g.dx == 0.5
    np.testing.assert_array_equal(g.x, [-2.0, -1.5, -1.0, -0.5, 0.0, 0.5, 1.0, 1.5])
    assert g.x1.shape == (8, 1) and g.x2.shape == (1, 8)
    assert g.p_max == pytest.approx(2 * np.pi)
    assert g.points == 64


def test_fft_round_trip_and_parseval():
    g = Grid(64, 12.0)
    rng = np.random.default_rng(1)
    psi = WaveField(g, rng.standard_normal(g.shape) + 1j * rng.standard_normal(g.shape))
    mom = psi.to_momentum()
    assert mom.rep == MOMENTUM
    assert norm(mom) == pytest.approx(norm(psi), rel=1e-13)
    back = mom.to_position()
    assert np.max(np.abs(back.values - psi.values)) < 1e-13


def test_momentum_samples_centre_on_mean_momentum():
    g = Grid(128, 40.0)
    psi = gaussian(g, k=(1.5, -0.5), w=2.0)
    dens = psi.to_momentum().density()
    p1 = (dens * g.p1).sum() / dens.sum()
    p2 = (dens * g.p2).sum() / dens.sum()
    assert p1 == pytest.approx(1.5, abs=1e-10)
    assert p2 == pytest.approx(-0.5, abs=1e-10)


def test_inner_requires_same_grid():
    a = gaussian(Grid(32, 10.0))
    b = gaussian(Grid(32, 11.0))
    with pytest.raises(ValueError):
        inner(a, b)


def test_spectral_derivative_of_gaussian():
    g = Grid(128, 30.0)
    psi = gaussian(g, w=1.5)
    x1, _ = g.meshgrid()
    exact = 1j * x1 / 1.5**2 * psi.values  # -i d/dx1 of exp(-x^2/(2w^2))
    got = spectral_derivative(psi, 1).values
    assert np.max(np.abs(got - exact)) < 1e-11


def test_spectral_derivative_needs_position():
    psi = gaussian(Grid(32, 10.0)).to_momentum()
    with pytest.raises(RepresentationError):
        spectral_derivative(psi, 1)


def test_kinetic_phase_matches_free_gaussian():
    g = Grid(256, 40.0)
    sigma = 1.2
    x1, x2 = g.meshgrid()
    psi0 = WaveField(g, free_gaussian_2d(x1, x2, 0.0, sigma, (-3.0, 1.0), (1.0, 0.5)))
    out = kinetic_phase(psi0, 2.5).to_position()
    exact = free_gaussian_2d(x1, x2, 2.5, sigma, (-3.0, 1.0), (1.0, 0.5))
    assert np.sqrt(np.sum(np.abs(out.values - exact) ** 2)) * g.dx < 1e-10


def test_shear_of_gaussian_matches_samples():
    g = Grid(128, 32.0)
    x1, x2 = g.meshgrid()
    f = lambda a, b: np.exp(-(a**2 + 1.5 * b**2) / 2.0)
    psi = WaveField(g, f(x1, x2))
    s = 0.4
    got = shear(psi, 1, s).values
    assert np.max(np.abs(got - f(x1 - s * x2, x2))) < 1e-10
    got = shear(psi, 2, -s).values
    assert np.max(np.abs(got - f(x1, x2 + s * x1))) < 1e-10


def test_quarter_turn_is_exact_permutation():
    g = Grid(64, 20.0)
    x1, x2 = g.meshgrid()
    f = lambda a, b: np.exp(-((a - 2.0) ** 2 + (b - 0.5) ** 2)) * (1 + 0.3j * a)
    psi = WaveField(g, f(x1, x2))
    # R_{pi/2}^{-1} (x1, x2) = (x2, -x1)
    out = rotate(psi, np.pi / 2).values
    np.testing.assert_array_equal(out, quarter_turn_array(psi.values, 1))
    assert np.max(np.abs(out - f(x2, -x1))) < 1e-15
    four = psi.values
    for _ in range(4):
        four = quarter_turn_array(four, 1)
    np.testing.assert_array_equal(four, psi.values)


def test_reduce_angle_residual_range():
    for a in np.linspace(-7, 7, 57):
        q, r = reduce_angle(a)
        assert abs(r) <= np.pi / 4 + 1e-12
        assert q * np.pi / 2 + r == pytest.approx(a)


@pytest.mark.parametrize("j", [1, 2, 3, -2])
@pytest.mark.parametrize("a", [0.1, np.pi / 4, 2.3])
def test_rotation_eigenphase_of_angular_harmonic(j, a):
    g = Grid(128, 24.0)
    x1, x2 = g.meshgrid()
    psi = WaveField(g, angular_harmonic(x1, x2, j, 1.5)).normalized()
    out = rotate(psi, a)
    err = norm(out.with_values(out.values - np.exp(-1j * a * j) * psi.values))
    assert err < 1e-8


def test_rotation_matches_rotated_samples():
    g = Grid(128, 24.0)
    x1, x2 = g.meshgrid()
    f = lambda a, b: np.exp(-((a - 3.0) ** 2 + 2 * (b + 1.0) ** 2) / 2.0)
    a = 0.37
    out = rotate(WaveField(g, f(x1, x2)), a).values
    c, s = np.cos(a), np.sin(a)
    assert np.max(np.abs(out - f(c * x1 + s * x2, -s * x1 + c * x2))) < 1e-8


def test_rotate_guard_trips_on_boundary_mass():
    g = Grid(64, 20.0)
    psi = gaussian(g, c=(8.0, 0.0), w=1.0)
    assert boundary_mass(psi) > 1e-6
    with pytest.raises(GuardError):
        rotate(psi, 0.3)
    rotate(psi, 0.3, guard=False)


def test_rotate_keeps_representation():
    psi = gaussian(Grid(64, 20.0)).to_momentum()
    assert rotate(psi, 0.2).rep == MOMENTUM
    assert rotate(psi.to_position(), 0.2).rep == POSITION


_angles = st.floats(min_value=-2 * np.pi, max_value=2 * np.pi, allow_nan=False)


@settings(max_examples=25, deadline=None)
@given(a=_angles, b=_angles, c1=st.floats(-2, 2), c2=st.floats(-2, 2))
def test_rotation_group_law_and_unitarity(a, b, c1, c2):
    g = Grid(64, 24.0)
    psi = gaussian(g, c=(c1, c2), k=(0.5, -0.3), w=1.2)
    ra = rotate(psi, a)
    assert norm(ra) == pytest.approx(1.0, abs=1e-12)
    two = rotate(ra, b)
    one = rotate(psi, a + b)
    assert norm(two.with_values(two.values - one.values)) < 1e-8


@settings(max_examples=25, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), s=st.floats(-1.2, 1.2))
def test_shear_is_unitary_on_arbitrary_fields(seed, s):
    g = Grid(32, 10.0)
    rng = np.random.default_rng(seed)
    psi = WaveField(g, rng.standard_normal(g.shape) + 1j * rng.standard_normal(g.shape))
    for axis in (1, 2):
        out = shear(psi, axis, s)
        assert norm(out) == pytest.approx(norm(psi), rel=1e-12)
        back = shear(out, axis, -s)
        assert np.max(np.abs(back.values - psi.values)) < 1e-10
