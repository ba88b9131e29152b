import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from rotorwave.potentials import (
    AnisotropicProduct,
    Blade,
    DipolePeaks,
    GaussianBump,
    PotentialSpec,
    PowerLaw,
    SectorOscillation,
    Zero,
    evaluate_rotating,
    invariant_split,
    noninvariant_part,
    rotate_points,
    smooth_edge,
)

SPECS = [
    Zero(),
    GaussianBump(2.0, (1.5, 0.5), 1.0),
    Blade(100.0, 0.3, 6.0, 0.05),
    AnisotropicProduct(1.0, 2.0, 1.0, 1.0),
    SectorOscillation(1.0, -np.pi / 2, np.pi / 2, 2.0, 0.2),
    PowerLaw(1.0, 4.0, 1.0, (0.5, -0.25)),
    DipolePeaks(),
]


@pytest.mark.parametrize("V", SPECS, ids=lambda v: v.kind)
def test_dict_round_trip(V):
    assert PotentialSpec.from_dict(V.to_dict()) == V


def test_from_dict_rejects_unknown_kind_and_fields():
    with pytest.raises(ValueError, match="unknown potential kind"):
        PotentialSpec.from_dict({"kind": "nope"})
    with pytest.raises(ValueError, match="bad parameters"):
        PotentialSpec.from_dict({"kind": "blade", "height": 3})


@settings(max_examples=40, deadline=None)
@given(V0=st.floats(-50, 50), beta=st.floats(0.5, 6), core=st.floats(0.1, 5),
       c1=st.floats(-3, 3), c2=st.floats(-3, 3))
def test_power_law_round_trip_property(V0, beta, core, c1, c2):
    V = PowerLaw(V0, beta, core, (c1, c2))
    assert PotentialSpec.from_dict(V.to_dict()) == V


@pytest.mark.parametrize("V", SPECS[1:], ids=lambda v: v.kind)
def test_rotating_evaluation_matches_coordinate_rotation(V):
    rng = np.random.default_rng(0)
    x1, x2 = rng.uniform(-8, 8, (2, 200))
    t, omega = 0.7, 1.3
    y1, y2 = rotate_points(x1, x2, -omega * t)
    np.testing.assert_allclose(evaluate_rotating(V, x1, x2, t, omega), V.evaluate(y1, y2), atol=1e-12)


@pytest.mark.parametrize("V", SPECS[1:], ids=lambda v: v.kind)
def test_azimuthal_derivative_matches_finite_difference(V):
    rng = np.random.default_rng(1)
    r = rng.uniform(2.5, 8, 300)
    phi = rng.uniform(-np.pi + 0.1, np.pi - 0.1, 300)
    x1, x2 = r * np.cos(phi), r * np.sin(phi)
    h = 1e-6
    a1, a2 = rotate_points(x1, x2, h)
    b1, b2 = rotate_points(x1, x2, -h)
    fd = (V.evaluate(a1, a2) - V.evaluate(b1, b2)) / (2 * h)
    scale = max(1.0, float(np.max(np.abs(fd))))
    np.testing.assert_allclose(V.azimuthal_derivative(x1, x2), fd, atol=1e-5 * scale)


def test_gradient_matches_finite_difference():
    rng = np.random.default_rng(2)
    x1, x2 = rng.uniform(-4, 4, (2, 200))
    h = 1e-6
    for V in (GaussianBump(2.0, (1.0, -1.0), 0.8), Blade(10.0, 1.0, 3.0, 0.3),
              AnisotropicProduct(1.0, 2.0, 1.0, 1.5), PowerLaw(1.0, 3.0, 1.0, (0.2, 0.1)),
              DipolePeaks(count=3)):
        g1, g2 = V.gradient(x1, x2)
        f1 = (V.evaluate(x1 + h, x2) - V.evaluate(x1 - h, x2)) / (2 * h)
        f2 = (V.evaluate(x1, x2 + h) - V.evaluate(x1, x2 - h)) / (2 * h)
        np.testing.assert_allclose(g1, f1, atol=1e-5 * max(1, np.abs(f1).max()))
        np.testing.assert_allclose(g2, f2, atol=1e-5 * max(1, np.abs(f2).max()))


def test_smooth_edge_shape():
    u = np.linspace(-5, 5, 1001)
    e = smooth_edge(u)
    assert np.all(e[u <= -3] == 1.0) and np.all(e[u >= 3] == 0.0)
    assert smooth_edge(0.0) == pytest.approx(0.5)
    np.testing.assert_allclose(e + smooth_edge(-u), 1.0, atol=1e-15)
    assert np.all(np.diff(e) <= 0)


def test_blade_support_and_reach():
    B = Blade(50.0, 1.0, 4.0, 0.2)
    assert B.evaluate(0.0, 0.0) == pytest.approx(50.0)
    assert B.evaluate(1.0 + 0.6, 0.0) == 0.0
    assert B.evaluate(0.0, 4.0 + 0.6) == 0.0
    assert B.evaluate(1.0, 0.0) == pytest.approx(25.0)
    assert B.reach == pytest.approx(np.hypot(1.6, 4.6))
    with pytest.raises(ValueError):
        Blade(1.0, 0.1, 4.0, 0.2)


def test_sector_oscillation_vanishes_off_sector_and_inside_r0():
    V = SectorOscillation(1.0, -np.pi / 2, np.pi / 2, 2.0, 0.2)
    assert V.evaluate(-5.0, 0.0) == 0.0
    assert V.evaluate(1.5, 0.5) == 0.0
    assert V.evaluate(5.0, 0.0) == pytest.approx(1.0 / (25 * np.log(5.0) ** 2))


def test_anisotropic_product_factors():
    V = AnisotropicProduct(2.0, 2.0, 1.0, 1.0)
    assert V.evaluate(1.0, 0.0) == pytest.approx(1.0)
    assert V.evaluate(0.0, 1.0) == 0.0
    assert V.v2(0.0) == pytest.approx(1.0)


def test_dipole_peaks_keep_height_while_shrinking():
    V = DipolePeaks(1.0, 2.0, 2.0, 12, 1.0, 0.5)
    r, d = V.pairs()
    assert np.all(np.diff(d) < 0)
    for rk, dk in zip(r, d):
        x = np.linspace(rk - 2 * dk, rk + 2 * dk, 4001)
        # neighbouring pairs overlap a little, so each pair peaks near but not at V0
        assert 0.9 < np.abs(V.evaluate(x, 0.0)).max() < 1.05


def test_invariant_split_of_radial_and_harmonic_parts():
    V = PowerLaw(1.0, 4.0, 1.0)
    r = np.array([0.5, 1.0, 3.0])
    np.testing.assert_allclose(invariant_split(V, r), V.evaluate(r, 0.0), rtol=1e-13)
    harmonic = lambda x1, x2: np.cos(3 * np.arctan2(x2, x1)) * np.hypot(x1, x2)
    np.testing.assert_allclose(invariant_split(harmonic, r), 0.0, atol=1e-14)
    part = noninvariant_part(V)
    assert abs(part.evaluate(1.3, -0.4)) < 1e-13


def test_radial_flags():
    assert PowerLaw(1.0, 4.0, 1.0).is_radial
    assert not PowerLaw(1.0, 4.0, 1.0, (1.0, 0.0)).is_radial
