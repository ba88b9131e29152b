import numpy as np
import pytest

from rotorwave.grid import Grid, norm
from rotorwave.scattering import momentum_moments, position_moments
from rotorwave.states import (
    BumpProfile,
    GaussianProfile,
    GridTooSmallError,
    PacketError,
    domain_center,
    domain_scaling_report,
    gaussian_sigma_for_tail,
    make_domain_sequence,
    make_packet_D0,
    make_packet_impact,
    momentum_ball_mass,
    profile_from_dict,
)


def test_d0_packet_is_normalized_and_confined():
    g = Grid(256, 60.0)
    psi = make_packet_D0(g, (2.0, 1.0))
    assert norm(psi) == pytest.approx(1.0, abs=1e-12)
    radius = np.hypot(2.0, 1.0) / 3.0
    assert momentum_ball_mass(psi, (2.0, 1.0), radius) <= 1e-8
    mean, _ = momentum_moments(psi)
    np.testing.assert_allclose(mean, (2.0, 1.0), atol=1e-10)


def test_d0_default_sigma_meets_tail_tolerance():
    # a 2-D Gaussian profile exp(-|q|^2/(4 s^2)) puts exp(-R^2/(2 s^2)) of its mass beyond R
    s = gaussian_sigma_for_tail(1.0, 1e-8)
    assert np.exp(-1.0 / (2 * s**2)) <= 1e-8 * (1 + 1e-9)


def test_d0_rejects_wide_profile_and_zero_velocity():
    g = Grid(128, 40.0)
    with pytest.raises(PacketError):
        make_packet_D0(g, (1.0, 0.0), GaussianProfile(0.5))
    with pytest.raises(PacketError):
        make_packet_D0(g, (0.0, 0.0))


def test_bump_profile_has_compact_support():
    g = Grid(256, 60.0)
    prof = BumpProfile(0.5)
    psi = make_packet_D0(g, (3.0, 0.0), prof)
    assert momentum_ball_mass(psi, (3.0, 0.0), 0.5 + 1e-9) < 1e-25


def test_impact_packet_position_and_momentum():
    g = Grid(256, 80.0)
    psi = make_packet_impact(g, 3.0, 2.0)
    xm, _ = position_moments(psi)
    pm, _ = momentum_moments(psi)
    np.testing.assert_allclose(xm, (0.0, 3.0), atol=1e-8)
    np.testing.assert_allclose(pm, (-2.0, 0.0), atol=1e-10)


def test_impact_packet_rejects_far_offset():
    with pytest.raises(PacketError):
        make_packet_impact(Grid(64, 20.0), 7.0, 2.0)


def test_profile_from_dict():
    assert profile_from_dict(None) is None
    assert profile_from_dict({"kind": "gaussian", "sigma_p": 0.3}) == GaussianProfile(0.3)
    assert profile_from_dict({"kind": "smooth_bump", "radius": 1.0}) == BumpProfile(1.0)
    with pytest.raises(ValueError):
        profile_from_dict({"kind": "box"})


def test_domain_sequence_centroid_and_momentum():
    g = Grid(512, 256.0)
    omega, n = 0.1, 4
    psi = make_domain_sequence(g, omega, n)
    xm, _ = position_moments(psi)
    pm, _ = momentum_moments(psi)
    assert xm[1] == pytest.approx(domain_center(n, omega), abs=1e-6)
    assert xm[0] == pytest.approx(0.0, abs=1e-6)
    assert pm[0] == pytest.approx(n, abs=1e-8)


def test_domain_sequence_too_small_grid_reports_what_fits():
    g = Grid(256, 128.0)
    with pytest.raises(GridTooSmallError) as info:
        make_domain_sequence(g, 0.1, 32)
    err = info.value
    assert err.index == 32
    assert err.largest_index < 32
    assert err.required_L > 128.0
    assert "largest index" in str(err)


def test_domain_scaling_on_a_feasible_range():
    g = Grid(1024, 160.0)
    rep = domain_scaling_report(g, 1.0, [4, 8, 12, 16])
    # H0 psi_n ~ n^2/2 and the leading part of J psi_n cancels it; at omega = 1 the
    # packet width still dominates J, so J's slope sits between the two
    assert rep.slopes["h0"] == pytest.approx(2.0, abs=0.01)
    assert rep.slopes["homega"] == pytest.approx(1.0, abs=0.01)
    assert rep.slopes["homega"] < rep.slopes["j"] < rep.slopes["h0"]
    np.testing.assert_allclose(rep.h0_norm, rep.n_values**2 / 2, rtol=2e-3)


@pytest.mark.slow
def test_domain_scaling_at_slow_rotation_on_a_large_grid():
    rep = domain_scaling_report(Grid(2048, 360.0), 0.1, [4, 8, 12, 16])
    assert rep.slopes["h0"] == pytest.approx(2.0, abs=0.1)
    assert rep.slopes["j"] == pytest.approx(2.0, abs=0.1)
    assert rep.slopes["homega"] <= 1.2
