import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from rotorwave.grid import Grid, PhysParams, WaveField, norm
from rotorwave.potentials import GaussianBump, PowerLaw
from rotorwave.propagator import (
    AbsorberConfig,
    EvolveConfig,
    SplitStepPropagator,
    evolve,
    frame_consistency,
    frame_transfer,
    monodromy,
    propagate,
    steps_for,
    to_rotating_frame,
)
from rotorwave.spectral import GuardError, kinetic_phase, rotate

from oracles import free_gaussian_2d


def l2(a, b):
    return norm(a.with_values(a.values - b.values))


@pytest.fixture(scope="module")
def packet():
    g = Grid(128, 32.0)
    x1, x2 = g.meshgrid()
    return WaveField(g, free_gaussian_2d(x1, x2, 0.0, 1.0, (-2.0, 0.5), (1.0, 0.3)))


def test_steps_for():
    assert steps_for(1.0, 0.3) == (4, 0.25)
    assert steps_for(1.0, 0.25) == (4, 0.25)
    assert steps_for(1.0, 0.3, even=True) == (4, 0.25)
    assert steps_for(0.9, 0.3, even=True) == (4, 0.225)
    n, dt = steps_for(-2.0, 0.01)
    assert n == 200 and dt == pytest.approx(0.01)


def test_evolve_config_validation():
    with pytest.raises(ValueError, match="positive"):
        EvolveConfig(0.0)
    with pytest.raises(ValueError, match="frame"):
        EvolveConfig(0.1, frame="lab")
    with pytest.raises(ValueError, match="integral"):
        EvolveConfig(0.3, 0.0, 1.0)
    with pytest.raises(ValueError, match="exceeds"):
        EvolveConfig(0.1, 0.0, 1.0).validate(PhysParams(1.0, 1.0))


def test_free_evolution_matches_closed_form(packet):
    g = packet.grid
    x1, x2 = g.meshgrid()
    out, _ = evolve(packet, EvolveConfig(0.05, 0.0, 2.0, "inertial"), None, PhysParams())
    exact = WaveField(g, free_gaussian_2d(x1, x2, 2.0, 1.0, (-2.0, 0.5), (1.0, 0.3)))
    assert l2(out, exact) < 1e-10


def test_rotating_route_without_potential_is_free_motion(packet):
    params = PhysParams(1.0, 0.4)
    out, _ = propagate(packet, 0.0, 2.0, None, params, 0.02, "rotating")
    assert l2(out, kinetic_phase(packet, 2.0)) < 1e-10


@settings(max_examples=20, deadline=None)
@given(omega=st.floats(-2.0, 2.0), dt=st.floats(0.001, 0.025))
def test_rotating_step_factor_is_exact(omega, dt):
    g = Grid(64, 24.0)
    x1, x2 = g.meshgrid()
    psi = WaveField(g, free_gaussian_2d(x1, x2, 0.0, 1.0, (1.0, -0.5), (0.5, 0.5)))
    prop = SplitStepPropagator(g, None, PhysParams(1.0, omega), dt, "rotating")
    got = psi.with_values(prop.step(psi.values.copy(), 0.0))
    want = rotate(kinetic_phase(psi, dt), -omega * dt)
    assert l2(got, want) < 1e-11


def test_strang_order_two_for_static_potential(packet):
    V = GaussianBump(3.0, (0.0, 0.0), 1.0)
    params = PhysParams()
    ref, _ = propagate(packet, 0.0, 1.0, V, params, 0.1 / 32, "inertial")
    errs = []
    for dt in (0.1, 0.05, 0.025):
        out, _ = propagate(packet, 0.0, 1.0, V, params, dt, "inertial")
        errs.append(l2(out, ref))
    orders = np.log2(np.array(errs[:-1]) / np.array(errs[1:]))
    assert np.all(orders > 1.9)


def test_norm_conservation(packet):
    V = GaussianBump(3.0, (1.0, 0.0), 1.0)
    params = PhysParams(1.0, 0.5)
    for frame in ("inertial", "rotating"):
        out, _ = propagate(packet, 0.0, 2.0, V, params, 0.01, frame)
        assert norm(out) == pytest.approx(norm(packet), abs=1e-12)


def test_evolve_trace_samples(packet):
    V = GaussianBump(3.0, (1.0, 0.0), 1.0)
    params = PhysParams(1.0, 0.5)
    phi = to_rotating_frame(packet, 0.0, 0.5)
    _, trace = evolve(phi, EvolveConfig(0.01, 0.0, 1.0, "rotating", cadence=20), V, params)
    assert trace.steps == list(range(0, 101, 20))
    total = trace.column("total_rotating")
    # <H_omega + V> is conserved by the rotating route up to the splitting error
    assert np.ptp(total) < 1e-3
    assert len(trace.rows()) == len(trace)


def test_guard_aborts_runaway_packet():
    g = Grid(64, 16.0)
    x1, x2 = g.meshgrid()
    psi = WaveField(g, free_gaussian_2d(x1, x2, 0.0, 0.8, (0.0, 0.0), (4.0, 0.0)))
    with pytest.raises(GuardError, match="step"):
        evolve(psi, EvolveConfig(0.05, 0.0, 3.0, "inertial", cadence=1), None, PhysParams())


def test_absorber_removes_outgoing_mass():
    g = Grid(64, 16.0)
    x1, x2 = g.meshgrid()
    psi = WaveField(g, free_gaussian_2d(x1, x2, 0.0, 0.8, (0.0, 0.0), (4.0, 0.0)))
    cfg = EvolveConfig(0.05, 0.0, 3.0, "inertial", AbsorberConfig(3.0), cadence=1)
    out, _ = evolve(psi, cfg, None, PhysParams())
    assert norm(out) < 0.1
    mask = AbsorberConfig(3.0).mask(g)
    assert mask[32, 32] == 1.0 and 0 <= mask.min() < 1e-3


def test_frame_transfer_inverts_rotating_frame(packet):
    phi = to_rotating_frame(packet, 1.3, 0.7)
    assert l2(frame_transfer(phi, 1.3, 0.7), packet) < 1e-9


def test_monodromy_of_radial_potential_is_static_evolution(packet):
    V = PowerLaw(2.0, 4.0, 1.0)
    params = PhysParams(1.0, 4.0)
    period = np.pi / 2
    turn = monodromy(packet, 0.3, V, params, 0.01, "inertial")
    static, _ = propagate(packet, 0.0, period, V, PhysParams(1.0, 0.0), 0.01, "inertial")
    assert l2(turn, static) < 1e-12


def test_monodromy_needs_rotation(packet):
    with pytest.raises(ValueError):
        monodromy(packet, 0.0, None, PhysParams(), 0.01)


def test_frame_consistency_order():
    g = Grid(64, 24.0)
    x1, x2 = g.meshgrid()
    psi = WaveField(g, np.exp(-((x1 + 2) ** 2 + x2**2) / 4 + 1j * x1)).normalized()
    res = frame_consistency(psi, 0.0, 1.0, GaussianBump(2.0, (1.5, 0.5), 1.0), PhysParams(1.0, 0.3),
                            [0.04, 0.02, 0.01])
    assert res.order > 1.9
    assert res.rows()[0]["dt"] == 0.04
