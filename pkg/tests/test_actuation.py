import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from netcapture.actuation import (
    CornerController,
    CornerControllerState,
    SatelliteState,
    pid_force,
    saturate,
    saturate_rows,
    smc_force,
    update_satellite_mass,
)
from netcapture.config import ControlGains, ControllerKind, SMCForm
from netcapture.guidance import TargetSet

vectors = st.lists(st.floats(-1e3, 1e3, allow_nan=False), min_size=3, max_size=3)


def test_pid_example():
    g = ControlGains()
    f = pid_force([1.0, 0, 0], [0, 2.0, 0], [0, 0, 3.0], g)
    np.testing.assert_allclose(f, [1e-2, 2e-3, 3e-4])


def test_smc_printed_form_example():
    # e = 1, e_dot = 0, accelerations zero, lam = K = sigma = 1e-2, m = 350
    g = ControlGains(lam=1e-2, k_sw=1e-2, sigma=1e-2)
    f = smc_force([1.0, 0, 0], [0.0, 0, 0], np.zeros(3), np.zeros(3), 350.0, g, SMCForm.PRINTED)
    assert f[0] == pytest.approx(-1e-2 * math.tanh(1.0), abs=1e-9)
    assert f[0] == pytest.approx(-7.616e-3, abs=1e-6)


def test_smc_rederived_pushes_toward_target():
    g = ControlGains(lam=1e-2, k_sw=1e-2, sigma=1e-2)
    f = smc_force([1.0, 0, 0], [0.0, 0, 0], np.zeros(3), np.zeros(3), 350.0, g)
    assert f[0] == pytest.approx(7.616e-3, abs=1e-6)


def test_smc_rejects_nonpositive_mass():
    with pytest.raises(ValueError):
        smc_force(np.zeros(3), np.zeros(3), np.zeros(3), np.zeros(3), 0.0, ControlGains())


@settings(max_examples=200, deadline=None)
@given(vectors, vectors, vectors)
def test_control_laws_are_odd(e, e_dot, integral):
    g = ControlGains()
    e, e_dot, integral = map(np.array, (e, e_dot, integral))
    np.testing.assert_allclose(pid_force(-e, -e_dot, -integral, g), -pid_force(e, e_dot, integral, g))
    z = np.zeros(3)
    for form in SMCForm:
        np.testing.assert_allclose(smc_force(-e, -e_dot, z, z, 350.0, g, form),
                                   -smc_force(e, e_dot, z, z, 350.0, g, form), atol=1e-12)


def test_saturate_examples():
    f, clipped = saturate([30.0, 40.0, 0.0], 20.0)
    assert clipped
    np.testing.assert_allclose(f, [12.0, 16.0, 0.0])
    f, clipped = saturate([3.0, 4.0, 0.0], 20.0)
    assert not clipped
    np.testing.assert_array_equal(f, [3.0, 4.0, 0.0])
    with pytest.raises(ValueError):
        saturate([1.0, 0, 0], 0.0)


@settings(max_examples=2000, deadline=None)
@given(vectors)
def test_saturate_never_exceeds_limit(v):
    f, clipped = saturate(v, 20.0)
    norm = math.sqrt(float(f @ f))
    # the cap holds however the norm is evaluated
    assert max(norm, np.linalg.norm(f), np.linalg.norm(f[None], axis=1)[0],
               math.sqrt(float(np.einsum("i,i", f, f))), math.hypot(*f)) <= 20.0
    if clipped:
        assert norm == pytest.approx(20.0, abs=1e-12)
        assert float(f @ np.array(v)) > 0  # direction kept


def test_saturate_rows_matches_single(rng):
    forces = rng.standard_normal((50, 3)) * 30.0
    out, clipped = saturate_rows(forces, 20.0)
    for k in range(50):
        f, c = saturate(forces[k], 20.0)
        np.testing.assert_array_equal(out[k], f)
        assert c == clipped[k]


def test_fuel_for_constant_full_thrust():
    g = ControlGains()
    sat = SatelliteState(350.0, 350.0)
    for _ in range(5000):  # 100 s at 20 ms
        sat = update_satellite_mass(sat, 20.0, 0.02, g)
    assert sat.fuel_used == pytest.approx(0.8158, abs=1e-4)
    assert sat.fuel_used == pytest.approx(2000.0 / (250.0 * 9.80665), abs=1e-9)


def test_zero_thrust_burns_nothing():
    sat = update_satellite_mass(SatelliteState(), 0.0, 0.02, ControlGains())
    assert sat.fuel_used == 0.0


def test_burn_flags_exhaustion():
    g = ControlGains(dry_mass=349.99)
    ctrl = CornerController(g, 0.02)
    state = CornerControllerState.initial([350.0] * 4)
    thrust = np.zeros((4, 3))
    thrust[2] = [20.0, 0, 0]
    for _ in range(300):  # 120 N s, about 0.049 kg
        ctrl.burn(state, thrust)
    assert state.fuel_exhausted
    assert state.fuel_used[0] == 0.0 and state.fuel_used[2] > 0.01


def test_pid_integral_frozen_while_saturated():
    g = ControlGains(kind=ControllerKind.PID, kp=10.0)
    ctrl = CornerController(g, 0.02)
    state = CornerControllerState.initial([350.0] * 4)
    q = np.zeros((4, 3))
    targets = TargetSet(np.array([[100.0, 0, 0], [0.1, 0, 0], [0, 0, 0], [0, 0, 0]]))
    thrust, raw = ctrl.command(state, q, np.zeros((4, 3)), np.zeros((4, 3)), targets)
    assert np.linalg.norm(thrust[0]) == pytest.approx(20.0)
    assert np.linalg.norm(raw[0]) == pytest.approx(1000.0)
    np.testing.assert_array_equal(state.integral[0], 0.0)
    np.testing.assert_allclose(state.integral[1], [0.1 * 0.02, 0, 0])


def _point_mass_run(form, steps=20000, dt=0.02):
    """350 kg point mass tracking a fixed target 1 m away with the SMC law."""
    g = ControlGains(smc_form=form)
    m = 350.0
    q, v, a = 0.0, 0.0, 0.0
    peak = 0.0
    for _ in range(steps):
        f = smc_force(np.array([1.0 - q]), np.array([-v]), np.array([a]), np.zeros(1), m, g)
        f, _ = saturate(np.array([f[0], 0.0, 0.0]), g.thrust_limit)
        a = f[0] / m
        v += a * dt
        q += v * dt
        peak = max(peak, abs(f[0]))
    return q, v, peak


def test_smc_point_mass_converges():
    q, v, peak = _point_mass_run(SMCForm.REDERIVED, steps=60000)
    assert abs(q - 1.0) < 1e-3 and abs(v) < 1e-4
    assert peak <= 3e-2 + 1e-12


def test_smc_printed_form_drives_away():
    q, _, peak = _point_mass_run(SMCForm.PRINTED, steps=2000)
    assert abs(q - 1.0) > 1.0  # error grows instead of closing
    assert peak == pytest.approx(20.0)
