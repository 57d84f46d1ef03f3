import numpy as np
import pytest

from netcapture.orbital import (
    cw_acceleration,
    cw_closed_form,
    cw_state_transition,
    orbital_forces,
    propagate_cw,
)

OMEGA = 0.0011


def test_acceleration_components():
    a = cw_acceleration([1.0, 2.0, 3.0], [0.1, 0.2, 0.3], OMEGA)
    w2 = OMEGA**2
    np.testing.assert_allclose(a, [3 * w2 + 2 * OMEGA * 0.2, -2 * OMEGA * 0.1, -3 * w2])


def test_acceleration_batch_matches_single():
    r = np.array([[1.0, -2.0, 0.5], [3.0, 0.0, -1.0]])
    v = np.array([[0.01, 0.02, 0.0], [-0.03, 0.0, 0.04]])
    batch = cw_acceleration(r, v, OMEGA)
    for k in range(2):
        np.testing.assert_allclose(batch[k], cw_acceleration(r[k], v[k], OMEGA))


def test_orbital_forces_scale_with_mass():
    pos = np.array([[1.0, 0.0, 0.0], [0.0, 0.0, 2.0]])
    vel = np.zeros((2, 3))
    f, fd = orbital_forces(pos, vel, np.array([2.0, 3.0]), np.zeros(3), np.zeros(3), 10.0, OMEGA)
    np.testing.assert_allclose(f[0], [6 * OMEGA**2, 0, 0])
    np.testing.assert_allclose(f[1], [0, 0, -6 * OMEGA**2])
    np.testing.assert_allclose(fd, 0.0)


def test_state_transition_identity_at_zero():
    np.testing.assert_allclose(cw_state_transition(OMEGA, 0.0), np.eye(6), atol=1e-15)


def test_state_transition_composes():
    a = cw_state_transition(OMEGA, 300.0)
    b = cw_state_transition(OMEGA, 700.0)
    np.testing.assert_allclose(b @ a, cw_state_transition(OMEGA, 1000.0), rtol=1e-10, atol=1e-10)


def test_closed_form_satisfies_ode():
    # central difference of the closed form reproduces the CW acceleration
    s0 = np.array([10.0, -20.0, 5.0, 0.01, -0.02, 0.005])
    t, h = 400.0, 1e-2
    s_plus = cw_closed_form(s0, OMEGA, t + h)
    s_minus = cw_closed_form(s0, OMEGA, t - h)
    s = cw_closed_form(s0, OMEGA, t)
    acc = (s_plus[3:] - s_minus[3:]) / (2 * h)
    np.testing.assert_allclose(acc, cw_acceleration(s[:3], s[3:], OMEGA), rtol=1e-6, atol=1e-12)


def test_closed_form_rejects_negative_time():
    with pytest.raises(ValueError):
        cw_closed_form(np.zeros(6), OMEGA, -1.0)


def test_zero_state_stays_at_rest():
    np.testing.assert_array_equal(propagate_cw(np.zeros(6), OMEGA, 10.0), np.zeros(6))


def test_propagation_matches_closed_form_short():
    s0 = np.array([50.0, 10.0, -30.0, 0.0, 0.0, 0.0])
    num = propagate_cw(s0, OMEGA, 100.0)
    exact = cw_closed_form(s0, OMEGA, 100.0)
    assert np.linalg.norm(num[:3] - exact[:3]) / np.linalg.norm(exact[:3]) < 1e-6
    # semi-implicit Euler velocities lag by half a step: O(a dt) absolute
    np.testing.assert_allclose(num[3:], exact[3:], atol=1e-7)


def test_simulation_substep_drift_is_first_order():
    # at the 1 ms simulation substep the drift over 1000 s stays a few 1e-6;
    # quartering the step brings it under 1e-6
    rng = np.random.default_rng(1)
    s0 = np.concatenate([rng.uniform(-100, 100, 3), rng.uniform(-0.1, 0.1, 3)])
    exact = cw_closed_form(s0, OMEGA, 1000.0)
    errs = [np.linalg.norm(propagate_cw(s0, OMEGA, 1000.0, dt)[:3] - exact[:3]) / np.linalg.norm(exact[:3])
            for dt in (1e-3, 2.5e-4)]
    assert errs[0] < 5e-6
    assert errs[1] < 1e-6 and errs[1] < errs[0]
