import math

import numpy as np
import pytest

from netcapture.config import GuidanceConfig
from netcapture.guidance import (
    GuidancePhase,
    NetGeometry,
    Phase,
    TargetDifferencer,
    approaching_targets,
    capture_condition,
    capture_targets,
    detect_capture,
    fit_plane_pca,
    fsm_update,
    leftover_angle,
    max_pairwise_distance,
    orienting_guard,
    orienting_targets,
    projected_area,
)

SQUARE = np.array([[0.0, -8, -8], [0.0, 8, -8], [0.0, 8, 8], [0.0, -8, 8]])
TARGET = np.array([5.0, 0.0, 0.0])


def _geom(corners):
    return NetGeometry(np.asarray(corners, dtype=float), 16.0, 16.0)


def _tilted(angle):
    """Square rotated about z by ``angle``: the PCA normal tilts by the same angle."""
    c, s = math.cos(angle), math.sin(angle)
    rot = np.array([[c, -s, 0], [s, c, 0], [0, 0, 1]])
    return SQUARE @ rot.T


def test_plane_fit_normal_points_to_target():
    normal, centroid, degenerate = fit_plane_pca(SQUARE, TARGET)
    np.testing.assert_allclose(normal, [1, 0, 0], atol=1e-12)
    np.testing.assert_allclose(centroid, 0.0, atol=1e-12)
    assert not degenerate
    normal, _, _ = fit_plane_pca(SQUARE, -TARGET)
    np.testing.assert_allclose(normal, [-1, 0, 0], atol=1e-12)


def test_plane_fit_collinear_falls_back():
    line = np.array([[0.0, 0, 0], [0, 1, 0], [0, 2, 0], [0, 3, 0]])
    normal, _, degenerate = fit_plane_pca(line, [4.0, 1.5, 0.0])
    assert degenerate
    np.testing.assert_allclose(normal, [1, 0, 0], atol=1e-12)


def test_plane_fit_coincident_rejected():
    with pytest.raises(ValueError):
        fit_plane_pca(np.ones((4, 3)), TARGET)


def test_leftover_angle_examples():
    assert leftover_angle([1, 0, 0], np.zeros(3), TARGET) == pytest.approx(0.0)
    assert leftover_angle([-1, 0, 0], np.zeros(3), TARGET) == pytest.approx(0.0)
    assert leftover_angle([0, 1, 0], np.zeros(3), TARGET) == pytest.approx(math.pi / 2)
    assert leftover_angle([1, 1, 0], np.zeros(3), TARGET) == pytest.approx(math.pi / 4)


def test_projected_area_examples():
    assert projected_area(SQUARE, [1, 0, 0]) == pytest.approx(256.0)
    assert projected_area(SQUARE, [0, 1, 0]) == pytest.approx(0.0, abs=1e-12)
    assert projected_area(_tilted(math.radians(60)), [1, 0, 0]) == pytest.approx(128.0)


def test_orienting_targets_face_target():
    geom = _geom(_tilted(math.radians(50)))
    tgt = orienting_targets(geom, TARGET)
    np.testing.assert_allclose(tgt.mean(axis=0), geom.centroid, atol=1e-12)
    assert projected_area(tgt, TARGET - geom.centroid) == pytest.approx(256.0)
    sides = np.linalg.norm(np.roll(tgt, -1, axis=0) - tgt, axis=1)
    np.testing.assert_allclose(sides, 16.0)


def test_orienting_targets_fixed_point():
    tgt = orienting_targets(_geom(SQUARE), TARGET)
    np.testing.assert_allclose(tgt, SQUARE, atol=1e-12)


def test_approaching_targets_shifted_to_target():
    tgt = approaching_targets(_geom(SQUARE), TARGET)
    np.testing.assert_allclose(tgt, SQUARE + TARGET, atol=1e-12)


def test_capture_targets_are_centroid():
    tgt = capture_targets(SQUARE + 1.0)
    np.testing.assert_allclose(tgt, np.ones((4, 3)))


def test_max_pairwise_distance():
    assert max_pairwise_distance(SQUARE) == pytest.approx(16.0 * math.sqrt(2.0))


# guard thresholds ----------------------------------------------------------

def test_angle_guard_threshold():
    cfg = GuidanceConfig(area_fraction_threshold=0.5)
    ok, report = orienting_guard(_geom(_tilted(math.radians(35.9))), TARGET, cfg)
    assert ok and report.leftover_angle < cfg.leftover_angle_threshold
    ok, report = orienting_guard(_geom(_tilted(math.radians(36.1))), TARGET, cfg)
    assert not ok


def test_area_guard_threshold():
    # a 16 x 12.8 rectangle is exactly 80 % of the stretched 16 x 16 net
    cfg = GuidanceConfig()
    at = np.array([[0.0, -8, -6.4], [0.0, 8, -6.4], [0.0, 8, 6.4], [0.0, -8, 6.4]])
    ok, report = orienting_guard(_geom(at), TARGET, cfg)
    assert report.area_fraction == pytest.approx(0.8)
    assert ok
    below = at * [1, 1, 0.999]
    ok, _ = orienting_guard(_geom(below), TARGET, cfg)
    assert not ok


def test_fsm_orienting_to_approaching():
    cfg = GuidanceConfig()
    state = GuidancePhase()
    nxt, _, _ = fsm_update(state, _geom(_tilted(math.radians(40))), TARGET, 0, cfg)
    assert nxt.phase is Phase.ORIENTING
    nxt, targets, _ = fsm_update(state, _geom(SQUARE), TARGET, 0, cfg, t=1.5)
    assert nxt.phase is Phase.APPROACHING and nxt.entry_time == 1.5
    np.testing.assert_allclose(targets, SQUARE + TARGET, atol=1e-12)


def test_fsm_approaching_to_capture_on_contact():
    cfg = GuidanceConfig()
    state = GuidancePhase(Phase.APPROACHING)
    nxt, _, _ = fsm_update(state, _geom(SQUARE), TARGET, 0, cfg)
    assert nxt.phase is Phase.APPROACHING
    nxt, targets, _ = fsm_update(state, _geom(SQUARE), TARGET, 1, cfg)
    assert nxt.phase is Phase.CAPTURE
    np.testing.assert_allclose(targets, 0.0, atol=1e-12)


def test_fsm_capture_retreats_after_lost_contact():
    cfg = GuidanceConfig(no_contact_retry_steps=100)
    state = GuidancePhase(Phase.CAPTURE)
    for _ in range(99):
        state, _, _ = fsm_update(state, _geom(SQUARE), TARGET, 0, cfg)
        assert state.phase is Phase.CAPTURE
    state, _, _ = fsm_update(state, _geom(SQUARE), TARGET, 0, cfg)
    assert state.phase is Phase.ORIENTING


def test_fsm_contact_resets_retry_counter():
    cfg = GuidanceConfig(no_contact_retry_steps=3)
    state = GuidancePhase(Phase.CAPTURE)
    for contact in (0, 0, 1, 0, 0):
        state, _, _ = fsm_update(state, _geom(SQUARE), TARGET, contact, cfg)
    assert state.phase is Phase.CAPTURE


def test_capture_condition_thresholds():
    cfg = GuidanceConfig()
    tight = SQUARE * (8.0 / max_pairwise_distance(SQUARE))
    v = np.zeros(3)
    assert capture_condition(tight, v, v, 1, cfg)
    assert not capture_condition(tight, v, v, 0, cfg)
    assert not capture_condition(tight * 1.001, v, v, 1, cfg)
    assert capture_condition(tight, [0.1, 0, 0], v, 1, cfg)
    assert not capture_condition(tight, [0.1001, 0, 0], v, 1, cfg)


def test_detect_capture_needs_200_steps():
    cfg = GuidanceConfig()
    corners = SQUARE * 0.1
    v = np.zeros(3)
    counter, captured = 0, False
    for _ in range(199):
        captured, counter = detect_capture(corners, v, v, 1, counter, cfg)
    assert not captured and counter == 199
    captured, counter = detect_capture(corners, v, v, 1, counter, cfg)
    assert captured and counter == 200


def test_detect_capture_resets_on_break():
    cfg = GuidanceConfig()
    corners = SQUARE * 0.1
    v = np.zeros(3)
    counter = 150
    captured, counter = detect_capture(corners, v, v, 0, counter, cfg)
    assert not captured and counter == 0


def test_differencer():
    d = TargetDifferencer(0.5)
    p = np.zeros((4, 3))
    t1 = d(p, Phase.ORIENTING)
    np.testing.assert_array_equal(t1.velocities, 0.0)
    t2 = d(p + 1.0, Phase.ORIENTING)
    np.testing.assert_allclose(t2.velocities, 2.0)
    np.testing.assert_array_equal(t2.accelerations, 0.0)
    t3 = d(p + 3.0, Phase.ORIENTING)
    np.testing.assert_allclose(t3.velocities, 4.0)
    np.testing.assert_allclose(t3.accelerations, 4.0)
    t4 = d(p + 10.0, Phase.APPROACHING)  # phase switch restarts the history
    np.testing.assert_array_equal(t4.velocities, 0.0)
