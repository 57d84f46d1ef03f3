"""High-level guidance: the orienting / approaching / capture state machine,
corner target generation and capture detection."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from netcapture.config import GuidanceConfig


class Phase(str, Enum):
    ORIENTING = "orienting"
    APPROACHING = "approaching"
    CAPTURE = "capture"


@dataclass
class GuidancePhase:
    phase: Phase = Phase.ORIENTING
    entry_time: float = 0.0
    capture_counter: int = 0
    no_contact_counter: int = 0


@dataclass
class TargetSet:
    positions: np.ndarray  # (4, 3)
    velocities: np.ndarray = field(default_factory=lambda: np.zeros((4, 3)))
    accelerations: np.ndarray = field(default_factory=lambda: np.zeros((4, 3)))


@dataclass
class NetGeometry:
    """What guidance needs from the net: corners (perimeter order) and side lengths."""
    corners: np.ndarray
    side_u: float
    side_v: float

    @property
    def stretched_area(self) -> float:
        return self.side_u * self.side_v

    @property
    def centroid(self) -> np.ndarray:
        return self.corners.mean(axis=0)


def net_geometry(net) -> NetGeometry:
    return NetGeometry(net.corners.copy(), (net.cols - 1) * net.rest_spacing,
                       (net.rows - 1) * net.rest_spacing)


# --------------------------------------------------------------------------
# geometric primitives

def fit_plane_pca(corners, target_center=None) -> tuple[np.ndarray, np.ndarray, bool]:
    """Plane through the corners: ``(normal, centroid, degenerate)``.

    The normal is the eigenvector of the position covariance with the smallest
    eigenvalue, oriented toward ``target_center``. When the corners are
    collinear the direction to the target is returned and ``degenerate`` is set.
    """
    pts = np.asarray(corners, dtype=float)
    centroid = pts.mean(axis=0)
    centered = pts - centroid
    cov = centered.T @ centered
    evals, evecs = np.linalg.eigh(cov)
    if evals[2] <= 0.0:
        raise ValueError("corners are coincident")
    toward = None
    if target_center is not None:
        toward = np.asarray(target_center, dtype=float) - centroid
    if evals[1] <= 1e-12 * evals[2]:
        if toward is None or np.linalg.norm(toward) == 0.0:
            return evecs[:, 0], centroid, True
        return toward / np.linalg.norm(toward), centroid, True
    normal = evecs[:, 0]
    if toward is not None and normal @ toward < 0.0:
        normal = -normal
    return normal, centroid, False


def leftover_angle(normal, net_centroid, target_center) -> float:
    """Angle in [0, pi/2] between the normal's line and the direction to the target."""
    d = np.asarray(target_center, dtype=float) - np.asarray(net_centroid, dtype=float)
    n = np.asarray(normal, dtype=float)
    c = abs(n @ d) / (np.linalg.norm(n) * np.linalg.norm(d))
    return math.acos(min(1.0, c))


def _perp_basis(axis):
    a = np.asarray(axis, dtype=float)
    a = a / math.sqrt(a @ a)
    helper = np.zeros(3)
    helper[np.argmin(np.abs(a))] = 1.0
    e1 = helper - (helper @ a) * a
    e1 /= math.sqrt(e1 @ e1)
    e2 = np.array([a[1] * e1[2] - a[2] * e1[1],
                   a[2] * e1[0] - a[0] * e1[2],
                   a[0] * e1[1] - a[1] * e1[0]])
    return e1, e2, a


def projected_area(corners, axis) -> float:
    """Shoelace area of the corners projected on the plane normal to ``axis``."""
    e1, e2, _ = _perp_basis(axis)
    pts = np.asarray(corners, dtype=float)
    x, y = pts @ e1, pts @ e2
    x_next = np.concatenate((x[1:], x[:1]))
    y_next = np.concatenate((y[1:], y[:1]))
    return 0.5 * abs(float(x @ y_next - y @ x_next))


def _direction(geom: NetGeometry, target_center) -> np.ndarray:
    d = np.asarray(target_center, dtype=float) - geom.centroid
    norm = math.sqrt(d @ d)
    if norm < 1e-12:
        return np.array([1.0, 0.0, 0.0])
    return d / norm


# --------------------------------------------------------------------------
# target generators

def orienting_targets(geom: NetGeometry, target_center) -> np.ndarray:
    """Fully stretched rectangle normal to the net-to-target direction, centred
    on the corner centroid, rotated about that direction (and mirrored if it
    helps) to minimise summed squared corner travel."""
    axis = _direction(geom, target_center)
    e1, e2, _ = _perp_basis(axis)
    centroid = geom.centroid
    rel = geom.corners - centroid
    p = np.stack([rel @ e1, rel @ e2], axis=1)
    hu, hv = 0.5 * geom.side_u, 0.5 * geom.side_v
    template = np.array([[-hu, -hv], [hu, -hv], [hu, hv], [-hu, hv]])
    best = None
    for mirror in (1.0, -1.0):
        s = template * np.array([1.0, mirror])
        dot = float(np.sum(s * p))
        cross = float(np.sum(s[:, 0] * p[:, 1] - s[:, 1] * p[:, 0]))
        theta = math.atan2(cross, dot)
        c, sn = math.cos(theta), math.sin(theta)
        rot = s @ np.array([[c, sn], [-sn, c]])
        cost = float(np.sum((rot - p) ** 2))
        if best is None or cost < best[0] - 1e-12:
            best = (cost, rot)
    rot = best[1]
    return centroid + rot[:, :1] * e1 + rot[:, 1:] * e2


def approaching_targets(geom: NetGeometry, target_center, scale: float = 1.0) -> np.ndarray:
    shift = scale * (np.asarray(target_center, dtype=float) - geom.centroid)
    return orienting_targets(geom, target_center) + shift


def capture_targets(corners) -> np.ndarray:
    pts = np.asarray(corners, dtype=float)
    return np.repeat(pts.mean(axis=0, keepdims=True), len(pts), axis=0)


def max_pairwise_distance(points) -> float:
    pts = np.asarray(points, dtype=float)
    diff = pts[:, None, :] - pts[None, :, :]
    return float(np.sqrt(np.max(np.einsum("ijk,ijk->ij", diff, diff))))


# --------------------------------------------------------------------------
# state machine

@dataclass
class GuardReport:
    """Quantities evaluated by the orienting guard at one step."""
    leftover_angle: float
    area_fraction: float
    projected_area: float


def orienting_guard(geom: NetGeometry, target_center, config: GuidanceConfig) -> tuple[bool, GuardReport]:
    normal, centroid, _ = fit_plane_pca(geom.corners, target_center)
    axis = _direction(geom, target_center)
    angle = leftover_angle(normal, centroid, target_center)
    area = projected_area(geom.corners, axis)
    frac = area / geom.stretched_area
    ok = angle <= config.leftover_angle_threshold and frac >= config.area_fraction_threshold
    return ok, GuardReport(angle, frac, area)


def fsm_update(state: GuidancePhase, geom: NetGeometry, target_center, contact_count: int,
               config: GuidanceConfig, t: float = 0.0) -> tuple[GuidancePhase, np.ndarray, GuardReport]:
    """One guidance tick: returns the next phase, corner target positions and
    the guard quantities computed on the way."""
    ok, report = orienting_guard(geom, target_center, config)
    nxt = GuidancePhase(state.phase, state.entry_time, state.capture_counter, state.no_contact_counter)
    if state.phase is Phase.ORIENTING:
        if ok:
            nxt = GuidancePhase(Phase.APPROACHING, t, state.capture_counter, 0)
    elif state.phase is Phase.APPROACHING:
        if contact_count > 0:
            nxt = GuidancePhase(Phase.CAPTURE, t, state.capture_counter, 0)
    elif state.phase is Phase.CAPTURE:
        nxt.no_contact_counter = 0 if contact_count > 0 else state.no_contact_counter + 1
        if nxt.no_contact_counter >= config.no_contact_retry_steps:
            nxt = GuidancePhase(Phase.ORIENTING, t, state.capture_counter, 0)

    if nxt.phase is Phase.ORIENTING:
        targets = orienting_targets(geom, target_center)
    elif nxt.phase is Phase.APPROACHING:
        targets = approaching_targets(geom, target_center, config.approach_scale)
    else:
        targets = capture_targets(geom.corners)
    return nxt, targets, report


def capture_condition(corners, net_bary_vel, debris_vel, contact_count: int,
                      config: GuidanceConfig) -> bool:
    return (contact_count > 0
            and max_pairwise_distance(corners) <= config.capture_corner_distance
            and float(np.linalg.norm(np.asarray(net_bary_vel) - np.asarray(debris_vel)))
            <= config.capture_velocity_tol)


def detect_capture(corners, net_bary_vel, debris_vel, contact_count: int, counter: int,
                   config: GuidanceConfig) -> tuple[bool, int]:
    """Advance the sustained-capture counter; captured once it reaches the sustain length."""
    if capture_condition(corners, net_bary_vel, debris_vel, contact_count, config):
        counter += 1
    else:
        counter = 0
    return counter >= config.capture_sustain_steps, counter


class TargetDifferencer:
    """Target velocities and accelerations by backward differences over the
    control step. History restarts whenever the phase changes, so a phase
    switch never produces a target-velocity spike."""

    def __init__(self, dt: float):
        self.dt = dt
        self._hist: list[np.ndarray] = []
        self._phase = None

    def reset(self) -> None:
        self._hist = []
        self._phase = None

    def __call__(self, positions, phase) -> TargetSet:
        if phase != self._phase:
            self._hist = []
            self._phase = phase
        self._hist = (self._hist + [np.array(positions, dtype=float)])[-3:]
        h, dt = self._hist, self.dt
        vel = np.zeros_like(h[-1])
        acc = np.zeros_like(h[-1])
        if len(h) >= 2:
            vel = (h[-1] - h[-2]) / dt
        if len(h) >= 3:
            acc = (h[-1] - 2.0 * h[-2] + h[-3]) / (dt * dt)
        return TargetSet(h[-1], vel, acc)
