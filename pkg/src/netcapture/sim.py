"""Episode orchestration: guidance -> control -> physics -> bookkeeping, once
per 20 ms control step, until capture, timeout, divergence or fuel exhaustion."""

from __future__ import annotations

import csv
import json
import math
from dataclasses import asdict, dataclass, field

import numpy as np

from netcapture.actuation import CornerController, CornerControllerState
from netcapture.config import SimConfig, TargetKinematics, to_plain
from netcapture.dynamics import PhysicsEngine, SimulationDiverged, init_scene
from netcapture.guidance import (
    GuidancePhase,
    TargetDifferencer,
    TargetSet,
    detect_capture,
    fsm_update,
    max_pairwise_distance,
    net_geometry,
    projected_area,
)
from netcapture.netmodels import max_edge_strain

# log-spaced histogram bins shared by every episode so batches can be summed
HIST_EDGES = np.logspace(-6, 4, 101)
HIST_QUANTITIES = ("thrust", "velocity", "acceleration", "internal_force")


class LogHistogram:
    def __init__(self):
        self.counts = np.zeros(len(HIST_EDGES) + 1, dtype=np.int64)  # [under, bins..., over]
        self._lo = math.log10(HIST_EDGES[0])
        self._width = (math.log10(HIST_EDGES[-1]) - self._lo) / (len(HIST_EDGES) - 1)

    def add(self, values) -> None:
        v = np.asarray(values, dtype=float).ravel()
        idx = np.zeros(len(v), dtype=np.int64)
        pos = v >= HIST_EDGES[0]
        idx[pos] = 1 + np.floor((np.log10(v[pos]) - self._lo) / self._width).astype(np.int64)
        np.minimum(idx, len(self.counts) - 1, out=idx)
        self.counts += np.bincount(idx, minlength=len(self.counts))


@dataclass
class EpisodeMetrics:
    captured: bool
    capture_time: float | None
    fuel_total: float
    fuel_per_satellite: list[float]
    contact_points_at_capture: int | None
    effective_area_at_first_contact: float | None
    termination_reason: str
    steps: int = 0
    sim_time: float = 0.0
    max_thrust: float = 0.0
    max_internal_force: float = 0.0
    max_edge_strain: float = 0.0
    histograms: dict[str, list[int]] = field(default_factory=dict)

    def to_dict(self) -> dict:
        return asdict(self)


RECORD_COLUMNS = (
    ["step", "t", "phase"]
    + [f"corner{k}_{ax}" for k in range(4) for ax in "xyz"]
    + [f"corner{k}_v{ax}" for k in range(4) for ax in "xyz"]
    + ["debris_x", "debris_y", "debris_z", "debris_qw", "debris_qx", "debris_qy", "debris_qz",
       "debris_vx", "debris_vy", "debris_vz"]
    + [f"thrust{k}_{ax}" for k in range(4) for ax in "xyz"]
    + ["contact_count", "leftover_angle", "area_fraction", "projected_area"]
    + [f"mass{k}" for k in range(4)]
    + ["max_internal_force", "corner_spread", "velocity_mismatch", "capture_counter"]
)


@dataclass
class EpisodeRecord:
    rows: list[list] = field(default_factory=list)

    columns = RECORD_COLUMNS

    def __len__(self) -> int:
        return len(self.rows)

    def column(self, name: str) -> np.ndarray:
        i = RECORD_COLUMNS.index(name)
        values = [r[i] for r in self.rows]
        if name == "phase":
            return np.array(values, dtype=object)
        return np.array(values, dtype=float)

    def write_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(RECORD_COLUMNS)
            for row in self.rows:
                w.writerow([repr(v) if isinstance(v, float) else v for v in row])


def record_step(record: EpisodeRecord | None, **values) -> None:
    """Append one outer-step row; no-op when logging is disabled."""
    if record is None:
        return
    corners, corner_vel, thrust = values["corners"], values["corner_vel"], values["thrust"]
    debris = values["debris"]
    row = [values["step"], values["t"], values["phase"]]
    row += [float(x) for x in corners.ravel()]
    row += [float(x) for x in corner_vel.ravel()]
    row += [float(x) for x in debris.position]
    row += [float(x) for x in debris.orientation]
    row += [float(x) for x in debris.lin_vel]
    row += [float(x) for x in thrust.ravel()]
    row += [int(values["contact_count"]), float(values["leftover_angle"]),
            float(values["area_fraction"]), float(values["projected_area"])]
    row += [float(m) for m in values["masses"]]
    row += [float(values["max_internal_force"]), float(values["corner_spread"]),
            float(values["velocity_mismatch"]), int(values["capture_counter"])]
    record.rows.append(row)


class Episode:
    """Stateful single episode; ``step()`` advances one control step."""

    def __init__(self, config: SimConfig, record: bool = False, backend: str | None = None,
                 stats_every: int = 5):
        self.config = config.validate()
        self.net, self.debris = init_scene(config)
        self.engine = PhysicsEngine(config, backend=backend)
        self.guidance = GuidancePhase()
        self.differ = TargetDifferencer(config.control_dt)
        self.controller = CornerController(config.controller, config.control_dt)
        corners = self.net.corner_indices
        self.ctrl_state = CornerControllerState.initial(self.net.node_mass[corners])
        self.contact_count = _initial_contacts(self)
        self.q_ddot = np.zeros((4, 3))
        self.debris_acc = np.zeros(3)
        self.capture_counter = 0
        self.step_index = 0
        self.t = 0.0
        self.captured = False
        self.capture_time = None
        self.first_contact_area = None
        self.contacts_at_capture = None
        self.max_thrust = 0.0
        self.max_internal = 0.0
        self.max_strain = 0.0
        self.record = EpisodeRecord() if record else None
        self.stats_every = stats_every
        self.hist = {name: LogHistogram() for name in HIST_QUANTITIES}
        self._ext = np.zeros_like(self.net.node_pos)
        self.last_thrust = np.zeros((4, 3))
        self.last_raw = np.zeros((4, 3))
        self.phase_log: list[tuple[int, str, str]] = []

    def step(self) -> None:
        cfg = self.config
        gcfg = cfg.guidance
        net, debris = self.net, self.debris
        corners_idx = net.corner_indices
        geom = net_geometry(net)
        prev_phase = self.guidance.phase
        self.guidance, target_pos, report = fsm_update(
            self.guidance, geom, debris.position, self.contact_count, gcfg, self.t)
        if self.guidance.phase is not prev_phase:
            self.controller.reset_integral(self.ctrl_state)
            self.phase_log.append((self.step_index, prev_phase.value, self.guidance.phase.value))
        if gcfg.target_kinematics is TargetKinematics.DEBRIS:
            targets = TargetSet(target_pos, np.tile(debris.lin_vel, (4, 1)),
                                np.tile(self.debris_acc, (4, 1)))
        else:
            targets = self.differ(target_pos, self.guidance.phase)
            if gcfg.target_kinematics is TargetKinematics.VELOCITY:
                targets.accelerations = np.zeros((4, 3))

        q = net.node_pos[corners_idx]
        q_dot = net.node_vel[corners_idx]
        thrust, raw = self.controller.command(self.ctrl_state, q, q_dot, self.q_ddot, targets)
        self.last_thrust, self.last_raw = thrust, raw
        self._ext[corners_idx] = thrust

        v_before = debris.lin_vel.copy()
        self.contact_count = self.engine.advance(net, debris, self._ext, step_index=self.step_index)
        self.debris_acc = (debris.lin_vel - v_before) / cfg.control_dt
        self.step_index += 1
        self.t = self.step_index * cfg.control_dt

        self.controller.burn(self.ctrl_state, thrust)
        net.node_mass[corners_idx] = self.ctrl_state.masses
        self.q_ddot = self.engine.last_force[corners_idx] / net.node_mass[corners_idx, None]

        corners = net.corners
        bary_vel = net.barycenter_velocity()
        self.captured, self.capture_counter = detect_capture(
            corners, bary_vel, debris.lin_vel, self.contact_count, self.capture_counter, gcfg)
        if self.first_contact_area is None and self.contact_count > 0:
            axis = debris.position - corners.mean(axis=0)
            if np.linalg.norm(axis) > 1e-12:
                self.first_contact_area = projected_area(corners, axis)
            else:
                self.first_contact_area = 0.0
        if self.captured:
            self.capture_time = self.t
            self.contacts_at_capture = self.contact_count

        thrust_norm = np.linalg.norm(thrust, axis=1)
        if thrust_norm.max() > cfg.controller.thrust_limit:
            raise AssertionError(f"thrust {thrust_norm.max()!r} N above the limit at step {self.step_index}")
        internal = np.linalg.norm(self.engine.internal_force, axis=1)
        self.max_thrust = max(self.max_thrust, float(thrust_norm.max()))
        self.max_internal = max(self.max_internal, float(internal.max()))
        if self.config.net_model.value == "inextensible":
            self.max_strain = max(self.max_strain, max_edge_strain(net.node_pos, self.engine.topology))
        if self.step_index % self.stats_every == 0:
            self.hist["thrust"].add(thrust_norm)
            self.hist["velocity"].add(np.linalg.norm(net.node_vel - debris.lin_vel, axis=1))
            self.hist["acceleration"].add(
                np.linalg.norm(self.engine.last_force, axis=1) / net.node_mass)
            self.hist["internal_force"].add(internal)

        if self.record is not None:
            record_step(
                self.record, step=self.step_index, t=self.t, phase=self.guidance.phase.value,
                corners=corners, corner_vel=net.node_vel[corners_idx], debris=debris,
                thrust=thrust, contact_count=self.contact_count,
                leftover_angle=report.leftover_angle, area_fraction=report.area_fraction,
                projected_area=report.projected_area, masses=self.ctrl_state.masses,
                max_internal_force=float(internal.max()),
                corner_spread=max_pairwise_distance(corners),
                velocity_mismatch=float(np.linalg.norm(bary_vel - debris.lin_vel)),
                capture_counter=self.capture_counter)

    def metrics(self, reason: str) -> EpisodeMetrics:
        fuel = self.ctrl_state.fuel_used
        return EpisodeMetrics(
            captured=self.captured,
            capture_time=self.capture_time,
            fuel_total=float(fuel.sum()),
            fuel_per_satellite=[float(f) for f in fuel],
            contact_points_at_capture=self.contacts_at_capture,
            effective_area_at_first_contact=self.first_contact_area,
            termination_reason=reason,
            steps=self.step_index,
            sim_time=self.t,
            max_thrust=self.max_thrust,
            max_internal_force=self.max_internal,
            max_edge_strain=self.max_strain,
            histograms={k: h.counts.tolist() for k, h in self.hist.items()},
        )


def _initial_contacts(ep: Episode) -> int:
    from netcapture.contact import contact_count
    return contact_count(ep.net.node_pos, ep.engine.shape, ep.debris.position,
                         ep.debris.orientation, ep.config.contact.node_radius)


def run_episode(config: SimConfig, record: bool = False, backend: str | None = None):
    """Run one episode to termination; returns ``(metrics, record or None)``."""
    ep = Episode(config, record=record, backend=backend)
    n_steps = int(round(config.timeout / config.control_dt))
    reason = "timeout"
    try:
        while ep.step_index < n_steps:
            ep.step()
            if ep.captured:
                reason = "captured"
                break
            if ep.ctrl_state.fuel_exhausted:
                reason = "fuel_exhausted"
                break
    except SimulationDiverged:
        reason = "diverged"
    return ep.metrics(reason), ep.record


def write_metrics_json(metrics: EpisodeMetrics, config: SimConfig, path) -> None:
    doc = {"metrics": metrics.to_dict(), "config": to_plain(config)}
    with open(path, "w") as fh:
        json.dump(doc, fh, indent=2)
