"""Simulation state, scene initialisation and time integration.

One outer control step of ``control_dt`` is split into ``substeps``
semi-implicit Euler substeps. Thrust is held over the outer step; internal,
contact and CW forces are re-evaluated every substep.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from netcapture import kernels, quaternion
from netcapture.config import ConfigError, NetModelKind, SimConfig
from netcapture.contact import CompositeShape, signed_distance_many
from netcapture.netmodels import NetTopology, bending_coefficient, build_topology, grid_rest_uv

DIVERGENCE_RADIUS = 1e6  # m

MODEL_CODES = {
    NetModelKind.INEXTENSIBLE: 0,
    NetModelKind.SHELL: 1,
    NetModelKind.SAINT_VENANT: 2,
}


class SimulationDiverged(RuntimeError):
    def __init__(self, step: int, reason: str = "non-finite or runaway state"):
        self.step = step
        super().__init__(f"simulation diverged at step {step}: {reason}")


@dataclass
class NetState:
    node_pos: np.ndarray
    node_vel: np.ndarray
    node_mass: np.ndarray
    rows: int
    cols: int
    corner_indices: np.ndarray
    rest_spacing: float

    @property
    def corners(self) -> np.ndarray:
        return self.node_pos[self.corner_indices]

    @property
    def corner_velocities(self) -> np.ndarray:
        return self.node_vel[self.corner_indices]

    def centroid(self) -> np.ndarray:
        return self.node_pos.mean(axis=0)

    def barycenter_velocity(self) -> np.ndarray:
        m = self.node_mass
        return (m[:, None] * self.node_vel).sum(axis=0) / m.sum()

    def momentum(self) -> np.ndarray:
        return (self.node_mass[:, None] * self.node_vel).sum(axis=0)

    def copy(self) -> "NetState":
        return replace(self, node_pos=self.node_pos.copy(), node_vel=self.node_vel.copy(),
                       node_mass=self.node_mass.copy())


@dataclass
class DebrisState:
    position: np.ndarray
    orientation: np.ndarray  # (w, x, y, z)
    lin_vel: np.ndarray
    ang_vel: np.ndarray
    mass: float
    inertia_body: np.ndarray
    geometry: CompositeShape

    def copy(self) -> "DebrisState":
        return replace(self, position=self.position.copy(), orientation=self.orientation.copy(),
                       lin_vel=self.lin_vel.copy(), ang_vel=self.ang_vel.copy())

    def momentum(self) -> np.ndarray:
        return self.mass * self.lin_vel


@dataclass
class ForceBuffer:
    node: np.ndarray
    debris_force: np.ndarray = field(default_factory=lambda: np.zeros(3))
    debris_torque: np.ndarray = field(default_factory=lambda: np.zeros(3))

    @classmethod
    def zeros(cls, n_nodes: int) -> "ForceBuffer":
        return cls(np.zeros((n_nodes, 3)))

    def zero(self) -> None:
        self.node[:] = 0.0
        self.debris_force[:] = 0.0
        self.debris_torque[:] = 0.0


def plane_basis(normal) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Right-handed ``(e1, e2, n)`` with ``n`` the normalized input."""
    n = np.asarray(normal, dtype=float)
    n = n / np.linalg.norm(n)
    helper = np.eye(3)[np.argmin(np.abs(n))]
    e1 = helper - (helper @ n) * n
    e1 /= np.linalg.norm(e1)
    e2 = np.cross(n, e1)
    return e1, e2, n


def net_topology(config: SimConfig) -> NetTopology:
    net = config.net
    return build_topology(net.rows, net.cols, grid_rest_uv(net.rows, net.cols, net.spacing))


def init_scene(config: SimConfig) -> tuple[NetState, DebrisState]:
    """Flat net at the configured offset (zero relative velocity), debris at the origin."""
    config.validate()
    net_cfg = config.net
    uv = grid_rest_uv(net_cfg.rows, net_cfg.cols, net_cfg.spacing)
    e1, e2, n = plane_basis(net_cfg.normal)
    offset = np.asarray(net_cfg.offset, dtype=float)
    pos = offset + uv[:, :1] * e1 + uv[:, 1:] * e2

    shape = CompositeShape.from_boxes(config.debris.boxes)
    debris = DebrisState(
        position=np.zeros(3),
        orientation=np.array([1.0, 0.0, 0.0, 0.0]),
        lin_vel=np.asarray(config.debris.initial_velocity, dtype=float).copy(),
        ang_vel=np.asarray(config.debris.initial_angular_velocity, dtype=float).copy(),
        mass=float(config.debris.mass),
        inertia_body=shape.inertia(config.debris.mass),
        geometry=shape,
    )

    if net_cfg.initial_clearance is not None:
        pos = _clear_overlap(pos, offset, n, debris, net_cfg.initial_clearance)

    n_nodes = net_cfg.rows * net_cfg.cols
    corners = np.array([0, net_cfg.cols - 1, n_nodes - 1, n_nodes - net_cfg.cols])
    mass = np.full(n_nodes, float(net_cfg.node_mass))
    mass[corners] = net_cfg.corner_mass
    vel = np.tile(np.asarray(net_cfg.initial_velocity, dtype=float) + debris.lin_vel, (n_nodes, 1))
    net = NetState(pos, vel, mass, net_cfg.rows, net_cfg.cols, corners, net_cfg.spacing)
    return net, debris


def _clear_overlap(pos, offset, normal, debris: DebrisState, clearance: float,
                   increment: float = 0.05, max_shift: float = 100.0) -> np.ndarray:
    """Translate the net outward along the offset direction until it clears the debris."""
    norm = np.linalg.norm(offset)
    direction = offset / norm if norm > 1e-12 else normal
    shift = 0.0
    while True:
        moved = pos + shift * direction
        d, _ = signed_distance_many(debris.geometry, moved, debris.position, debris.orientation)
        if d.min() >= clearance:
            return moved
        shift += increment
        if shift > max_shift:
            raise ConfigError("net.offset", "could not place the net clear of the debris")


def integrate_debris(debris: DebrisState, force, torque, dt: float) -> DebrisState:
    """Semi-implicit rigid-body update; Euler's equations in the body frame."""
    if not dt > 0:
        raise ValueError("dt must be > 0")
    out = debris.copy()
    rot = quaternion.to_matrix(out.orientation)
    out.lin_vel = out.lin_vel + np.asarray(force, dtype=float) / out.mass * dt
    out.position = out.position + out.lin_vel * dt
    inertia = out.inertia_body
    wb = rot.T @ out.ang_vel
    tb = rot.T @ np.asarray(torque, dtype=float)
    wb = wb + dt * np.linalg.solve(inertia, tb - np.cross(wb, inertia @ wb))
    out.ang_vel = rot @ wb
    dq = quaternion.multiply(np.array([0.0, *out.ang_vel]), out.orientation)
    out.orientation = quaternion.normalize(out.orientation + 0.5 * dt * dq)
    return out


class PhysicsEngine:
    """Binds a net topology, debris geometry and parameters to a substep kernel."""

    def __init__(self, config: SimConfig, topology: NetTopology | None = None,
                 shape: CompositeShape | None = None, backend: str | None = None,
                 orbital: bool = True):
        self.config = config
        self.topology = topology if topology is not None else net_topology(config)
        self.shape = shape if shape is not None else CompositeShape.from_boxes(config.debris.boxes)
        self.orbital = orbital
        el = config.elastic
        lam, mu = el.lame()
        topo = self.topology
        ct = config.contact
        cls = kernels.stepper_class(backend)
        self.backend = backend or kernels.BACKEND
        self.stepper = cls(
            topo.rows, topo.cols, topo.edges, topo.rest_length, topo.bend,
            bending_coefficient(topo, el.bending_stiffness), topo.tris, topo.dm_inv,
            topo.rest_area * el.thickness, MODEL_CODES[NetModelKind(config.net_model)],
            el.spring_constant(), el.bending_stiffness, lam, mu, el.damping,
            el.constraint_iterations, self.shape.half_extents, self.shape.centers,
            self.shape.rotations, ct.penalty_stiffness, ct.penalty_damping, ct.friction_coeff,
            ct.node_radius, ct.self_contact_enabled, config.orbit.omega, config.debris.mass,
            self.shape.inertia(config.debris.mass),
        )

    def advance(self, net: NetState, debris: DebrisState, node_ext, debris_ext=None,
                nsub: int | None = None, dt: float | None = None, step_index: int = 0) -> int:
        """Advance in place by ``nsub`` substeps; returns the final contact count."""
        nsub = self.config.substeps if nsub is None else nsub
        dt = self.config.substep_dt if dt is None else dt
        if debris_ext is None:
            debris_ext = np.zeros(3)
        count = self.stepper.advance(
            net.node_pos, net.node_vel, net.node_mass, np.ascontiguousarray(node_ext, dtype=float),
            debris.position, debris.orientation, debris.lin_vel, debris.ang_vel,
            np.ascontiguousarray(debris_ext, dtype=float), dt, nsub, self.orbital)
        check_finite(net, debris, step_index)
        return int(count)

    @property
    def last_force(self) -> np.ndarray:
        return self.stepper.last_force

    @property
    def internal_force(self) -> np.ndarray:
        return self.stepper.internal_force


def check_finite(net: NetState, debris: DebrisState, step_index: int) -> None:
    pos = net.node_pos
    if not (np.isfinite(pos).all() and np.isfinite(net.node_vel).all()
            and np.isfinite(debris.position).all() and np.isfinite(debris.orientation).all()):
        raise SimulationDiverged(step_index, "non-finite state")
    if np.abs(pos).max() > DIVERGENCE_RADIUS or np.abs(debris.position).max() > DIVERGENCE_RADIUS:
        raise SimulationDiverged(step_index, f"position beyond {DIVERGENCE_RADIUS:g} m")
