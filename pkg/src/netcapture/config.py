"""Configuration objects for a capture episode and for batch experiments.

Every default here is the baseline scenario: 20 ms control step, 20 N thrust
cap, Isp 250 s, 350 kg corner satellites, 0.1 kg net nodes, omega 0.0011 rad/s,
36 deg / 80 % orienting guard, 8 m / 0.1 m/s / 200-step capture guard, 600 s
timeout, E = 10 kPa, nu = 0.3, damping 1e-2.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, fields, is_dataclass
from enum import Enum

import numpy as np


class ConfigError(ValueError):
    """Invalid configuration value; ``key`` is the dotted path of the field."""

    def __init__(self, key: str, message: str, line: int | None = None):
        self.key = key
        self.line = line
        where = f"{key}" if line is None else f"{key} (line {line})"
        super().__init__(f"{where}: {message}")


class NetModelKind(str, Enum):
    INEXTENSIBLE = "inextensible"
    SHELL = "shell"
    SAINT_VENANT = "saint_venant"


class ControllerKind(str, Enum):
    PID = "pid"
    SMC = "smc"


class SMCForm(str, Enum):
    # equivalent control exactly as printed: m*qdd - m*qdd_tar - m*lam*e_dot
    PRINTED = "printed"
    # equivalent control from s_dot = 0 with e = q_tar - q
    REDERIVED = "rederived"


class TargetKinematics(str, Enum):
    # successive target sets differenced over the control step
    DIFFERENCED = "differenced"
    # differenced velocity only; no acceleration feed-forward
    VELOCITY = "velocity"
    # targets treated as at rest relative to the debris: its velocity and acceleration
    DEBRIS = "debris"


@dataclass
class ElasticParams:
    young_modulus: float = 10e3  # Pa
    poisson_ratio: float = 0.3
    damping: float = 1e-2  # edge dashpot, N s/m
    thickness: float = 1e-3  # m
    bending_stiffness: float = 5e-2  # N m, shell only
    edge_stiffness: float | None = None  # N/m; None -> E * thickness
    constraint_iterations: int = 10

    def spring_constant(self) -> float:
        if self.edge_stiffness is not None:
            return float(self.edge_stiffness)
        # axial spring of a strip as wide as the cell: E*(h*s)/s
        return self.young_modulus * self.thickness

    def lame(self) -> tuple[float, float]:
        e, nu = self.young_modulus, self.poisson_ratio
        lam = e * nu / ((1.0 + nu) * (1.0 - 2.0 * nu))
        mu = e / (2.0 * (1.0 + nu))
        return lam, mu

    def validate(self, prefix: str = "elastic") -> None:
        if not self.young_modulus > 0:
            raise ConfigError(f"{prefix}.young_modulus", "must be > 0")
        if not 0.0 <= self.poisson_ratio < 0.5:
            raise ConfigError(f"{prefix}.poisson_ratio", "must be in [0, 0.5)")
        if self.damping < 0:
            raise ConfigError(f"{prefix}.damping", "must be >= 0")
        if not self.thickness > 0:
            raise ConfigError(f"{prefix}.thickness", "must be > 0")
        if self.bending_stiffness < 0:
            raise ConfigError(f"{prefix}.bending_stiffness", "must be >= 0")
        if self.edge_stiffness is not None and not self.edge_stiffness > 0:
            raise ConfigError(f"{prefix}.edge_stiffness", "must be > 0")
        if self.constraint_iterations < 1:
            raise ConfigError(f"{prefix}.constraint_iterations", "must be >= 1")


@dataclass
class NetConfig:
    rows: int = 10
    cols: int = 10
    side_length: float = 16.0  # m, corner-to-corner along an edge
    node_mass: float = 0.1
    corner_mass: float = 350.0
    normal: tuple[float, float, float] = (1.0, 0.0, 0.0)
    offset: tuple[float, float, float] = (-5.0, 0.0, 0.0)
    initial_velocity: tuple[float, float, float] = (0.0, 0.0, 0.0)
    # push the net outward along the offset until every node clears the
    # debris by this much; None keeps the offset exactly as given
    initial_clearance: float | None = 0.5

    @property
    def spacing(self) -> float:
        return self.side_length / (max(self.rows, self.cols) - 1)

    def validate(self, prefix: str = "net") -> None:
        if self.rows < 2 or self.cols < 2:
            raise ConfigError(f"{prefix}.rows", "grid must be at least 2x2")
        if not self.side_length > 0:
            raise ConfigError(f"{prefix}.side_length", "must be > 0")
        if not self.node_mass > 0:
            raise ConfigError(f"{prefix}.node_mass", "must be > 0")
        if not self.corner_mass > 0:
            raise ConfigError(f"{prefix}.corner_mass", "must be > 0")
        if self.corner_mass < self.node_mass:
            raise ConfigError(f"{prefix}.corner_mass", "must be >= node_mass")
        if np.linalg.norm(self.normal) < 1e-12:
            raise ConfigError(f"{prefix}.normal", "must be non-zero")
        if self.initial_clearance is not None and self.initial_clearance < 0:
            raise ConfigError(f"{prefix}.initial_clearance", "must be >= 0")


@dataclass
class ContactParams:
    penalty_stiffness: float = 1e4  # N/m
    penalty_damping: float = 50.0  # N s/m
    friction_coeff: float = 0.5
    node_radius: float = 0.05  # m
    self_contact_enabled: bool = True

    def validate(self, prefix: str = "contact") -> None:
        if not self.penalty_stiffness > 0:
            raise ConfigError(f"{prefix}.penalty_stiffness", "must be > 0")
        if self.penalty_damping < 0:
            raise ConfigError(f"{prefix}.penalty_damping", "must be >= 0")
        if self.friction_coeff < 0:
            raise ConfigError(f"{prefix}.friction_coeff", "must be >= 0")
        if not self.node_radius > 0:
            raise ConfigError(f"{prefix}.node_radius", "must be > 0")


@dataclass
class ControlGains:
    kind: ControllerKind = ControllerKind.SMC
    kp: float = 1e-2
    ki: float = 1e-4
    kd: float = 1e-3
    lam: float = 1e-2
    k_sw: float = 3e-2
    sigma: float = 1e-2
    smc_form: SMCForm = SMCForm.REDERIVED
    thrust_limit: float = 20.0  # N
    isp: float = 250.0  # s
    g0: float = 9.80665  # m/s^2
    dry_mass: float = 250.0  # kg, fuel-exhaustion floor per satellite

    def validate(self, prefix: str = "controller") -> None:
        for name in ("kp", "ki", "kd", "lam", "k_sw"):
            if getattr(self, name) < 0:
                raise ConfigError(f"{prefix}.{name}", "must be >= 0")
        if not self.sigma > 0:
            raise ConfigError(f"{prefix}.sigma", "must be > 0")
        if not self.thrust_limit > 0:
            raise ConfigError(f"{prefix}.thrust_limit", "must be > 0")
        if not self.isp > 0:
            raise ConfigError(f"{prefix}.isp", "must be > 0")
        if not self.g0 > 0:
            raise ConfigError(f"{prefix}.g0", "must be > 0")
        if self.dry_mass < 0:
            raise ConfigError(f"{prefix}.dry_mass", "must be >= 0")


@dataclass
class GuidanceConfig:
    leftover_angle_threshold: float = math.radians(36.0)
    area_fraction_threshold: float = 0.8
    capture_corner_distance: float = 8.0
    capture_velocity_tol: float = 0.1
    capture_sustain_steps: int = 200
    no_contact_retry_steps: int = 100
    approach_scale: float = 1.0
    target_kinematics: TargetKinematics = TargetKinematics.VELOCITY

    def validate(self, prefix: str = "guidance") -> None:
        if not 0 < self.leftover_angle_threshold <= math.pi / 2:
            raise ConfigError(f"{prefix}.leftover_angle_threshold", "must be in (0, pi/2]")
        if not 0 < self.area_fraction_threshold <= 1:
            raise ConfigError(f"{prefix}.area_fraction_threshold", "must be in (0, 1]")
        if not self.capture_corner_distance > 0:
            raise ConfigError(f"{prefix}.capture_corner_distance", "must be > 0")
        if not self.capture_velocity_tol > 0:
            raise ConfigError(f"{prefix}.capture_velocity_tol", "must be > 0")
        if self.capture_sustain_steps < 1:
            raise ConfigError(f"{prefix}.capture_sustain_steps", "must be >= 1")
        if self.no_contact_retry_steps < 1:
            raise ConfigError(f"{prefix}.no_contact_retry_steps", "must be >= 1")
        if self.approach_scale < 0:
            raise ConfigError(f"{prefix}.approach_scale", "must be >= 0")
        try:
            self.target_kinematics = TargetKinematics(self.target_kinematics)
        except ValueError:
            raise ConfigError(f"{prefix}.target_kinematics",
                              "must be 'differenced', 'velocity' or 'debris'") from None


@dataclass
class OrbitParams:
    omega: float = 0.0011  # rad/s
    r0: float = 7171.0  # km, reporting only

    def validate(self, prefix: str = "orbit") -> None:
        if not self.omega > 0:
            raise ConfigError(f"{prefix}.omega", "must be > 0")
        if not self.r0 > 0:
            raise ConfigError(f"{prefix}.r0", "must be > 0")


@dataclass
class BoxPrimitive:
    half_extents: tuple[float, float, float]
    offset: tuple[float, float, float] = (0.0, 0.0, 0.0)
    # body-frame orientation of the box, quaternion (w, x, y, z)
    rotation: tuple[float, float, float, float] = (1.0, 0.0, 0.0, 0.0)


def envisat_boxes() -> list[BoxPrimitive]:
    """Main bus 10 x 4 x 4 m (long axis along-track) plus a 14 x 5 x 0.1 m
    solar array extending from the -y end of the bus."""
    return [
        BoxPrimitive(half_extents=(2.0, 5.0, 2.0)),
        BoxPrimitive(half_extents=(2.5, 7.0, 0.05), offset=(0.0, -12.0, 0.0)),
    ]


@dataclass
class DebrisConfig:
    mass: float = 7821.0
    boxes: list[BoxPrimitive] = field(default_factory=envisat_boxes)
    initial_velocity: tuple[float, float, float] = (0.0, 0.0, 0.0)
    initial_angular_velocity: tuple[float, float, float] = (0.0, 0.0, 0.0)

    def validate(self, prefix: str = "debris") -> None:
        if not self.mass > 0:
            raise ConfigError(f"{prefix}.mass", "must be > 0")
        if not self.boxes:
            raise ConfigError(f"{prefix}.boxes", "at least one box is required")
        for i, box in enumerate(self.boxes):
            if len(box.half_extents) != 3 or min(box.half_extents) <= 0:
                raise ConfigError(f"{prefix}.boxes[{i}].half_extents", "must be 3 positive values")
            if np.linalg.norm(box.rotation) < 1e-12:
                raise ConfigError(f"{prefix}.boxes[{i}].rotation", "must be a non-zero quaternion")


@dataclass
class SimConfig:
    net_model: NetModelKind = NetModelKind.SAINT_VENANT
    elastic: ElasticParams = field(default_factory=ElasticParams)
    net: NetConfig = field(default_factory=NetConfig)
    contact: ContactParams = field(default_factory=ContactParams)
    controller: ControlGains = field(default_factory=ControlGains)
    guidance: GuidanceConfig = field(default_factory=GuidanceConfig)
    orbit: OrbitParams = field(default_factory=OrbitParams)
    debris: DebrisConfig = field(default_factory=DebrisConfig)
    control_dt: float = 0.02
    substeps: int = 20
    timeout: float = 600.0
    seed: int = 0

    def validate(self) -> "SimConfig":
        self.elastic.validate()
        self.net.validate()
        self.contact.validate()
        self.controller.validate()
        self.guidance.validate()
        self.orbit.validate()
        self.debris.validate()
        if not self.control_dt > 0:
            raise ConfigError("sim.control_dt", "must be > 0")
        if self.substeps < 1:
            raise ConfigError("sim.substeps", "must be >= 1")
        if not self.timeout > 0:
            raise ConfigError("sim.timeout", "must be > 0")
        return self

    @property
    def substep_dt(self) -> float:
        return self.control_dt / self.substeps


ALL_COMBINATIONS: tuple[tuple[ControllerKind, NetModelKind], ...] = tuple(
    (c, m) for c in ControllerKind for m in NetModelKind
)


@dataclass
class BatchSpec:
    samples: int = 200
    radius: float = 5.0
    seed: int = 0
    combinations: list[tuple[ControllerKind, NetModelKind]] = field(
        default_factory=lambda: list(ALL_COMBINATIONS)
    )
    workers: int = 1
    out_dir: str = "out"
    volume: bool = False  # sample the ball instead of the sphere surface

    def validate(self, prefix: str = "batch") -> "BatchSpec":
        if self.samples < 1:
            raise ConfigError(f"{prefix}.samples", "must be >= 1")
        if not self.radius > 0:
            raise ConfigError(f"{prefix}.radius", "must be > 0")
        if self.workers < 1:
            raise ConfigError(f"{prefix}.workers", "must be >= 1")
        if not self.combinations:
            raise ConfigError(f"{prefix}.combinations", "must not be empty")
        return self


def combination_label(controller: ControllerKind, model: NetModelKind) -> str:
    return f"{ControllerKind(controller).value}-{NetModelKind(model).value}"


def to_plain(obj):
    """Dataclass tree -> nested dict of builtins (enums as values, tuples as lists)."""
    if is_dataclass(obj):
        return {f.name: to_plain(getattr(obj, f.name)) for f in fields(obj)}
    if isinstance(obj, Enum):
        return obj.value
    if isinstance(obj, (list, tuple)):
        return [to_plain(v) for v in obj]
    return obj
