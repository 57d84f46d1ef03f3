"""Corner-satellite control: PID, sliding-mode control, thrust saturation and
propellant depletion."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from netcapture.config import ControlGains, ControllerKind, SMCForm


def pid_force(e, e_dot, integral, gains: ControlGains) -> np.ndarray:
    return (gains.kp * np.asarray(e, dtype=float) + gains.ki * np.asarray(integral, dtype=float)
            + gains.kd * np.asarray(e_dot, dtype=float))


def smc_force(e, e_dot, q_ddot, q_tar_ddot, m, gains: ControlGains,
              form: SMCForm | None = None) -> np.ndarray:
    """Sliding-mode thrust with surface ``s = -(e_dot + lam e)``, ``e = q_tar - q``.

    ``m`` may be an array broadcasting against the vectors (one mass per row).
    """
    m = np.asarray(m, dtype=float)
    if not np.all(m > 0):
        raise ValueError("mass must be > 0")
    form = SMCForm(form or gains.smc_form)
    e = np.asarray(e, dtype=float)
    e_dot = np.asarray(e_dot, dtype=float)
    q_ddot = np.asarray(q_ddot, dtype=float)
    q_tar_ddot = np.asarray(q_tar_ddot, dtype=float)
    lam, k, sigma = gains.lam, gains.k_sw, gains.sigma
    if form is SMCForm.PRINTED:
        return (m * q_ddot - m * q_tar_ddot - m * lam * e_dot
                - k * np.tanh((e_dot + lam * e) / sigma))
    return m * q_tar_ddot + m * lam * e_dot - k * np.tanh(-(e_dot + lam * e) / sigma)


def _norm_bound(f: np.ndarray) -> float:
    # the largest of the usual ways to evaluate |f|; they differ in the last ulp
    # and the cap must hold whichever one a caller uses
    total = 0.0
    for x in f:
        total += float(x) * float(x)
    return max(math.sqrt(total), math.sqrt(float(np.dot(f, f))), math.hypot(*f),
               math.sqrt(float(np.einsum("i,i", f, f))))


def _clamp_scale(f: np.ndarray, limit: float, norm: float) -> float:
    # limit/norm can leave the scaled norm one ulp above the limit; step the
    # factor down until the emitted force never exceeds it
    scale = limit / norm
    while _norm_bound(f * scale) > limit:
        scale = math.nextafter(scale, 0.0)
    return scale


def saturate(force, limit: float):
    """Direction-preserving clamp of the force norm; returns ``(force, clipped)``."""
    if not limit > 0:
        raise ValueError("limit must be > 0")
    f = np.asarray(force, dtype=float)
    norm = _norm_bound(f)
    if norm <= limit:
        return f.copy(), False
    return f * _clamp_scale(f, limit, norm), True


def saturate_rows(forces, limit: float):
    """Row-wise :func:`saturate`; returns ``(forces, clipped mask)``."""
    f = np.asarray(forces, dtype=float)
    out = np.empty_like(f)
    clipped = np.zeros(len(f), dtype=bool)
    for k in range(len(f)):
        out[k], clipped[k] = saturate(f[k], limit)
    return out, clipped


@dataclass
class SatelliteState:
    initial_mass: float = 350.0
    mass: float = 350.0
    impulse: float = 0.0  # integral of |F| dt, N s

    @property
    def fuel_used(self) -> float:
        return self.initial_mass - self.mass


def update_satellite_mass(sat: SatelliteState, applied_force_norm: float, dt: float,
                          gains: ControlGains) -> SatelliteState:
    """Mass from the accumulated thrust impulse; returns a new state."""
    if not dt > 0:
        raise ValueError("dt must be > 0")
    impulse = sat.impulse + abs(applied_force_norm) * dt
    mass = sat.initial_mass - impulse / (gains.isp * gains.g0)
    return SatelliteState(sat.initial_mass, mass, impulse)


@dataclass
class CornerControllerState:
    integral: np.ndarray = field(default_factory=lambda: np.zeros((4, 3)))
    satellites: list[SatelliteState] = field(default_factory=list)
    fuel_exhausted: bool = False

    @classmethod
    def initial(cls, masses) -> "CornerControllerState":
        return cls(np.zeros((4, 3)), [SatelliteState(float(m), float(m)) for m in masses])

    @property
    def masses(self) -> np.ndarray:
        return np.array([s.mass for s in self.satellites])

    @property
    def fuel_used(self) -> np.ndarray:
        return np.array([s.fuel_used for s in self.satellites])


class CornerController:
    """Low-level control of the four corner satellites for one control step."""

    def __init__(self, gains: ControlGains, dt: float):
        self.gains = gains
        self.dt = dt

    def reset_integral(self, state: CornerControllerState) -> None:
        state.integral[:] = 0.0

    def command(self, state: CornerControllerState, q, q_dot, q_ddot, targets):
        """Saturated thrust per corner ``(4, 3)`` and the raw commands."""
        g = self.gains
        e = targets.positions - q
        e_dot = targets.velocities - q_dot
        if g.kind is ControllerKind.PID:
            raw = pid_force(e, e_dot, state.integral, g)
        else:
            raw = smc_force(e, e_dot, q_ddot, targets.accelerations, state.masses[:, None], g)
        out, clipped = saturate_rows(raw, g.thrust_limit)
        # anti-windup: the integral is frozen while the thruster saturates
        if g.kind is ControllerKind.PID:
            state.integral[~clipped] += e[~clipped] * self.dt
        return out, raw

    def burn(self, state: CornerControllerState, thrust) -> None:
        g = self.gains
        for k in range(4):
            state.satellites[k] = update_satellite_mass(
                state.satellites[k], float(np.linalg.norm(thrust[k])), self.dt, g)
            if state.satellites[k].mass < g.dry_mass:
                state.fuel_exhausted = True
