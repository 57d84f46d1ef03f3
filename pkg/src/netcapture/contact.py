"""Debris geometry as a composite of boxes, net-debris penalty contact with
Coulomb friction, and node-sphere self-contact with a spatial-hash broad phase."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from netcapture import quaternion
from netcapture.config import BoxPrimitive, ContactParams


@dataclass
class CompositeShape:
    half_extents: np.ndarray  # (P, 3)
    centers: np.ndarray  # (P, 3) box centers in the body frame
    rotations: np.ndarray  # (P, 3, 3) box-to-body rotations

    @classmethod
    def from_boxes(cls, boxes: list[BoxPrimitive]) -> "CompositeShape":
        if not boxes:
            raise ValueError("composite shape needs at least one box")
        half = np.array([b.half_extents for b in boxes], dtype=float)
        if np.any(half <= 0):
            raise ValueError("box half-extents must be > 0")
        centers = np.array([b.offset for b in boxes], dtype=float)
        rots = np.array([quaternion.to_matrix(quaternion.normalize(b.rotation)) for b in boxes])
        return cls(half, centers, rots)

    def volumes(self) -> np.ndarray:
        return 8.0 * np.prod(self.half_extents, axis=1)

    def inertia(self, mass: float) -> np.ndarray:
        """Uniform-density inertia about the body origin (taken as the CoM)."""
        vol = self.volumes()
        masses = mass * vol / vol.sum()
        inertia = np.zeros((3, 3))
        for m, h, c, r in zip(masses, self.half_extents, self.centers, self.rotations):
            a, b, d = 2.0 * h
            local = (m / 12.0) * np.diag([b * b + d * d, a * a + d * d, a * a + b * b])
            inertia += r @ local @ r.T + m * ((c @ c) * np.eye(3) - np.outer(c, c))
        return inertia


def _box_sdf(local: np.ndarray, half: np.ndarray):
    """Signed distance and outward normal of points ``(n, 3)`` to one box."""
    q = np.abs(local) - half
    qpos = np.maximum(q, 0.0)
    outside = np.linalg.norm(qpos, axis=1)
    qmax = np.max(q, axis=1)
    dist = outside + np.minimum(qmax, 0.0)
    sign = np.where(local >= 0.0, 1.0, -1.0)
    normal = np.zeros_like(local)
    out = outside > 0.0
    normal[out] = sign[out] * qpos[out] / outside[out, None]
    axis = np.argmax(q, axis=1)  # first axis wins ties
    inside = ~out
    rows = np.nonzero(inside)[0]
    normal[rows, axis[inside]] = sign[rows, axis[inside]]
    return dist, normal


def signed_distance_body(shape: CompositeShape, points_body: np.ndarray):
    """Minimum signed distance over primitives for body-frame points."""
    pts = np.atleast_2d(np.asarray(points_body, dtype=float))
    best_d = np.full(len(pts), np.inf)
    best_n = np.zeros_like(pts)
    for half, c, r in zip(shape.half_extents, shape.centers, shape.rotations):
        local = (pts - c) @ r
        d, n = _box_sdf(local, half)
        better = d < best_d  # strict: earlier primitive keeps ties
        best_d[better] = d[better]
        best_n[better] = n[better] @ r.T
    return best_d, best_n


def signed_distance_many(shape: CompositeShape, points, debris_pos, debris_quat):
    rot = quaternion.to_matrix(debris_quat)
    body = (np.atleast_2d(points) - np.asarray(debris_pos)) @ rot
    d, n_body = signed_distance_body(shape, body)
    return d, n_body @ rot.T


def signed_distance(shape: CompositeShape, world_point, debris_pos, debris_quat):
    """Signed distance (negative inside) and outward unit normal for one point."""
    d, n = signed_distance_many(shape, np.asarray(world_point, dtype=float)[None, :],
                                debris_pos, debris_quat)
    return float(d[0]), n[0]


def net_debris_contact(pos, vel, shape: CompositeShape, debris_pos, debris_quat,
                       debris_vel, debris_angvel, params: ContactParams):
    """Penalty normal force with clamped damping and regularized Coulomb friction.

    Returns ``(node_forces, debris_force, debris_torque, contact_count)``.
    Contact points are the surface projections ``x - d n`` of the nodes.
    """
    d, n = signed_distance_many(shape, pos, debris_pos, debris_quat)
    forces = np.zeros_like(pos)
    active = np.nonzero(d < params.node_radius)[0]
    if len(active) == 0:
        return forces, np.zeros(3), np.zeros(3), 0
    na = n[active]
    depth = params.node_radius - d[active]
    cp = pos[active] - d[active, None] * na
    arm = cp - np.asarray(debris_pos)
    surf_vel = np.asarray(debris_vel) + np.cross(np.asarray(debris_angvel), arm)
    rel = vel[active] - surf_vel
    vn = np.einsum("ij,ij->i", rel, na)
    fn = np.maximum(params.penalty_stiffness * depth - params.penalty_damping * vn, 0.0)
    vt = rel - vn[:, None] * na
    speed = np.linalg.norm(vt, axis=1)
    ft_mag = np.minimum(params.friction_coeff * fn, params.penalty_damping * speed)
    tdir = vt / np.where(speed > 0.0, speed, 1.0)[:, None]
    f = fn[:, None] * na - ft_mag[:, None] * tdir
    forces[active] = f
    debris_force = -f.sum(axis=0)
    debris_torque = np.cross(arm, -f).sum(axis=0)
    return forces, debris_force, debris_torque, int(len(active))


def contact_count(pos, shape: CompositeShape, debris_pos, debris_quat, node_radius: float) -> int:
    d, _ = signed_distance_many(shape, pos, debris_pos, debris_quat)
    return int(np.count_nonzero(d < node_radius))


# --------------------------------------------------------------------------
# self-contact

def near_pairs_brute(pos, cutoff: float) -> set[tuple[int, int]]:
    pos = np.asarray(pos)
    diff = pos[:, None, :] - pos[None, :, :]
    dist = np.sqrt(np.einsum("ijk,ijk->ij", diff, diff))
    i, j = np.nonzero(np.triu(dist < cutoff, k=1))
    return set(zip(i.tolist(), j.tolist()))


class SpatialHash:
    """Uniform grid keyed by integer cell coordinates, cell size = cutoff."""

    def __init__(self, cell: float):
        self.cell = cell

    def candidate_pairs(self, pos) -> set[tuple[int, int]]:
        cells = np.floor(np.asarray(pos) / self.cell).astype(np.int64)
        buckets: dict[tuple[int, int, int], list[int]] = {}
        for i, key in enumerate(map(tuple, cells)):
            buckets.setdefault(key, []).append(i)
        pairs = set()
        for (cx, cy, cz), members in buckets.items():
            for dx in (-1, 0, 1):
                for dy in (-1, 0, 1):
                    for dz in (-1, 0, 1):
                        other = buckets.get((cx + dx, cy + dy, cz + dz))
                        if not other:
                            continue
                        for i in members:
                            for j in other:
                                if i < j:
                                    pairs.add((i, j))
        return pairs


def near_pairs_hash(pos, cutoff: float) -> set[tuple[int, int]]:
    """Broad-phase candidates: a superset of all pairs closer than ``cutoff``."""
    return SpatialHash(cutoff).candidate_pairs(pos)


def self_contact(pos, vel, cols: int, params: ContactParams) -> np.ndarray:
    """Sphere-sphere repulsion between non-adjacent nodes closer than ``2r``."""
    cutoff = 2.0 * params.node_radius
    forces = np.zeros_like(pos)
    for i, j in sorted(near_pairs_hash(pos, cutoff)):
        ri, ci = divmod(i, cols)
        rj, cj = divmod(j, cols)
        if abs(ri - rj) + abs(ci - cj) == 1:
            continue
        d = pos[i] - pos[j]
        dist = np.sqrt(d @ d)
        if dist >= cutoff or dist <= 1e-12:
            continue
        n = d / dist
        vn = (vel[i] - vel[j]) @ n
        fn = max(params.penalty_stiffness * (cutoff - dist) - params.penalty_damping * vn, 0.0)
        forces[i] += fn * n
        forces[j] -= fn * n
    return forces
