"""Pure-Python (numpy) substep kernel, used when the compiled core is absent.

Same constructor and methods as ``netcapture._core.Stepper``.
"""

from __future__ import annotations

import numpy as np

from netcapture.contact import SpatialHash

MODEL_INEXTENSIBLE = 0
MODEL_SHELL = 1
MODEL_SAINT_VENANT = 2
DEGENERATE_AREA = 1e-12


def _quat_to_mat(q):
    w, x, y, z = q
    return np.array([
        [1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y)],
        [2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x)],
        [2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y)],
    ])


def _cw(r, v, omega):
    a = np.empty_like(r)
    a[..., 0] = 3.0 * omega * omega * r[..., 0] + 2.0 * omega * v[..., 1]
    a[..., 1] = -2.0 * omega * v[..., 0]
    a[..., 2] = -omega * omega * r[..., 2]
    return a


def propagate_cw_points(pos, vel, omega, dt, nsteps):
    for _ in range(nsteps):
        vel += _cw(pos, vel, omega) * dt
        pos += vel * dt


class Stepper:
    def __init__(self, rows, cols, edges, rest_len, bend, bend_coef, tris, dm_inv, area_h,
                 model, k_edge, k_bend, lam, mu, damping, proj_iters, box_half, box_center,
                 box_rot, kc, cc, fric, radius, self_contact, omega, debris_mass, inertia):
        self.rows, self.cols = rows, cols
        self.n = rows * cols
        self.edges = np.asarray(edges, dtype=np.int64)
        self.rest_len = np.asarray(rest_len, dtype=float)
        self.bend = np.asarray(bend, dtype=np.int64).reshape(-1, 3)
        self.bend_coef = np.asarray(bend_coef, dtype=float)
        self.tris = np.asarray(tris, dtype=np.int64)
        self.dm_inv = np.asarray(dm_inv, dtype=float)
        self.area_h = np.asarray(area_h, dtype=float)
        self.model = model
        self.k_edge, self.lam, self.mu, self.damping = k_edge, lam, mu, damping
        self.proj_iters = proj_iters
        self.box_half = np.asarray(box_half, dtype=float)
        self.box_center = np.asarray(box_center, dtype=float)
        self.box_rot = np.asarray(box_rot, dtype=float)
        self.kc, self.cc, self.fric, self.radius = kc, cc, fric, radius
        self.self_contact = bool(self_contact)
        self.omega = omega
        self.debris_mass = debris_mass
        self.inertia = np.asarray(inertia, dtype=float)
        self.inertia_inv = np.linalg.inv(self.inertia)
        self.last_force = np.zeros((self.n, 3))
        self.internal_force = np.zeros((self.n, 3))
        self.degenerate = 0
        r = np.arange(self.n) // cols
        c = np.arange(self.n) % cols
        self._neighbor = (np.abs(r[:, None] - r[None, :]) + np.abs(c[:, None] - c[None, :])) == 1

    # forces ---------------------------------------------------------------

    def internal_forces(self, pos, vel):
        out = np.zeros((self.n, 3))
        i, j = self.edges[:, 0], self.edges[:, 1]
        d = pos[j] - pos[i]
        length = np.linalg.norm(d, axis=1)
        ok = length > 0
        n = d / np.where(ok, length, 1.0)[:, None]
        f = self.damping * np.einsum("ij,ij->i", vel[j] - vel[i], n)
        if self.model == MODEL_SHELL:
            f = f + self.k_edge * (length - self.rest_len)
        f = np.where(ok, f, 0.0)[:, None] * n
        np.add.at(out, i, f)
        np.add.at(out, j, -f)
        if self.model == MODEL_SHELL and len(self.bend):
            a, b, c = self.bend.T
            dev = self.bend_coef[:, None] * (pos[a] - 2.0 * pos[b] + pos[c])
            np.add.at(out, a, -dev)
            np.add.at(out, b, 2.0 * dev)
            np.add.at(out, c, -dev)
        elif self.model == MODEL_SAINT_VENANT:
            t0, t1, t2 = self.tris.T
            e1, e2 = pos[t1] - pos[t0], pos[t2] - pos[t0]
            area = 0.5 * np.linalg.norm(np.cross(e1, e2), axis=1)
            good = area >= DEGENERATE_AREA
            self.degenerate = int(np.count_nonzero(~good))
            F = np.stack([e1, e2], axis=2) @ self.dm_inv
            E = 0.5 * (np.transpose(F, (0, 2, 1)) @ F - np.eye(2))
            trE = E[:, 0, 0] + E[:, 1, 1]
            S = 2.0 * self.mu * E + (self.lam * trE)[:, None, None] * np.eye(2)
            H = -self.area_h[:, None, None] * (F @ S @ np.transpose(self.dm_inv, (0, 2, 1)))
            H[~good] = 0.0
            np.add.at(out, t1, H[:, :, 0])
            np.add.at(out, t2, H[:, :, 1])
            np.add.at(out, t0, -(H[:, :, 0] + H[:, :, 1]))
        return out

    def _sdf(self, pb):
        best_d = np.full(len(pb), np.inf)
        best_n = np.zeros_like(pb)
        for half, c, r in zip(self.box_half, self.box_center, self.box_rot):
            local = (pb - c) @ r
            q = np.abs(local) - half
            qpos = np.maximum(q, 0.0)
            outside = np.linalg.norm(qpos, axis=1)
            qmax = q.max(axis=1)
            d = outside + np.minimum(qmax, 0.0)
            sign = np.where(local >= 0.0, 1.0, -1.0)
            nl = np.zeros_like(local)
            out = outside > 0.0
            nl[out] = sign[out] * qpos[out] / outside[out, None]
            rows = np.nonzero(~out)[0]
            axis = np.argmax(q, axis=1)[rows]
            nl[rows, axis] = sign[rows, axis]
            better = d < best_d
            best_d[better] = d[better]
            best_n[better] = nl[better] @ r.T
        return best_d, best_n

    def contact_forces(self, pos, vel, dpos, dquat, dvel, dang):
        R = _quat_to_mat(dquat)
        d, nb = self._sdf((pos - dpos) @ R)
        out = np.zeros((self.n, 3))
        act = np.nonzero(d < self.radius)[0]
        if len(act) == 0:
            return out, np.zeros(3), np.zeros(3), 0
        n = nb[act] @ R.T
        depth = self.radius - d[act]
        arm = pos[act] - d[act, None] * n - dpos
        rv = vel[act] - (dvel + np.cross(dang, arm))
        vn = np.einsum("ij,ij->i", rv, n)
        fn = np.maximum(self.kc * depth - self.cc * vn, 0.0)
        vt = rv - vn[:, None] * n
        speed = np.linalg.norm(vt, axis=1)
        ft = np.minimum(self.fric * fn, self.cc * speed)
        f = fn[:, None] * n - (ft / np.where(speed > 0, speed, 1.0))[:, None] * vt
        out[act] = f
        return out, -f.sum(axis=0), -np.cross(arm, f).sum(axis=0), len(act)

    def self_contact_forces(self, pos, vel):
        out = np.zeros((self.n, 3))
        cutoff = 2.0 * self.radius
        for i, j in sorted(SpatialHash(cutoff).candidate_pairs(pos)):
            if self._neighbor[i, j]:
                continue
            d = pos[i] - pos[j]
            dist = np.sqrt(d @ d)
            if dist >= cutoff or dist <= 1e-12:
                continue
            n = d / dist
            fn = self.kc * (cutoff - dist) - self.cc * ((vel[i] - vel[j]) @ n)
            if fn <= 0.0:
                continue
            out[i] += fn * n
            out[j] -= fn * n
        return out

    def hash_pairs(self, pos, cell):
        return SpatialHash(cell).candidate_pairs(pos)

    # integration ----------------------------------------------------------

    def project(self, pos, vel, mass, dt):
        w = 1.0 / mass
        for _ in range(self.proj_iters):
            for (i, j), rest in zip(self.edges, self.rest_len):
                d = pos[j] - pos[i]
                length = np.sqrt(d @ d)
                if length <= 0.0:
                    continue
                c = ((length - rest) / ((w[i] + w[j]) * length)) * d
                pos[i] += w[i] * c
                pos[j] -= w[j] * c
                vel[i] += w[i] * c / dt
                vel[j] -= w[j] * c / dt

    def _integrate_debris(self, dpos, dquat, dvel, dang, F, T, dt):
        R = _quat_to_mat(dquat)
        dvel += F / self.debris_mass * dt
        dpos += dvel * dt
        wb = R.T @ dang
        tb = R.T @ T
        wb = wb + dt * (self.inertia_inv @ (tb - np.cross(wb, self.inertia @ wb)))
        dang[:] = R @ wb
        w, x, y, z = dquat
        wx, wy, wz = dang
        q = np.array([
            w + 0.5 * dt * (-wx * x - wy * y - wz * z),
            x + 0.5 * dt * (wx * w + wy * z - wz * y),
            y + 0.5 * dt * (-wx * z + wy * w + wz * x),
            z + 0.5 * dt * (wx * y - wy * x + wz * w),
        ])
        dquat[:] = q / np.sqrt(q @ q)

    def advance(self, pos, vel, mass, ext, dpos, dquat, dvel, dang, dext, dt, nsub, orbital=True):
        for _ in range(nsub):
            fint = self.internal_forces(pos, vel)
            force = fint + ext
            if orbital:
                force += mass[:, None] * _cw(pos, vel, self.omega)
                fd = dext + self.debris_mass * _cw(dpos, dvel, self.omega)
            else:
                fd = dext.copy()
            fc, fdc, td, _ = self.contact_forces(pos, vel, dpos, dquat, dvel, dang)
            force += fc
            fd = fd + fdc
            if self.self_contact:
                force += self.self_contact_forces(pos, vel)
            vel += force / mass[:, None] * dt
            pos += vel * dt
            self._integrate_debris(dpos, dquat, dvel, dang, fd, td, dt)
            if self.model == MODEL_INEXTENSIBLE:
                self.project(pos, vel, mass, dt)
            self.last_force[:] = force
            self.internal_force[:] = fint
        R = _quat_to_mat(dquat)
        d, _ = self._sdf((pos - dpos) @ R)
        return int(np.count_nonzero(d < self.radius))
