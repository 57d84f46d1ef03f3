# cython: language_level=3
"""Compiled substep kernel.

Mirrors ``netcapture._pycore`` formula for formula; see ``netmodels`` and
``contact`` for the reference definitions.
"""

import numpy as np

cimport numpy as cnp
from libc.math cimport sqrt, fabs, floor

cnp.import_array()

ctypedef cnp.int64_t idx_t

DEF MODEL_INEXTENSIBLE = 0
DEF MODEL_SHELL = 1
DEF MODEL_SAINT_VENANT = 2
DEF DEGENERATE_AREA = 1e-12


cdef inline void quat_to_mat(double* q, double* R) noexcept nogil:
    cdef double w = q[0], x = q[1], y = q[2], z = q[3]
    R[0] = 1 - 2 * (y * y + z * z)
    R[1] = 2 * (x * y - w * z)
    R[2] = 2 * (x * z + w * y)
    R[3] = 2 * (x * y + w * z)
    R[4] = 1 - 2 * (x * x + z * z)
    R[5] = 2 * (y * z - w * x)
    R[6] = 2 * (x * z - w * y)
    R[7] = 2 * (y * z + w * x)
    R[8] = 1 - 2 * (x * x + y * y)


cdef inline void cw_acc(double* r, double* v, double omega, double* a) noexcept nogil:
    a[0] = 3.0 * omega * omega * r[0] + 2.0 * omega * v[1]
    a[1] = -2.0 * omega * v[0]
    a[2] = -omega * omega * r[2]


def propagate_cw_points(double[:, ::1] pos, double[:, ::1] vel, double omega, double dt, long nsteps):
    """Semi-implicit Euler under CW acceleration, in place."""
    cdef Py_ssize_t i, n = pos.shape[0]
    cdef long s
    cdef double a[3]
    with nogil:
        for s in range(nsteps):
            for i in range(n):
                cw_acc(&pos[i, 0], &vel[i, 0], omega, a)
                vel[i, 0] += a[0] * dt
                vel[i, 1] += a[1] * dt
                vel[i, 2] += a[2] * dt
                pos[i, 0] += vel[i, 0] * dt
                pos[i, 1] += vel[i, 1] * dt
                pos[i, 2] += vel[i, 2] * dt


cdef class Stepper:
    cdef public int n, rows, cols, model, proj_iters, nbox, self_contact, degenerate
    cdef idx_t[:, ::1] edges
    cdef double[::1] rest_len
    cdef idx_t[:, ::1] bend
    cdef double[::1] bend_coef
    cdef idx_t[:, ::1] tris
    cdef double[:, :, ::1] dm_inv
    cdef double[::1] area_h
    cdef double k_edge, k_bend, lam, mu, damping
    cdef double[:, ::1] box_half
    cdef double[:, ::1] box_center
    cdef double[:, :, ::1] box_rot
    cdef double kc, cc, fric, radius
    cdef public double omega, debris_mass
    cdef double[:, ::1] inertia
    cdef double[:, ::1] inertia_inv
    cdef double[:, ::1] force
    cdef double[:, ::1] fint
    cdef public object last_force, internal_force
    cdef idx_t[::1] bucket_start
    cdef idx_t[::1] bucket_items
    cdef idx_t[::1] bucket_cursor
    cdef idx_t[::1] bucket_stamp
    cdef idx_t stamp
    cdef idx_t[::1] node_bucket
    cdef idx_t[:, ::1] node_cell
    cdef idx_t table_mask

    def __init__(self, int rows, int cols, edges, rest_len, bend, bend_coef, tris, dm_inv,
                 area_h, int model, double k_edge, double k_bend, double lam, double mu,
                 double damping, int proj_iters, box_half, box_center, box_rot,
                 double kc, double cc, double fric, double radius, bint self_contact,
                 double omega, double debris_mass, inertia):
        self.rows = rows
        self.cols = cols
        self.n = rows * cols
        self.edges = np.ascontiguousarray(edges, dtype=np.int64)
        self.rest_len = np.ascontiguousarray(rest_len, dtype=np.float64)
        self.bend = np.ascontiguousarray(bend, dtype=np.int64).reshape(-1, 3)
        self.bend_coef = np.ascontiguousarray(bend_coef, dtype=np.float64)
        self.tris = np.ascontiguousarray(tris, dtype=np.int64)
        self.dm_inv = np.ascontiguousarray(dm_inv, dtype=np.float64)
        self.area_h = np.ascontiguousarray(area_h, dtype=np.float64)
        self.model = model
        self.k_edge = k_edge
        self.k_bend = k_bend
        self.lam = lam
        self.mu = mu
        self.damping = damping
        self.proj_iters = proj_iters
        self.box_half = np.ascontiguousarray(box_half, dtype=np.float64)
        self.box_center = np.ascontiguousarray(box_center, dtype=np.float64)
        self.box_rot = np.ascontiguousarray(box_rot, dtype=np.float64)
        self.nbox = self.box_half.shape[0]
        self.kc = kc
        self.cc = cc
        self.fric = fric
        self.radius = radius
        self.self_contact = self_contact
        self.omega = omega
        self.debris_mass = debris_mass
        inertia = np.ascontiguousarray(inertia, dtype=np.float64)
        self.inertia = inertia
        self.inertia_inv = np.ascontiguousarray(np.linalg.inv(inertia))
        self.last_force = np.zeros((self.n, 3))
        self.internal_force = np.zeros((self.n, 3))
        self.force = self.last_force
        self.fint = self.internal_force
        cdef idx_t size = 1
        while size < 2 * self.n:
            size *= 2
        self.table_mask = size - 1
        self.bucket_start = np.zeros(size + 1, dtype=np.int64)
        self.bucket_items = np.zeros(self.n, dtype=np.int64)
        self.bucket_cursor = np.zeros(size, dtype=np.int64)
        self.bucket_stamp = np.zeros(size, dtype=np.int64)
        self.stamp = 0
        self.node_bucket = np.zeros(self.n, dtype=np.int64)
        self.node_cell = np.zeros((self.n, 3), dtype=np.int64)
        self.degenerate = 0

    # ------------------------------------------------------------------
    # internal forces

    cdef void _internal(self, double[:, ::1] pos, double[:, ::1] vel, double[:, ::1] out) noexcept nogil:
        cdef Py_ssize_t e, i, j, k, t, a, b, c
        cdef double d[3]
        cdef double dv[3]
        cdef double length, proj, f, coef
        cdef int degenerate = 0
        for i in range(self.n):
            out[i, 0] = 0.0
            out[i, 1] = 0.0
            out[i, 2] = 0.0
        for e in range(self.edges.shape[0]):
            i = self.edges[e, 0]
            j = self.edges[e, 1]
            for k in range(3):
                d[k] = pos[j, k] - pos[i, k]
                dv[k] = vel[j, k] - vel[i, k]
            length = sqrt(d[0] * d[0] + d[1] * d[1] + d[2] * d[2])
            if length <= 0.0:
                continue
            for k in range(3):
                d[k] /= length
            proj = dv[0] * d[0] + dv[1] * d[1] + dv[2] * d[2]
            f = self.damping * proj
            if self.model == MODEL_SHELL:
                f += self.k_edge * (length - self.rest_len[e])
            for k in range(3):
                out[i, k] += f * d[k]
                out[j, k] -= f * d[k]
        if self.model == MODEL_SHELL:
            for e in range(self.bend.shape[0]):
                a = self.bend[e, 0]
                b = self.bend[e, 1]
                c = self.bend[e, 2]
                coef = self.bend_coef[e]
                for k in range(3):
                    f = coef * (pos[a, k] - 2.0 * pos[b, k] + pos[c, k])
                    out[a, k] -= f
                    out[b, k] += 2.0 * f
                    out[c, k] -= f
        elif self.model == MODEL_SAINT_VENANT:
            for t in range(self.tris.shape[0]):
                degenerate += self._membrane(t, pos, out)
        self.degenerate = degenerate

    cdef int _membrane(self, Py_ssize_t t, double[:, ::1] pos, double[:, ::1] out) noexcept nogil:
        cdef Py_ssize_t i0 = self.tris[t, 0], i1 = self.tris[t, 1], i2 = self.tris[t, 2]
        cdef double e1[3]
        cdef double e2[3]
        cdef double F[3][2]
        cdef double P[3][2]
        cdef double H[3][2]
        cdef double cr[3]
        cdef Py_ssize_t k
        cdef double m00 = self.dm_inv[t, 0, 0], m01 = self.dm_inv[t, 0, 1]
        cdef double m10 = self.dm_inv[t, 1, 0], m11 = self.dm_inv[t, 1, 1]
        cdef double c00, c01, c11, E00, E01, E11, trE, S00, S01, S11, ah
        for k in range(3):
            e1[k] = pos[i1, k] - pos[i0, k]
            e2[k] = pos[i2, k] - pos[i0, k]
        cr[0] = e1[1] * e2[2] - e1[2] * e2[1]
        cr[1] = e1[2] * e2[0] - e1[0] * e2[2]
        cr[2] = e1[0] * e2[1] - e1[1] * e2[0]
        if 0.5 * sqrt(cr[0] * cr[0] + cr[1] * cr[1] + cr[2] * cr[2]) < DEGENERATE_AREA:
            return 1
        for k in range(3):
            F[k][0] = e1[k] * m00 + e2[k] * m10
            F[k][1] = e1[k] * m01 + e2[k] * m11
        c00 = F[0][0] * F[0][0] + F[1][0] * F[1][0] + F[2][0] * F[2][0]
        c01 = F[0][0] * F[0][1] + F[1][0] * F[1][1] + F[2][0] * F[2][1]
        c11 = F[0][1] * F[0][1] + F[1][1] * F[1][1] + F[2][1] * F[2][1]
        E00 = 0.5 * (c00 - 1.0)
        E01 = 0.5 * c01
        E11 = 0.5 * (c11 - 1.0)
        trE = E00 + E11
        S00 = 2.0 * self.mu * E00 + self.lam * trE
        S01 = 2.0 * self.mu * E01
        S11 = 2.0 * self.mu * E11 + self.lam * trE
        ah = self.area_h[t]
        for k in range(3):
            P[k][0] = F[k][0] * S00 + F[k][1] * S01
            P[k][1] = F[k][0] * S01 + F[k][1] * S11
            # H = -A h P Dm^-T
            H[k][0] = -ah * (P[k][0] * m00 + P[k][1] * m01)
            H[k][1] = -ah * (P[k][0] * m10 + P[k][1] * m11)
            out[i1, k] += H[k][0]
            out[i2, k] += H[k][1]
            out[i0, k] -= H[k][0] + H[k][1]
        return 0

    # ------------------------------------------------------------------
    # contact

    cdef void _sdf(self, double* pb, double* dist, double* nb) noexcept nogil:
        """Composite signed distance for a body-frame point."""
        cdef Py_ssize_t p, k, axis
        cdef double local[3]
        cdef double q[3]
        cdef double rel[3]
        cdef double nl[3]
        cdef double best = 1e300, outside, qmax, dd, sgn
        for p in range(self.nbox):
            for k in range(3):
                rel[k] = pb[k] - self.box_center[p, k]
            for k in range(3):
                local[k] = (rel[0] * self.box_rot[p, 0, k] + rel[1] * self.box_rot[p, 1, k]
                            + rel[2] * self.box_rot[p, 2, k])
                q[k] = fabs(local[k]) - self.box_half[p, k]
            outside = 0.0
            for k in range(3):
                if q[k] > 0.0:
                    outside += q[k] * q[k]
            outside = sqrt(outside)
            axis = 0
            qmax = q[0]
            for k in range(1, 3):
                if q[k] > qmax:
                    qmax = q[k]
                    axis = k
            dd = outside + (qmax if qmax < 0.0 else 0.0)
            if dd < best:
                best = dd
                if outside > 0.0:
                    for k in range(3):
                        sgn = 1.0 if local[k] >= 0.0 else -1.0
                        nl[k] = sgn * q[k] / outside if q[k] > 0.0 else 0.0
                else:
                    for k in range(3):
                        nl[k] = 0.0
                    nl[axis] = 1.0 if local[axis] >= 0.0 else -1.0
                for k in range(3):
                    nb[k] = (self.box_rot[p, k, 0] * nl[0] + self.box_rot[p, k, 1] * nl[1]
                             + self.box_rot[p, k, 2] * nl[2])
        dist[0] = best

    cdef int _contact(self, double[:, ::1] pos, double[:, ::1] vel, double* dpos, double* R,
                      double* dvel, double* dang, double[:, ::1] out, double* Fd, double* Td) noexcept nogil:
        cdef Py_ssize_t i, k
        cdef double rel[3]
        cdef double pb[3]
        cdef double nb[3]
        cdef double n[3]
        cdef double arm[3]
        cdef double sv[3]
        cdef double rv[3]
        cdef double vt[3]
        cdef double f[3]
        cdef double dist, depth, vn, fn, speed, ft
        cdef int count = 0
        for i in range(self.n):
            for k in range(3):
                rel[k] = pos[i, k] - dpos[k]
            for k in range(3):
                pb[k] = R[k] * rel[0] + R[3 + k] * rel[1] + R[6 + k] * rel[2]
            self._sdf(pb, &dist, nb)
            if dist >= self.radius:
                continue
            count += 1
            for k in range(3):
                n[k] = R[3 * k] * nb[0] + R[3 * k + 1] * nb[1] + R[3 * k + 2] * nb[2]
            depth = self.radius - dist
            for k in range(3):
                arm[k] = pos[i, k] - dist * n[k] - dpos[k]
            sv[0] = dvel[0] + dang[1] * arm[2] - dang[2] * arm[1]
            sv[1] = dvel[1] + dang[2] * arm[0] - dang[0] * arm[2]
            sv[2] = dvel[2] + dang[0] * arm[1] - dang[1] * arm[0]
            for k in range(3):
                rv[k] = vel[i, k] - sv[k]
            vn = rv[0] * n[0] + rv[1] * n[1] + rv[2] * n[2]
            fn = self.kc * depth - self.cc * vn
            if fn < 0.0:
                fn = 0.0
            for k in range(3):
                vt[k] = rv[k] - vn * n[k]
            speed = sqrt(vt[0] * vt[0] + vt[1] * vt[1] + vt[2] * vt[2])
            ft = self.fric * fn
            if self.cc * speed < ft:
                ft = self.cc * speed
            for k in range(3):
                f[k] = fn * n[k]
                if speed > 0.0:
                    f[k] -= ft * vt[k] / speed
                out[i, k] += f[k]
                Fd[k] -= f[k]
            Td[0] -= arm[1] * f[2] - arm[2] * f[1]
            Td[1] -= arm[2] * f[0] - arm[0] * f[2]
            Td[2] -= arm[0] * f[1] - arm[1] * f[0]
        return count

    cdef int _count_contacts(self, double[:, ::1] pos, double* dpos, double* R) noexcept nogil:
        cdef Py_ssize_t i, k
        cdef double rel[3]
        cdef double pb[3]
        cdef double nb[3]
        cdef double dist
        cdef int count = 0
        for i in range(self.n):
            for k in range(3):
                rel[k] = pos[i, k] - dpos[k]
            for k in range(3):
                pb[k] = R[k] * rel[0] + R[3 + k] * rel[1] + R[6 + k] * rel[2]
            self._sdf(pb, &dist, nb)
            if dist < self.radius:
                count += 1
        return count

    # ------------------------------------------------------------------
    # self contact: spatial hash

    cdef inline idx_t _hash(self, idx_t x, idx_t y, idx_t z) noexcept nogil:
        cdef unsigned long long h = ((<unsigned long long> x) * 73856093ULL) ^ \
            ((<unsigned long long> y) * 19349663ULL) ^ ((<unsigned long long> z) * 83492791ULL)
        return <idx_t> (h & <unsigned long long> self.table_mask)

    cdef int _visit_buckets(self, Py_ssize_t i, idx_t* seen) noexcept nogil:
        # a bucket reached from several neighbour cells is visited once: each
        # query stamps the buckets it has already listed
        cdef int dx, dy, dz, nseen = 0
        cdef idx_t b
        self.stamp += 1
        for dx in range(-1, 2):
            for dy in range(-1, 2):
                for dz in range(-1, 2):
                    b = self._hash(self.node_cell[i, 0] + dx, self.node_cell[i, 1] + dy,
                                   self.node_cell[i, 2] + dz)
                    if self.bucket_stamp[b] != self.stamp and self.bucket_start[b + 1] > self.bucket_start[b]:
                        self.bucket_stamp[b] = self.stamp
                        seen[nseen] = b
                        nseen += 1
        return nseen

    cdef void _self_contact(self, double[:, ::1] pos, double[:, ::1] vel, double[:, ::1] out) noexcept nogil:
        cdef double cutoff = 2.0 * self.radius
        cdef idx_t seen[27]
        cdef int nseen, m
        cdef Py_ssize_t i, j, k, s
        cdef idx_t b
        cdef double d[3]
        cdef double dist, vn, fn
        cdef long ri, ci, rj, cj, manhattan
        self._fill_hash(pos, cutoff)
        for i in range(self.n):
            nseen = self._visit_buckets(i, seen)
            ri = i // self.cols
            ci = i % self.cols
            for m in range(nseen):
                b = seen[m]
                for s in range(self.bucket_start[b], self.bucket_start[b + 1]):
                    j = self.bucket_items[s]
                    if j <= i:
                        continue
                    rj = j // self.cols
                    cj = j % self.cols
                    manhattan = (ri - rj if ri > rj else rj - ri) + (ci - cj if ci > cj else cj - ci)
                    if manhattan == 1:
                        continue
                    for k in range(3):
                        d[k] = pos[i, k] - pos[j, k]
                    dist = sqrt(d[0] * d[0] + d[1] * d[1] + d[2] * d[2])
                    if dist >= cutoff or dist <= 1e-12:
                        continue
                    for k in range(3):
                        d[k] /= dist
                    vn = ((vel[i, 0] - vel[j, 0]) * d[0] + (vel[i, 1] - vel[j, 1]) * d[1]
                          + (vel[i, 2] - vel[j, 2]) * d[2])
                    fn = self.kc * (cutoff - dist) - self.cc * vn
                    if fn <= 0.0:
                        continue
                    for k in range(3):
                        out[i, k] += fn * d[k]
                        out[j, k] -= fn * d[k]

    cdef void _fill_hash(self, double[:, ::1] pos, double cell) noexcept nogil:
        """Counting sort of nodes into hash buckets (CSR layout)."""
        cdef Py_ssize_t i, k
        cdef idx_t b, nb = self.table_mask + 1
        for b in range(nb + 1):
            self.bucket_start[b] = 0
        for i in range(self.n):
            for k in range(3):
                self.node_cell[i, k] = <idx_t> floor(pos[i, k] / cell)
            b = self._hash(self.node_cell[i, 0], self.node_cell[i, 1], self.node_cell[i, 2])
            self.node_bucket[i] = b
            self.bucket_start[b + 1] += 1
        for b in range(nb):
            self.bucket_start[b + 1] += self.bucket_start[b]
            self.bucket_cursor[b] = self.bucket_start[b]
        for i in range(self.n):
            b = self.node_bucket[i]
            self.bucket_items[self.bucket_cursor[b]] = i
            self.bucket_cursor[b] += 1

    # ------------------------------------------------------------------
    # integration

    cdef void _project(self, double[:, ::1] pos, double[:, ::1] vel, double[::1] mass, double dt) noexcept nogil:
        cdef Py_ssize_t it, e, i, j, k
        cdef double d[3]
        cdef double length, wi, wj, s, c
        for it in range(self.proj_iters):
            for e in range(self.edges.shape[0]):
                i = self.edges[e, 0]
                j = self.edges[e, 1]
                for k in range(3):
                    d[k] = pos[j, k] - pos[i, k]
                length = sqrt(d[0] * d[0] + d[1] * d[1] + d[2] * d[2])
                wi = 1.0 / mass[i]
                wj = 1.0 / mass[j]
                if length <= 0.0:
                    continue
                s = (length - self.rest_len[e]) / ((wi + wj) * length)
                for k in range(3):
                    c = s * d[k]
                    pos[i, k] += wi * c
                    pos[j, k] -= wj * c
                    vel[i, k] += wi * c / dt
                    vel[j, k] -= wj * c / dt

    cdef void _integrate_debris(self, double* dpos, double* dquat, double* dvel, double* dang,
                                double* F, double* T, double dt) noexcept nogil:
        cdef double R[9]
        cdef double wb[3]
        cdef double tb[3]
        cdef double Iw[3]
        cdef double rhs[3]
        cdef double q[4]
        cdef double norm
        cdef Py_ssize_t k
        quat_to_mat(dquat, R)
        for k in range(3):
            dvel[k] += F[k] / self.debris_mass * dt
            dpos[k] += dvel[k] * dt
        for k in range(3):
            wb[k] = R[k] * dang[0] + R[3 + k] * dang[1] + R[6 + k] * dang[2]
            tb[k] = R[k] * T[0] + R[3 + k] * T[1] + R[6 + k] * T[2]
        for k in range(3):
            Iw[k] = self.inertia[k, 0] * wb[0] + self.inertia[k, 1] * wb[1] + self.inertia[k, 2] * wb[2]
        rhs[0] = tb[0] - (wb[1] * Iw[2] - wb[2] * Iw[1])
        rhs[1] = tb[1] - (wb[2] * Iw[0] - wb[0] * Iw[2])
        rhs[2] = tb[2] - (wb[0] * Iw[1] - wb[1] * Iw[0])
        for k in range(3):
            wb[k] += dt * (self.inertia_inv[k, 0] * rhs[0] + self.inertia_inv[k, 1] * rhs[1]
                           + self.inertia_inv[k, 2] * rhs[2])
        for k in range(3):
            dang[k] = R[3 * k] * wb[0] + R[3 * k + 1] * wb[1] + R[3 * k + 2] * wb[2]
        # q += dt/2 * (0, w) (x) q
        q[0] = dquat[0] + 0.5 * dt * (-dang[0] * dquat[1] - dang[1] * dquat[2] - dang[2] * dquat[3])
        q[1] = dquat[1] + 0.5 * dt * (dang[0] * dquat[0] + dang[1] * dquat[3] - dang[2] * dquat[2])
        q[2] = dquat[2] + 0.5 * dt * (-dang[0] * dquat[3] + dang[1] * dquat[0] + dang[2] * dquat[1])
        q[3] = dquat[3] + 0.5 * dt * (dang[0] * dquat[2] - dang[1] * dquat[1] + dang[2] * dquat[0])
        norm = sqrt(q[0] * q[0] + q[1] * q[1] + q[2] * q[2] + q[3] * q[3])
        for k in range(4):
            dquat[k] = q[k] / norm

    # ------------------------------------------------------------------
    # public API

    def advance(self, double[:, ::1] pos, double[:, ::1] vel, double[::1] mass,
                double[:, ::1] ext, double[::1] dpos, double[::1] dquat, double[::1] dvel,
                double[::1] dang, double[::1] dext, double dt, int nsub, bint orbital=True):
        """Run ``nsub`` substeps in place; returns the final contact count."""
        cdef Py_ssize_t s, i, k
        cdef double R[9]
        cdef double Fd[3]
        cdef double Td[3]
        cdef double a[3]
        cdef int count
        cdef double[:, ::1] force = self.force
        cdef double[:, ::1] fint = self.fint
        with nogil:
            for s in range(nsub):
                self._internal(pos, vel, fint)
                for i in range(self.n):
                    if orbital:
                        cw_acc(&pos[i, 0], &vel[i, 0], self.omega, a)
                    else:
                        a[0] = 0.0
                        a[1] = 0.0
                        a[2] = 0.0
                    for k in range(3):
                        force[i, k] = fint[i, k] + ext[i, k] + mass[i] * a[k]
                quat_to_mat(&dquat[0], R)
                if orbital:
                    cw_acc(&dpos[0], &dvel[0], self.omega, a)
                else:
                    a[0] = 0.0
                    a[1] = 0.0
                    a[2] = 0.0
                for k in range(3):
                    Fd[k] = dext[k] + self.debris_mass * a[k]
                    Td[k] = 0.0
                self._contact(pos, vel, &dpos[0], R, &dvel[0], &dang[0], force, Fd, Td)
                if self.self_contact:
                    self._self_contact(pos, vel, force)
                for i in range(self.n):
                    for k in range(3):
                        vel[i, k] += force[i, k] / mass[i] * dt
                        pos[i, k] += vel[i, k] * dt
                self._integrate_debris(&dpos[0], &dquat[0], &dvel[0], &dang[0], Fd, Td, dt)
                if self.model == MODEL_INEXTENSIBLE:
                    self._project(pos, vel, mass, dt)
            quat_to_mat(&dquat[0], R)
            count = self._count_contacts(pos, &dpos[0], R)
        return count

    def internal_forces(self, double[:, ::1] pos, double[:, ::1] vel):
        out = np.zeros((self.n, 3))
        cdef double[:, ::1] o = out
        self._internal(pos, vel, o)
        return out

    def contact_forces(self, double[:, ::1] pos, double[:, ::1] vel, double[::1] dpos,
                       double[::1] dquat, double[::1] dvel, double[::1] dang):
        out = np.zeros((self.n, 3))
        cdef double[:, ::1] o = out
        cdef double R[9]
        cdef double Fd[3]
        cdef double Td[3]
        cdef int count
        Fd[0] = Fd[1] = Fd[2] = 0.0
        Td[0] = Td[1] = Td[2] = 0.0
        quat_to_mat(&dquat[0], R)
        count = self._contact(pos, vel, &dpos[0], R, &dvel[0], &dang[0], o, Fd, Td)
        return out, np.array([Fd[0], Fd[1], Fd[2]]), np.array([Td[0], Td[1], Td[2]]), count

    def self_contact_forces(self, double[:, ::1] pos, double[:, ::1] vel):
        out = np.zeros((self.n, 3))
        cdef double[:, ::1] o = out
        self._self_contact(pos, vel, o)
        return out

    def project(self, double[:, ::1] pos, double[:, ::1] vel, double[::1] mass, double dt):
        self._project(pos, vel, mass, dt)

    def hash_pairs(self, double[:, ::1] pos, double cell):
        """Candidate pairs (i < j) from the hash broad phase."""
        cdef idx_t seen[27]
        cdef int nseen, m
        cdef Py_ssize_t i, j, s
        self._fill_hash(pos, cell)
        pairs = set()
        for i in range(self.n):
            nseen = self._visit_buckets(i, seen)
            for m in range(nseen):
                for s in range(self.bucket_start[seen[m]], self.bucket_start[seen[m] + 1]):
                    j = self.bucket_items[s]
                    if j > i:
                        pairs.add((i, j))
        return pairs
