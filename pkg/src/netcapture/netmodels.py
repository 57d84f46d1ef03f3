"""Internal mechanics of the net: topology plus the three formulations.

* inextensible: edges kept at rest length by position projection; only the
  edge dashpots produce forces.
* shell: linear edge springs, collinear-triple bending stencil, dashpots.
* saint_venant: constant-strain St. Venant-Kirchhoff membrane triangles
  plus dashpots.

These numpy functions are the reference path. The compiled core
re-implements the same formulas for speed and is cross-checked against them.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from netcapture.config import ConfigError, ElasticParams, NetModelKind

DEGENERATE_AREA = 1e-12


@dataclass
class NetTopology:
    rows: int
    cols: int
    edges: np.ndarray  # (E, 2) int
    rest_length: np.ndarray  # (E,)
    bend: np.ndarray  # (B, 3) int, middle index is the hinge
    bend_rest: np.ndarray  # (B,) rest spacing used to scale the stencil
    tris: np.ndarray  # (T, 3) int
    dm_inv: np.ndarray  # (T, 2, 2) inverse rest-shape matrices
    rest_area: np.ndarray  # (T,)

    @property
    def n_nodes(self) -> int:
        return self.rows * self.cols

    def corner_indices(self) -> np.ndarray:
        r, c = self.rows, self.cols
        # perimeter order a, b, c, d
        return np.array([0, c - 1, r * c - 1, (r - 1) * c], dtype=np.int64)

    def is_grid_neighbor(self, i: int, j: int) -> bool:
        ri, ci = divmod(i, self.cols)
        rj, cj = divmod(j, self.cols)
        return abs(ri - rj) + abs(ci - cj) == 1


def build_topology(rows: int, cols: int, rest_uv: np.ndarray) -> NetTopology:
    """Grid topology from 2D rest coordinates ``rest_uv`` of shape (rows*cols, 2)."""
    idx = np.arange(rows * cols).reshape(rows, cols)
    edges = np.concatenate([
        np.stack([idx[:, :-1].ravel(), idx[:, 1:].ravel()], axis=1),
        np.stack([idx[:-1, :].ravel(), idx[1:, :].ravel()], axis=1),
    ]).astype(np.int64)
    rest_length = np.linalg.norm(rest_uv[edges[:, 1]] - rest_uv[edges[:, 0]], axis=1)
    if np.any(rest_length <= 0):
        raise ConfigError("net.side_length", "zero-length edge in rest configuration")

    bend = []
    if cols >= 3:
        bend.append(np.stack([idx[:, :-2].ravel(), idx[:, 1:-1].ravel(), idx[:, 2:].ravel()], axis=1))
    if rows >= 3:
        bend.append(np.stack([idx[:-2, :].ravel(), idx[1:-1, :].ravel(), idx[2:, :].ravel()], axis=1))
    bend = np.concatenate(bend).astype(np.int64) if bend else np.zeros((0, 3), dtype=np.int64)
    bend_rest = 0.5 * (
        np.linalg.norm(rest_uv[bend[:, 1]] - rest_uv[bend[:, 0]], axis=1)
        + np.linalg.norm(rest_uv[bend[:, 2]] - rest_uv[bend[:, 1]], axis=1)
    ) if len(bend) else np.zeros(0)

    a = idx[:-1, :-1].ravel()
    b = idx[:-1, 1:].ravel()
    c = idx[1:, 1:].ravel()
    d = idx[1:, :-1].ravel()
    tris = np.concatenate([np.stack([a, b, c], 1), np.stack([a, c, d], 1)]).astype(np.int64)
    dm = np.stack([rest_uv[tris[:, 1]] - rest_uv[tris[:, 0]],
                   rest_uv[tris[:, 2]] - rest_uv[tris[:, 0]]], axis=2)  # (T, 2, 2) columns
    det = dm[:, 0, 0] * dm[:, 1, 1] - dm[:, 0, 1] * dm[:, 1, 0]
    rest_area = 0.5 * np.abs(det)
    if np.any(rest_area < DEGENERATE_AREA):
        raise ConfigError("net", "degenerate or inverted membrane triangle in rest shape")
    dm_inv = np.linalg.inv(dm)
    return NetTopology(rows, cols, edges, rest_length, bend, bend_rest, tris, dm_inv, rest_area)


def grid_rest_uv(rows: int, cols: int, spacing: float) -> np.ndarray:
    j, i = np.meshgrid(np.arange(cols), np.arange(rows))
    u = (j.ravel() - (cols - 1) / 2.0) * spacing
    v = (i.ravel() - (rows - 1) / 2.0) * spacing
    return np.stack([u, v], axis=1)


# --------------------------------------------------------------------------
# forces

def spring_forces(pos, topo: NetTopology, stiffness: float) -> np.ndarray:
    d = pos[topo.edges[:, 1]] - pos[topo.edges[:, 0]]
    length = np.linalg.norm(d, axis=1)
    safe = np.where(length > 0, length, 1.0)
    f = (stiffness * (length - topo.rest_length) / safe)[:, None] * d
    out = np.zeros_like(pos)
    np.add.at(out, topo.edges[:, 0], f)
    np.add.at(out, topo.edges[:, 1], -f)
    return out


def damping_forces(pos, vel, topo: NetTopology, damping: float) -> np.ndarray:
    """Axial edge dashpots: ``c * (relative velocity along the edge)``."""
    d = pos[topo.edges[:, 1]] - pos[topo.edges[:, 0]]
    length = np.linalg.norm(d, axis=1)
    n = d / np.where(length > 0, length, 1.0)[:, None]
    dv = vel[topo.edges[:, 1]] - vel[topo.edges[:, 0]]
    f = (damping * np.einsum("ij,ij->i", dv, n))[:, None] * n
    out = np.zeros_like(pos)
    np.add.at(out, topo.edges[:, 0], f)
    np.add.at(out, topo.edges[:, 1], -f)
    return out


def bending_coefficient(topo: NetTopology, bending_stiffness: float) -> np.ndarray:
    # energy (k_b / (2 L^3)) |a - 2b + c|^2, k_b in N m
    return bending_stiffness / topo.bend_rest**3


def bending_forces(pos, topo: NetTopology, bending_stiffness: float) -> np.ndarray:
    a, b, c = topo.bend[:, 0], topo.bend[:, 1], topo.bend[:, 2]
    coef = bending_coefficient(topo, bending_stiffness)[:, None]
    dev = pos[a] - 2.0 * pos[b] + pos[c]
    out = np.zeros_like(pos)
    np.add.at(out, a, -coef * dev)
    np.add.at(out, b, 2.0 * coef * dev)
    np.add.at(out, c, -coef * dev)
    return out


def _deformation(pos, topo):
    x0 = pos[topo.tris[:, 0]]
    ds = np.stack([pos[topo.tris[:, 1]] - x0, pos[topo.tris[:, 2]] - x0], axis=2)  # (T,3,2)
    return ds, ds @ topo.dm_inv  # F: (T, 3, 2)


def stvk_membrane_forces(pos, topo: NetTopology, params: ElasticParams,
                         diagnostics: dict | None = None) -> np.ndarray:
    lam, mu = params.lame()
    h = params.thickness
    ds, F = _deformation(pos, topo)
    cur_area = 0.5 * np.linalg.norm(np.cross(ds[:, :, 0], ds[:, :, 1]), axis=1)
    ok = cur_area >= DEGENERATE_AREA
    if diagnostics is not None:
        diagnostics["degenerate"] = int(np.count_nonzero(~ok))
    C = np.transpose(F, (0, 2, 1)) @ F
    E = 0.5 * (C - np.eye(2))
    trE = E[:, 0, 0] + E[:, 1, 1]
    S = 2.0 * mu * E + (lam * trE)[:, None, None] * np.eye(2)
    P = F @ S
    H = -(topo.rest_area * h)[:, None, None] * (P @ np.transpose(topo.dm_inv, (0, 2, 1)))
    H[~ok] = 0.0
    f1, f2 = H[:, :, 0], H[:, :, 1]
    out = np.zeros_like(pos)
    np.add.at(out, topo.tris[:, 1], f1)
    np.add.at(out, topo.tris[:, 2], f2)
    np.add.at(out, topo.tris[:, 0], -(f1 + f2))
    return out


def internal_forces(pos, vel, topo: NetTopology, kind: NetModelKind, params: ElasticParams,
                    diagnostics: dict | None = None) -> np.ndarray:
    kind = NetModelKind(kind)
    f = damping_forces(pos, vel, topo, params.damping)
    if kind is NetModelKind.SHELL:
        f += spring_forces(pos, topo, params.spring_constant())
        f += bending_forces(pos, topo, params.bending_stiffness)
    elif kind is NetModelKind.SAINT_VENANT:
        f += stvk_membrane_forces(pos, topo, params, diagnostics)
    return f


# --------------------------------------------------------------------------
# energies (oracles for the force routines)

def _result(total):
    return float(total) if np.ndim(total) == 0 else total


def spring_energy(pos, topo: NetTopology, stiffness: float):
    """Spring energy; ``pos`` may carry leading batch axes ``(..., N, 3)``."""
    pos = np.asarray(pos, dtype=float)
    d = pos[..., topo.edges[:, 1], :] - pos[..., topo.edges[:, 0], :]
    length = np.sqrt(np.einsum("...ij,...ij->...i", d, d))
    return _result(0.5 * stiffness * np.sum((length - topo.rest_length) ** 2, axis=-1))


def bending_energy(pos, topo: NetTopology, bending_stiffness: float):
    pos = np.asarray(pos, dtype=float)
    coef = bending_coefficient(topo, bending_stiffness)
    dev = (pos[..., topo.bend[:, 0], :] - 2.0 * pos[..., topo.bend[:, 1], :]
           + pos[..., topo.bend[:, 2], :])
    return _result(0.5 * np.sum(coef * np.einsum("...ij,...ij->...i", dev, dev), axis=-1))


def stvk_energy(pos, topo: NetTopology, params: ElasticParams):
    pos = np.asarray(pos, dtype=float)
    lam, mu = params.lame()
    x0 = pos[..., topo.tris[:, 0], :]
    d1 = pos[..., topo.tris[:, 1], :] - x0
    d2 = pos[..., topo.tris[:, 2], :] - x0
    inv = topo.dm_inv
    # columns of F = [d1 d2] Dm^-1, written out to avoid tiny batched matmuls
    fu = d1 * inv[:, 0, 0, None] + d2 * inv[:, 1, 0, None]
    fv = d1 * inv[:, 0, 1, None] + d2 * inv[:, 1, 1, None]
    e11 = 0.5 * (np.einsum("...i,...i->...", fu, fu) - 1.0)
    e22 = 0.5 * (np.einsum("...i,...i->...", fv, fv) - 1.0)
    e12 = 0.5 * np.einsum("...i,...i->...", fu, fv)
    trE = e11 + e22
    w = 0.5 * lam * trE**2 + mu * (e11**2 + e22**2 + 2.0 * e12**2)
    return _result(np.sum(w * topo.rest_area * params.thickness, axis=-1))


# --------------------------------------------------------------------------
# inextensible edges

def project_inextensible(pos, mass, topo: NetTopology, iterations: int) -> np.ndarray:
    """Gauss-Seidel mass-weighted distance projection; returns new positions."""
    x = np.array(pos, dtype=float, copy=True)
    w = 1.0 / np.asarray(mass, dtype=float)
    for _ in range(iterations):
        for (i, j), rest in zip(topo.edges, topo.rest_length):
            d = x[j] - x[i]
            length = np.sqrt(d @ d)
            wsum = w[i] + w[j]
            if length <= 0.0 or wsum <= 0.0:
                continue
            corr = ((length - rest) / (wsum * length)) * d
            x[i] += w[i] * corr
            x[j] -= w[j] * corr
    return x


def max_edge_strain(pos, topo: NetTopology) -> float:
    length = np.linalg.norm(pos[topo.edges[:, 1]] - pos[topo.edges[:, 0]], axis=1)
    return float(np.max(np.abs(length - topo.rest_length) / topo.rest_length))
