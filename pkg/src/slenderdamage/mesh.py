"""Structured meshes: a voxelised unit cylinder and the unit interval."""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

GAUSS_1D = np.array([-1.0, 1.0]) / np.sqrt(3.0)


class MeshError(ValueError):
    pass


def _hex_reference(hx: float, hy: float, hz: float):
    """Trilinear shape values and physical gradients at the 2x2x2 Gauss points.

    Local vertex a = ix + 2*iy + 4*iz; Gauss point q uses the same bit layout.
    Returns arrays of shape (8 qp, 8 vertices).
    """
    corners = np.array([[(a >> 0) & 1, (a >> 1) & 1, (a >> 2) & 1] for a in range(8)], dtype=float)
    sgn = 2.0 * corners - 1.0
    gp = np.array([[GAUSS_1D[(q >> 0) & 1], GAUSS_1D[(q >> 1) & 1], GAUSS_1D[(q >> 2) & 1]]
                   for q in range(8)])
    N = np.empty((8, 8))
    dx = np.empty((8, 8))
    dy = np.empty((8, 8))
    dz = np.empty((8, 8))
    for q in range(8):
        xi, et, ze = gp[q]
        fx = 1 + sgn[:, 0] * xi
        fy = 1 + sgn[:, 1] * et
        fz = 1 + sgn[:, 2] * ze
        N[q] = fx * fy * fz / 8
        dx[q] = sgn[:, 0] * fy * fz / 8 * (2 / hx)
        dy[q] = fx * sgn[:, 1] * fz / 8 * (2 / hy)
        dz[q] = fx * fy * sgn[:, 2] / 8 * (2 / hz)
    return N, dx, dy, dz, gp


@dataclass(frozen=True, eq=False)
class CylinderMesh:
    """Tensor grid on [-1,1]^2 x [0,1] restricted to columns whose centre is in the unit disk.

    Nodes are numbered plane by plane: node = level * n_xy + k, where k indexes
    ``xy_nodes``. Each retained column contributes ``nz`` hexahedra.
    """

    nxy: int
    nz: int
    xy_nodes: np.ndarray      # (n_xy, 2)
    columns: np.ndarray       # (n_col, 4) xy-node ids, vertex order (0,0),(1,0),(0,1),(1,1)
    column_centers: np.ndarray
    cells: np.ndarray         # (n_cell, 8)
    cell_level: np.ndarray    # z-slab index of each cell
    hx: float
    hy: float
    hz: float

    @property
    def n_xy(self) -> int:
        return self.xy_nodes.shape[0]

    @property
    def n_nodes(self) -> int:
        return self.n_xy * (self.nz + 1)

    @property
    def n_cells(self) -> int:
        return self.cells.shape[0]

    @property
    def z_levels(self) -> np.ndarray:
        return np.linspace(0.0, 1.0, self.nz + 1)

    @property
    def nodes(self) -> np.ndarray:
        z = np.repeat(self.z_levels, self.n_xy)
        xy = np.tile(self.xy_nodes, (self.nz + 1, 1))
        return np.column_stack([xy, z])

    @property
    def cell_volume(self) -> float:
        return self.hx * self.hy * self.hz

    @property
    def section_area(self) -> float:
        """Discrete cross-section measure pi_h."""
        return self.columns.shape[0] * self.hx * self.hy

    @property
    def measure(self) -> float:
        return self.n_cells * self.cell_volume

    @property
    def bottom_nodes(self) -> np.ndarray:
        return np.arange(self.n_xy)

    @property
    def top_nodes(self) -> np.ndarray:
        return self.nz * self.n_xy + np.arange(self.n_xy)

    @property
    def xy_weights(self) -> np.ndarray:
        """Integral of each bilinear xy hat function over the masked disk."""
        w = np.zeros(self.n_xy)
        np.add.at(w, self.columns.ravel(), 0.25 * self.hx * self.hy)
        return w

    def reference(self):
        """(N, dN/dx, dN/dy, dN/dz, qp_weights, gauss points) shared by every cell."""
        N, dx, dy, dz, gp = _hex_reference(self.hx, self.hy, self.hz)
        wq = np.full(8, self.cell_volume / 8)
        return N, dx, dy, dz, wq, gp

    def quadrature_points(self) -> np.ndarray:
        """Physical coordinates of all Gauss points, shape (n_cell, 8, 3)."""
        N, *_ = self.reference()
        X = self.nodes[self.cells]          # (C, 8, 3)
        return np.einsum("qa,cad->cqd", N, X)

    def to_json(self, path) -> None:
        data = {
            "nxy": self.nxy, "nz": self.nz,
            "nodes": self.nodes.tolist(),
            "cells": self.cells.tolist(),
            "tags": {"z0": self.bottom_nodes.tolist(), "z1": self.top_nodes.tolist()},
            "measure": self.measure,
        }
        Path(path).write_text(json.dumps(data))


def build_cylinder(nxy: int, nz: int) -> CylinderMesh:
    if int(nxy) != nxy or int(nz) != nz:
        raise MeshError("mesh sizes must be integers")
    nxy, nz = int(nxy), int(nz)
    if nxy < 4 or nz < 2:
        raise MeshError(f"mesh too coarse: need nxy >= 4 and nz >= 2 (got nxy={nxy}, nz={nz})")
    h = 2.0 / nxy
    # grid vertex (i, j) at (-1 + i h, -1 + j h); column (i, j) spans vertices i..i+1, j..j+1
    ci, cj = np.meshgrid(np.arange(nxy), np.arange(nxy), indexing="ij")
    cx = -1.0 + (ci + 0.5) * h
    cy = -1.0 + (cj + 0.5) * h
    keep = cx**2 + cy**2 < 1.0
    ci, cj = ci[keep], cj[keep]
    order = np.lexsort((ci, cj))
    ci, cj = ci[order], cj[order]
    corner_ij = np.stack([
        np.stack([ci, cj], 1), np.stack([ci + 1, cj], 1),
        np.stack([ci, cj + 1], 1), np.stack([ci + 1, cj + 1], 1),
    ], axis=1)                                   # (n_col, 4, 2)
    flat = corner_ij[..., 0] * (nxy + 1) + corner_ij[..., 1]
    used, columns = np.unique(flat, return_inverse=True)
    columns = columns.reshape(flat.shape)
    vi, vj = np.divmod(used, nxy + 1)
    xy_nodes = np.column_stack([-1.0 + vi * h, -1.0 + vj * h])
    n_xy = xy_nodes.shape[0]
    n_col = columns.shape[0]
    lev = np.arange(nz)
    bottom = columns[None, :, :] + (lev * n_xy)[:, None, None]
    top = bottom + n_xy
    cells = np.concatenate([bottom, top], axis=2).reshape(nz * n_col, 8)
    cell_level = np.repeat(lev, n_col)
    centers = np.column_stack([-1.0 + (ci + 0.5) * h, -1.0 + (cj + 0.5) * h])
    return CylinderMesh(nxy=nxy, nz=nz, xy_nodes=xy_nodes, columns=columns,
                        column_centers=centers, cells=cells, cell_level=cell_level,
                        hx=h, hy=h, hz=1.0 / nz)


@dataclass(frozen=True)
class IntervalMesh:
    nz: int

    @property
    def nodes(self) -> np.ndarray:
        return np.linspace(0.0, 1.0, self.nz + 1)

    @property
    def h(self) -> float:
        return 1.0 / self.nz

    @property
    def n_nodes(self) -> int:
        return self.nz + 1

    def reference(self):
        """Linear shape values/derivatives at the two Gauss points of each element."""
        gp = 0.5 * (1 + GAUSS_1D)
        N = np.column_stack([1 - gp, gp])            # (2 qp, 2 vertices)
        dN = np.array([[-1.0, 1.0], [-1.0, 1.0]]) / self.h
        wq = np.full(2, 0.5 * self.h)
        return N, dN, wq

    @property
    def elements(self) -> np.ndarray:
        i = np.arange(self.nz)
        return np.column_stack([i, i + 1])

    def quadrature_points(self) -> np.ndarray:
        N, _, _ = self.reference()
        return self.nodes[self.elements] @ N.T       # (nz, 2)

    @property
    def lumped_mass(self) -> np.ndarray:
        m = np.full(self.nz + 1, self.h)
        m[[0, -1]] *= 0.5
        return m


def build_interval(nz: int) -> IntervalMesh:
    if int(nz) != nz or nz < 2:
        raise MeshError(f"interval mesh needs nz >= 2 (got {nz})")
    return IntervalMesh(int(nz))
