"""Displacement/damage containers, rescaled strains, slice averages and diagnostics."""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from .mesh import CylinderMesh, IntervalMesh


class AdmissibilityError(ValueError):
    pass


@dataclass(eq=False)
class Field3D:
    """Nodal (u1, u2, u3, alpha) on a CylinderMesh at aspect ratio ``delta``.

    ``eps_z`` is the imposed axial strain: u3 = 0 on z=0 and u3 = -eps_z on z=1.
    """

    mesh: CylinderMesh
    u1: np.ndarray
    u2: np.ndarray
    u3: np.ndarray
    alpha: np.ndarray
    delta: float
    eps_z: float

    def copy(self) -> "Field3D":
        return replace(self, u1=self.u1.copy(), u2=self.u2.copy(), u3=self.u3.copy(),
                       alpha=self.alpha.copy())

    def with_delta(self, delta: float) -> "Field3D":
        out = self.copy()
        out.delta = float(delta)
        return out

    def displacement(self) -> np.ndarray:
        return np.concatenate([self.u1, self.u2, self.u3])

    def set_displacement(self, u: np.ndarray) -> None:
        n = self.mesh.n_nodes
        self.u1, self.u2, self.u3 = u[:n].copy(), u[n:2 * n].copy(), u[2 * n:].copy()

    def violations(self, tol: float = 0.0) -> list[str]:
        errs = []
        m = self.mesh
        for name in ("u1", "u2", "u3", "alpha"):
            arr = getattr(self, name)
            if arr.shape != (m.n_nodes,):
                errs.append(f"{name} has shape {arr.shape}, expected ({m.n_nodes},)")
            elif not np.all(np.isfinite(arr)):
                errs.append(f"{name} contains non-finite values")
        if errs:
            return errs
        if not 0 < self.delta <= 1:
            errs.append(f"delta must lie in (0, 1] (got {self.delta})")
        if self.alpha.min() < -tol or self.alpha.max() > 1 + tol:
            errs.append("alpha outside [0, 1]")
        if np.max(np.abs(self.u3[m.bottom_nodes])) > tol:
            errs.append("u3 != 0 on z = 0")
        if np.max(np.abs(self.u3[m.top_nodes] + self.eps_z)) > tol:
            errs.append("u3 != -eps_z on z = 1")
        return errs

    def check(self, tol: float = 1e-12) -> "Field3D":
        errs = self.violations(tol)
        if errs:
            raise AdmissibilityError("; ".join(errs))
        return self

    def to_json(self, path) -> None:
        Path(path).write_text(json.dumps({
            "delta": self.delta, "eps_z": self.eps_z,
            "nodes": self.mesh.nodes.tolist(),
            "u1": self.u1.tolist(), "u2": self.u2.tolist(),
            "u3": self.u3.tolist(), "alpha": self.alpha.tolist(),
        }))


@dataclass(eq=False)
class Field1D:
    mesh: IntervalMesh
    u3bar: np.ndarray
    alphabar: np.ndarray
    eps_z: float

    def copy(self) -> "Field1D":
        return replace(self, u3bar=self.u3bar.copy(), alphabar=self.alphabar.copy())

    def violations(self, tol: float = 0.0) -> list[str]:
        errs = []
        n = self.mesh.n_nodes
        if self.u3bar.shape != (n,) or self.alphabar.shape != (n,):
            return [f"profiles must have {n} nodal values"]
        if not (np.all(np.isfinite(self.u3bar)) and np.all(np.isfinite(self.alphabar))):
            return ["non-finite values in 1D field"]
        if abs(self.u3bar[0]) > tol or abs(self.u3bar[-1] + self.eps_z) > tol:
            errs.append("u3bar boundary values differ from (0, -eps_z)")
        if self.alphabar.min() < -tol or self.alphabar.max() > 1 + tol:
            errs.append("alphabar outside [0, 1]")
        return errs

    def check(self, tol: float = 1e-12) -> "Field1D":
        errs = self.violations(tol)
        if errs:
            raise AdmissibilityError("; ".join(errs))
        return self

    def slope(self) -> np.ndarray:
        """Element-wise derivative of u3bar."""
        return np.diff(self.u3bar) / self.mesh.h

    def to_csv(self, path, header_comment: str | None = None) -> None:
        with open(path, "w", newline="") as fh:
            if header_comment:
                fh.write(f"# {header_comment}\n")
            wr = csv.writer(fh)
            wr.writerow(["z", "u3bar", "alphabar"])
            for z, u, a in zip(self.mesh.nodes, self.u3bar, self.alphabar):
                wr.writerow([f"{z:.17g}", f"{u:.17g}", f"{a:.17g}"])


def linear_1d(mesh: IntervalMesh, eps_z: float, alpha: float = 0.0) -> Field1D:
    """Affine u3bar = -eps_z z with constant damage."""
    z = mesh.nodes
    return Field1D(mesh, -eps_z * z, np.full_like(z, float(alpha)), float(eps_z))


def test_field(mesh: CylinderMesh, eps_z: float, nu: float, delta: float) -> Field3D:
    """Undamaged uniaxial field u = (nu eps_z x, nu eps_z y, -eps_z z), alpha = 0."""
    X = mesh.nodes
    return Field3D(mesh, nu * eps_z * X[:, 0], nu * eps_z * X[:, 1], -eps_z * X[:, 2],
                   np.zeros(mesh.n_nodes), float(delta), float(eps_z))


def project_alpha(alpha: np.ndarray) -> np.ndarray:
    return np.clip(alpha, 0.0, 1.0)


def qp_values(mesh: CylinderMesh, nodal: np.ndarray):
    """Value and x/y/z derivatives of a nodal field at every Gauss point, each (n_cell, 8)."""
    N, dx, dy, dz, _, _ = mesh.reference()
    loc = nodal[mesh.cells]
    return loc @ N.T, loc @ dx.T, loc @ dy.T, loc @ dz.T


@dataclass
class RescaledStrain:
    """Strain components at Gauss points, arrays of shape (n_cell, 8).

    Shear entries are tensor components, e13 = (delta du1/dz + du3/dx / delta) / 2.
    """

    e11: np.ndarray
    e22: np.ndarray
    e33: np.ndarray
    e12: np.ndarray
    e13: np.ndarray
    e23: np.ndarray

    @property
    def trace(self) -> np.ndarray:
        return self.e11 + self.e22 + self.e33


def strain(f: Field3D) -> RescaledStrain:
    m, d = f.mesh, f.delta
    _, u1x, u1y, u1z = qp_values(m, f.u1)
    _, u2x, u2y, u2z = qp_values(m, f.u2)
    _, u3x, u3y, u3z = qp_values(m, f.u3)
    return RescaledStrain(
        e11=u1x, e22=u2y, e33=u3z,
        e12=0.5 * (u1y + u2x),
        e13=0.5 * (d * u1z + u3x / d),
        e23=0.5 * (d * u2z + u3y / d),
    )


def slice_average(f_or_mesh, values=None, which: str = "u3") -> np.ndarray:
    """Cross-section mean of a nodal field at each of the nz+1 node planes.

    Call as ``slice_average(field, which="u3")`` or ``slice_average(mesh, nodal_array)``.
    The bilinear interpolant on each plane is integrated exactly over the
    retained columns and divided by the discrete section area.
    """
    if isinstance(f_or_mesh, Field3D):
        mesh = f_or_mesh.mesh
        values = getattr(f_or_mesh, which)
    else:
        mesh = f_or_mesh
    w = mesh.xy_weights
    planes = np.asarray(values).reshape(mesh.nz + 1, mesh.n_xy)
    return planes @ w / mesh.section_area


def qp_section_average(mesh: CylinderMesh, qvals: np.ndarray) -> np.ndarray:
    """Per-slab, per-z-Gauss-level cross-section mean of a Gauss-point quantity.

    Returns shape (nz, 2); entry [k, j] averages the points with z-bit j in slab k.
    """
    _, _, _, _, wq, _ = mesh.reference()
    zbit = (np.arange(8) >> 2) & 1
    out = np.zeros((mesh.nz, 2))
    for j in (0, 1):
        sel = zbit == j
        s = (qvals[:, sel] * wq[sel]).sum(axis=1)        # per cell
        out[:, j] = np.bincount(mesh.cell_level, weights=s, minlength=mesh.nz)
        out[:, j] /= mesh.section_area * wq[sel].sum() / (mesh.hx * mesh.hy)
    return out


def expand_section(mesh: CylinderMesh, per_level: np.ndarray) -> np.ndarray:
    """Broadcast an (nz, 2) per-slab z-Gauss profile back to (n_cell, 8)."""
    zbit = (np.arange(8) >> 2) & 1
    return per_level[mesh.cell_level][:, zbit]


def embed_1d(g: Field1D, mesh: CylinderMesh, delta: float, u1=None, u2=None) -> Field3D:
    """Extend z-only profiles to the cylinder (u3 and alpha constant on each section).

    u1 and u2 default to zero; nodal arrays may be passed for them.
    """
    if g.mesh.nz != mesh.nz:
        raise ValueError(f"1D mesh has nz={g.mesh.nz} but 3D mesh has nz={mesh.nz}")
    n = mesh.n_nodes
    u3 = np.repeat(g.u3bar, mesh.n_xy)
    al = np.repeat(g.alphabar, mesh.n_xy)
    return Field3D(mesh,
                   np.zeros(n) if u1 is None else np.asarray(u1, float),
                   np.zeros(n) if u2 is None else np.asarray(u2, float),
                   u3, al, float(delta), g.eps_z)


def nodal_slope(g: Field1D) -> np.ndarray:
    """Nodal recovery of u3bar' (average of adjacent element slopes; one-sided at the ends)."""
    s = g.slope()
    out = np.empty(g.mesh.n_nodes)
    out[1:-1] = 0.5 * (s[:-1] + s[1:])
    out[0], out[-1] = s[0], s[-1]
    return out


def embed_uniaxial(g: Field1D, mesh: CylinderMesh, delta: float, nu: float,
                   strain_profile: np.ndarray | None = None) -> Field3D:
    """embed_1d with transverse field u1 = -nu x s(z), u2 = -nu y s(z).

    ``s`` is a nodal axial-strain profile on the z planes, by default the
    nodal average of u3bar'. For affine u3bar the result is the exact uniaxial state.
    """
    s = nodal_slope(g) if strain_profile is None else np.asarray(strain_profile, float)
    X = mesh.nodes
    sz = np.repeat(s, mesh.n_xy)
    return embed_1d(g, mesh, delta, u1=-nu * X[:, 0] * sz, u2=-nu * X[:, 1] * sz)


@dataclass
class DiagnosticsRecord:
    """Squared L2 distances from the uniaxial limit structure (raw integrals over the mesh)."""

    u3: float
    e33: float
    e11: float
    e22: float
    shear: float
    alpha_transverse: float
    alpha_axial: float

    def as_dict(self) -> dict:
        return dict(self.__dict__)


def _ref_at_qp(mesh: CylinderMesh, g: Field1D):
    """1D reference value/derivative of u3bar and alphabar at the 3D Gauss points."""
    N1, dN1, _ = g.mesh.reference()
    el = g.mesh.elements
    zbit = (np.arange(8) >> 2) & 1
    u_q = (g.u3bar[el] @ N1.T)[mesh.cell_level][:, zbit]
    du_q = (g.u3bar[el] @ dN1.T)[mesh.cell_level][:, zbit]
    a_q = (g.alphabar[el] @ N1.T)[mesh.cell_level][:, zbit]
    da_q = (g.alphabar[el] @ dN1.T)[mesh.cell_level][:, zbit]
    return u_q, du_q, a_q, da_q


def theorem2_diagnostics(f: Field3D, ref: Field1D, nu: float) -> DiagnosticsRecord:
    m = f.mesh
    if ref.mesh.nz != m.nz:
        raise ValueError(f"mesh mismatch: 1D nz={ref.mesh.nz}, 3D nz={m.nz}")
    _, _, _, _, wq, _ = m.reference()
    d = f.delta
    u_q, du_q, _, da_q = _ref_at_qp(m, ref)
    u1v, u1x, u1y, u1z = qp_values(m, f.u1)
    u2v, u2x, u2y, u2z = qp_values(m, f.u2)
    u3v, u3x, u3y, u3z = qp_values(m, f.u3)
    _, ax, ay, az = qp_values(m, f.alpha)

    def integ(q):
        return float((q * wq).sum())

    return DiagnosticsRecord(
        u3=integ((u3v - u_q) ** 2),
        e33=integ((u3z - du_q) ** 2),
        e11=integ((u1x + nu * du_q) ** 2),
        e22=integ((u2y + nu * du_q) ** 2),
        shear=integ((u1y + u2x) ** 2 + (d * u1z + u3x / d) ** 2 + (d * u2z + u3y / d) ** 2),
        alpha_transverse=integ(ax**2 + ay**2),
        alpha_axial=integ((az - da_q) ** 2),
    )


def slice_profiles_csv(f: Field3D, path, header_comment: str | None = None) -> None:
    """Write z, slice-averaged u3 and alpha."""
    z = f.mesh.z_levels
    u = slice_average(f, which="u3")
    a = slice_average(f, which="alpha")
    with open(path, "w", newline="") as fh:
        if header_comment:
            fh.write(f"# {header_comment}\n")
        wr = csv.writer(fh)
        wr.writerow(["z", "u3bar", "alphabar"])
        for row in zip(z, u, a):
            wr.writerow([f"{v:.17g}" for v in row])
