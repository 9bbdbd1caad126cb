"""Discrete energies E_delta (cylinder) and E_inf (interval) with exact gradients."""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass

import numpy as np

from .fields import Field1D, Field3D, qp_values
from .material import ConstitutiveLaw, MaterialParams

BREAKDOWN_KEYS = ("normal", "trace", "shear_inplane", "shear_axial", "damage_local",
                  "damage_grad_transverse", "damage_grad_axial")


@dataclass
class EnergyBreakdown:
    normal: float = 0.0
    trace: float = 0.0
    shear_inplane: float = 0.0
    shear_axial: float = 0.0
    damage_local: float = 0.0
    damage_grad_transverse: float = 0.0
    damage_grad_axial: float = 0.0

    @property
    def elastic(self) -> float:
        return self.normal + self.trace + self.shear_inplane + self.shear_axial

    @property
    def total(self) -> float:
        return float(sum(getattr(self, k) for k in BREAKDOWN_KEYS))

    def as_dict(self) -> dict:
        d = asdict(self)
        d["total"] = self.total
        return d

    def to_json(self) -> str:
        return json.dumps(self.as_dict())

    @staticmethod
    def csv_header() -> list[str]:
        return [*BREAKDOWN_KEYS, "total"]

    def csv_row(self) -> list[str]:
        return [f"{v:.17g}" for v in self.as_dict().values()]


def _reject_nan(*arrays):
    for a in arrays:
        if not np.all(np.isfinite(a)):
            raise ValueError("field contains NaN or infinite values")


def _elastic_qp(p: MaterialParams, f: Field3D):
    """Per-Gauss-point pieces of the undegraded elastic density and the raw gradients."""
    m, d = f.mesh, f.delta
    _, u1x, u1y, u1z = qp_values(m, f.u1)
    _, u2x, u2y, u2z = qp_values(m, f.u2)
    _, u3x, u3y, u3z = qp_values(m, f.u3)
    tr = u1x + u2y + u3z
    g12 = u1y + u2x
    g13 = d * u1z + u3x / d
    g23 = d * u2z + u3y / d
    parts = {
        "normal": p.mu * (u1x**2 + u2y**2 + u3z**2),
        "trace": 0.5 * p.lam * tr**2,
        "shear_inplane": 0.5 * p.mu * g12**2,
        "shear_axial": 0.5 * p.mu * (g13**2 + g23**2),
    }
    grads = dict(u1x=u1x, u2y=u2y, u3z=u3z, tr=tr, g12=g12, g13=g13, g23=g23)
    return parts, grads


def elastic_density(p: MaterialParams, f: Field3D) -> np.ndarray:
    """Undegraded elastic energy density at the Gauss points, (n_cell, 8)."""
    parts, _ = _elastic_qp(p, f)
    return sum(parts.values())


def energy_3d(p: MaterialParams, law: ConstitutiveLaw, f: Field3D) -> EnergyBreakdown:
    """Energy per unit (discrete) volume of a cylinder field."""
    _reject_nan(f.u1, f.u2, f.u3, f.alpha)
    m, d = f.mesh, f.delta
    _, _, _, _, wq, _ = m.reference()
    al, ax, ay, az = qp_values(m, f.alpha)
    a = law.a(al)
    parts, _ = _elastic_qp(p, f)
    c = p.grad_coef
    scale = 1.0 / m.measure

    def integ(q):
        return float((q * wq).sum() * scale)

    return EnergyBreakdown(
        normal=integ(a * parts["normal"]),
        trace=integ(a * parts["trace"]),
        shear_inplane=integ(a * parts["shear_inplane"]),
        shear_axial=integ(a * parts["shear_axial"]),
        damage_local=integ(law.w(al)),
        damage_grad_transverse=integ(c * (ax**2 + ay**2) / d**2),
        damage_grad_axial=integ(c * az**2),
    )


def _scatter(mesh, coef_by_op):
    """Assemble sum_q coef_q * (op)_qa into nodal vectors; coef_by_op is [(coef (C,8), op (8,8))]."""
    loc = np.zeros((mesh.n_cells, 8))
    for coef, op in coef_by_op:
        loc += coef @ op
    return np.bincount(mesh.cells.ravel(), weights=loc.ravel(), minlength=mesh.n_nodes)


def grad_energy_3d(p: MaterialParams, law: ConstitutiveLaw, f: Field3D,
                   mask_dirichlet: bool = True) -> dict:
    """Gradient of energy_3d().total w.r.t. every nodal dof.

    Returns a dict with keys u1, u2, u3, alpha. The alpha block is the raw
    gradient (no box projection); u3 entries on z=0 and z=1 are zeroed unless
    ``mask_dirichlet`` is False.
    """
    _reject_nan(f.u1, f.u2, f.u3, f.alpha)
    m, d = f.mesh, f.delta
    N, Dx, Dy, Dz, wq, _ = m.reference()
    w = wq / m.measure
    al, ax, ay, az = qp_values(m, f.alpha)
    a = law.a(al)
    parts, g = _elastic_qp(p, f)
    psi = sum(parts.values())
    s11 = a * (2 * p.mu * g["u1x"] + p.lam * g["tr"]) * w
    s22 = a * (2 * p.mu * g["u2y"] + p.lam * g["tr"]) * w
    s33 = a * (2 * p.mu * g["u3z"] + p.lam * g["tr"]) * w
    t12 = a * p.mu * g["g12"] * w
    t13 = a * p.mu * g["g13"] * w
    t23 = a * p.mu * g["g23"] * w
    c2 = 2 * p.grad_coef
    out = {
        "u1": _scatter(m, [(s11, Dx), (t12, Dy), (d * t13, Dz)]),
        "u2": _scatter(m, [(s22, Dy), (t12, Dx), (d * t23, Dz)]),
        "u3": _scatter(m, [(s33, Dz), (t13 / d, Dx), (t23 / d, Dy)]),
        "alpha": _scatter(m, [((law.da(al) * psi + law.dw(al)) * w, N),
                              (c2 * ax * w / d**2, Dx), (c2 * ay * w / d**2, Dy),
                              (c2 * az * w, Dz)]),
    }
    if mask_dirichlet:
        out["u3"][m.bottom_nodes] = 0.0
        out["u3"][m.top_nodes] = 0.0
    return out


def _qp_1d(g: Field1D):
    N, dN, wq = g.mesh.reference()
    el = g.mesh.elements
    u = g.u3bar[el]
    al = g.alphabar[el]
    return al @ N.T, u @ dN.T, al @ dN.T, wq


def energy_1d(p: MaterialParams, law: ConstitutiveLaw, g: Field1D) -> EnergyBreakdown:
    _reject_nan(g.u3bar, g.alphabar)
    aq, duq, daq, wq = _qp_1d(g)
    E = p.E
    return EnergyBreakdown(
        normal=float((law.a(aq) * 0.5 * E * duq**2 * wq).sum()),
        damage_local=float((law.w(aq) * wq).sum()),
        damage_grad_axial=float((p.grad_coef * daq**2 * wq).sum()),
    )


def grad_energy_1d(p: MaterialParams, law: ConstitutiveLaw, g: Field1D,
                   mask_dirichlet: bool = True) -> dict:
    _reject_nan(g.u3bar, g.alphabar)
    N, dN, wq = g.mesh.reference()
    aq, duq, daq, _ = _qp_1d(g)
    E = p.E
    n = g.mesh.n_nodes
    el = g.mesh.elements
    su = (law.a(aq) * E * duq * wq) @ dN
    sa = ((law.da(aq) * 0.5 * E * duq**2 + law.dw(aq)) * wq) @ N + (2 * p.grad_coef * daq * wq) @ dN
    gu = np.bincount(el.ravel(), weights=su.ravel(), minlength=n)
    ga = np.bincount(el.ravel(), weights=sa.ravel(), minlength=n)
    if mask_dirichlet:
        gu[[0, -1]] = 0.0
    return {"u3bar": gu, "alphabar": ga}
