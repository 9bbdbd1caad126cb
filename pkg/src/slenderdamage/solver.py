"""Alternate minimisation: exact elastic solves at fixed damage, projected gradient for damage."""

from __future__ import annotations

import logging
import threading
import time
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Union

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla
import pyamg

from .energy import EnergyBreakdown, energy_1d, energy_3d, elastic_density
from .fields import Field1D, Field3D, project_alpha, qp_values
from .material import ConstitutiveLaw, MaterialParams
from .mesh import CylinderMesh

log = logging.getLogger(__name__)

Field = Union[Field1D, Field3D]


class ConvergenceError(RuntimeError):
    pass


@dataclass(frozen=True)
class SolverConfig:
    outer_max_iters: int = 200
    outer_tol_alpha: float = 1e-4
    outer_tol_energy: float = 1e-10
    cg_tol: float = 1e-10
    cg_max_iters: int = 20000
    pgd_tol: float = 1e-8
    pgd_max_iters: int = 20000
    linear_solver: str = "cg"     # "cg" (AMG-preconditioned) or "direct" (sparse LU)
    multistart: int = 0
    seed: int = 0

    def violations(self) -> list[str]:
        errs = []
        for k in ("outer_tol_alpha", "outer_tol_energy", "cg_tol", "pgd_tol"):
            if not getattr(self, k) > 0:
                errs.append(f"{k} must be > 0")
        for k in ("outer_max_iters", "cg_max_iters", "pgd_max_iters"):
            if int(getattr(self, k)) < 1:
                errs.append(f"{k} must be >= 1")
        if self.linear_solver not in ("direct", "cg"):
            errs.append("linear_solver must be 'direct' or 'cg'")
        if self.multistart < 0:
            errs.append("multistart must be >= 0")
        return errs

    def __post_init__(self):
        errs = self.violations()
        if errs:
            raise ValueError("; ".join(errs))


@dataclass
class SolveReport:
    iterations: int
    converged: bool
    energy: EnergyBreakdown
    trace: list = field(default_factory=list)          # energy after every half-step
    alpha_change: list = field(default_factory=list)   # ||delta alpha||_inf per outer iteration
    u_residual: float = 0.0
    alpha_pg_norm: float = 0.0
    wallclock: float = 0.0
    multistart_energies: list = field(default_factory=list)

    def as_dict(self, timings: bool = False) -> dict:
        d = {
            "iterations": self.iterations,
            "converged": bool(self.converged),
            "energy": self.energy.as_dict(),
            "trace": list(map(float, self.trace)),
            "alpha_change": list(map(float, self.alpha_change)),
            "u_residual": float(self.u_residual),
            "alpha_pg_norm": float(self.alpha_pg_norm),
            "multistart_energies": list(map(float, self.multistart_energies)),
        }
        if timings:
            d["wallclock"] = self.wallclock
        return d


# ---------------------------------------------------------------------------
# sparse assembly with a cached pattern

class _Pattern:
    """Maps element-local (i, j) entries of a fixed connectivity onto CSR data slots."""

    def __init__(self, dofs: np.ndarray, n: int):
        k = dofs.shape[1]
        rows = np.repeat(dofs, k, axis=1).ravel()
        cols = np.tile(dofs, (1, k)).ravel()
        key = rows.astype(np.int64) * n + cols
        uniq, self.slot = np.unique(key, return_inverse=True)
        self.n = n
        r, c = np.divmod(uniq, n)
        counts = np.bincount(r, minlength=n)
        self.indptr = np.concatenate([[0], np.cumsum(counts)]).astype(np.int64)
        self.indices = c.astype(np.int64)
        self.nnz = uniq.size

    def matrix(self, local: np.ndarray) -> sp.csr_matrix:
        data = np.bincount(self.slot, weights=local.ravel(), minlength=self.nnz)
        return sp.csr_matrix((data, self.indices, self.indptr), shape=(self.n, self.n))


@lru_cache(maxsize=8)
def _vector_pattern(mesh: CylinderMesh) -> _Pattern:
    n = mesh.n_nodes
    dofs = np.concatenate([mesh.cells, mesh.cells + n, mesh.cells + 2 * n], axis=1)
    return _Pattern(dofs, 3 * n)


@lru_cache(maxsize=8)
def _scalar_pattern(mesh: CylinderMesh) -> _Pattern:
    return _Pattern(mesh.cells, mesh.n_nodes)


@lru_cache(maxsize=8)
def _interp_matrix(mesh: CylinderMesh) -> sp.csr_matrix:
    """Sparse map from nodal values to the (n_cell*8) Gauss-point values."""
    N, *_ = mesh.reference()
    rows = np.repeat(np.arange(mesh.n_cells * 8), 8)
    cols = np.repeat(mesh.cells, 8, axis=0).ravel()
    data = np.tile(N, (mesh.n_cells, 1)).ravel()
    return sp.csr_matrix((data, (rows, cols)), shape=(mesh.n_cells * 8, mesh.n_nodes))


def _strain_operators(mesh: CylinderMesh, delta: float) -> np.ndarray:
    """B matrices (8 qp, 6, 24) mapping local dofs [u1, u2, u3] to
    (du1/dx, du2/dy, du3/dz, g12, g13, g23) with engineering shears."""
    _, Dx, Dy, Dz, _, _ = mesh.reference()
    B = np.zeros((8, 6, 24))
    B[:, 0, 0:8] = Dx
    B[:, 1, 8:16] = Dy
    B[:, 2, 16:24] = Dz
    B[:, 3, 0:8] = Dy
    B[:, 3, 8:16] = Dx
    B[:, 4, 0:8] = delta * Dz
    B[:, 4, 16:24] = Dx / delta
    B[:, 5, 8:16] = delta * Dz
    B[:, 5, 16:24] = Dy / delta
    return B


def elastic_matrix(p: MaterialParams, law: ConstitutiveLaw, f: Field3D) -> sp.csr_matrix:
    """Hessian of energy_3d w.r.t. (u1, u2, u3) at the field's damage."""
    m = f.mesh
    _, _, _, _, wq, _ = m.reference()
    lam, mu = p.lam, p.mu
    D = np.diag([2 * mu + lam] * 3 + [mu] * 3)
    D[:3, :3] += lam - np.diag([lam] * 3)
    B = _strain_operators(m, f.delta)
    Kq = np.einsum("qki,kl,qlj->qij", B, D, B) * (wq / m.measure)[:, None, None]
    al, *_ = qp_values(m, f.alpha)
    local = np.einsum("cq,qij->cij", law.a(al), Kq)
    return _vector_pattern(m).matrix(local)


def gradient_matrix(p: MaterialParams, mesh: CylinderMesh, delta: float) -> sp.csr_matrix:
    """Hessian of the damage-gradient terms (normalised by the mesh measure)."""
    _, Dx, Dy, Dz, wq, _ = mesh.reference()
    Kq = (np.einsum("qa,qb->qab", Dx, Dx) + np.einsum("qa,qb->qab", Dy, Dy)) / delta**2 \
        + np.einsum("qa,qb->qab", Dz, Dz)
    Ke = 2 * p.grad_coef * np.einsum("q,qab->ab", wq, Kq) / mesh.measure
    local = np.broadcast_to(Ke, (mesh.n_cells, 8, 8))
    return _scalar_pattern(mesh).matrix(local)


def _gauge_vectors(mesh: CylinderMesh) -> np.ndarray:
    """Mean u1, mean u2 and mean in-plane rotation functionals, shape (3, 3n)."""
    n = mesh.n_nodes
    w = np.tile(mesh.xy_weights, mesh.nz + 1)
    X = mesh.nodes
    C = np.zeros((3, 3 * n))
    C[0, :n] = w
    C[1, n:2 * n] = w
    C[2, :n] = -X[:, 1] * w
    C[2, n:2 * n] = X[:, 0] * w
    return C / w.sum()


def _rigid_modes(mesh: CylinderMesh, delta: float) -> np.ndarray:
    """Zero-energy modes of the rescaled elastic form without boundary conditions, (3n, 6).

    The first three (transverse translations, in-plane rotation) survive the
    u3 end conditions; all six serve as AMG near-nullspace.
    """
    n = mesh.n_nodes
    X = mesh.nodes
    B = np.zeros((3 * n, 6))
    B[:n, 0] = 1.0
    B[n:2 * n, 1] = 1.0
    B[:n, 2] = -X[:, 1]
    B[n:2 * n, 2] = X[:, 0]
    B[2 * n:, 3] = 1.0
    B[:n, 4] = X[:, 2] / delta
    B[2 * n:, 4] = -delta * X[:, 0]
    B[n:2 * n, 5] = X[:, 2] / delta
    B[2 * n:, 5] = -delta * X[:, 1]
    return B


def _pinned_dofs(mesh: CylinderMesh) -> np.ndarray:
    """Three displacement dofs whose fixing removes the transverse rigid modes."""
    n = mesh.n_nodes
    lev = mesh.nz // 2
    xy = mesh.xy_nodes
    a = int(np.argmin(xy[:, 0] ** 2 + xy[:, 1] ** 2))
    b = int(np.argmax(xy[:, 0] - np.abs(xy[:, 1])))
    a, b = lev * mesh.n_xy + a, lev * mesh.n_xy + b
    return np.array([a, n + a, n + b])


# ---------------------------------------------------------------------------
# displacement block

_AMG_LOCK = threading.Lock()


def _amg_hierarchy(A, modes, seed: int):
    """Smoothed-aggregation hierarchy built reproducibly.

    pyamg draws its spectral-radius start vectors from numpy's global RNG;
    seed it for the build and restore the caller's state afterwards.
    """
    with _AMG_LOCK:
        state = np.random.get_state()
        np.random.seed(seed % 2**32)
        try:
            return pyamg.smoothed_aggregation_solver(
                A, B=modes, strength=("symmetric", {"theta": 0.0}),
                max_coarse=2000, coarse_solver="splu")
        finally:
            np.random.set_state(state)


def _solve_u_3d(p, law, f: Field3D, cfg: SolverConfig):
    m = f.mesh
    n = m.n_nodes
    K = elastic_matrix(p, law, f)
    ends = np.concatenate([2 * n + m.bottom_nodes, 2 * n + m.top_nodes])
    pins = _pinned_dofs(m)
    fixed = np.concatenate([ends, pins])
    u = f.displacement()
    u[ends[:m.n_xy]] = 0.0
    u[ends[m.n_xy:]] = -f.eps_z
    free = np.setdiff1d(np.arange(3 * n), fixed)
    Kfree = K[free]
    Kff = Kfree[:, free].tocsr()
    rhs = -(Kfree[:, fixed] @ u[fixed])
    r0 = float(np.linalg.norm(Kff @ u[free] - rhs))
    bnorm = float(np.linalg.norm(rhs))
    if cfg.linear_solver == "direct":
        x = spla.splu(Kff.tocsc()).solve(rhs)
    else:
        modes = _rigid_modes(m, f.delta)[free]
        ml = _amg_hierarchy(Kff, modes, cfg.seed)
        x, info = spla.cg(Kff, rhs, x0=u[free], rtol=cfg.cg_tol, atol=0.0,
                          maxiter=cfg.cg_max_iters, M=ml.aspreconditioner(cycle="V"))
        if info != 0:
            log.warning("CG did not converge (info=%d)", info)
    u[free] = x
    res = float(np.linalg.norm(Kff @ x - rhs))
    # move to the gauge with zero mean transverse translation and rotation
    R = _rigid_modes(m, f.delta)[:, :3]
    C = _gauge_vectors(m)
    u -= R @ np.linalg.solve(C @ R, C @ u)
    out = f.copy()
    out.set_displacement(u)
    return out, res, res <= cfg.cg_tol * (max(r0, bnorm) + 1)


def _stiffness_1d(p, law, g: Field1D) -> sp.csr_matrix:
    N, _, wq = g.mesh.reference()
    el = g.mesh.elements
    aq = g.alphabar[el] @ N.T
    # element matrix ke * [[1, -1], [-1, 1]]
    ke = p.E * (law.a(aq) * wq).sum(axis=1) / g.mesh.h**2
    n = g.mesh.n_nodes
    diag = np.zeros(n)
    np.add.at(diag, el[:, 0], ke)
    np.add.at(diag, el[:, 1], ke)
    return sp.diags([diag, -ke, -ke], [0, 1, -1], format="csr")


def _solve_u_1d(p, law, g: Field1D, cfg: SolverConfig):
    K = _stiffness_1d(p, law, g)
    n = g.mesh.n_nodes
    u = g.u3bar.copy()
    u[0], u[-1] = 0.0, -g.eps_z
    free = np.arange(1, n - 1)
    Kff = K[free][:, free].tocsc()
    rhs = -(K[free][:, [0, n - 1]] @ u[[0, n - 1]])
    r0 = np.linalg.norm(Kff @ u[free] - rhs)
    u[free] = spla.spsolve(Kff, rhs)
    res = float(np.linalg.norm(Kff @ u[free] - rhs))
    out = g.copy()
    out.u3bar = u
    return out, res, res <= cfg.cg_tol * (r0 + 1)


def solve_u(p: MaterialParams, law: ConstitutiveLaw, f: Field, cfg: SolverConfig = SolverConfig()):
    """Exact minimiser of the energy over displacements at frozen damage.

    Returns (field, residual norm, converged flag).
    """
    if isinstance(f, Field3D):
        return _solve_u_3d(p, law, f, cfg)
    return _solve_u_1d(p, law, f, cfg)


# ---------------------------------------------------------------------------
# damage block

class _AlphaProblem:
    """f(alpha) = sum_q w_q [a(alpha_q) psi_q + w(alpha_q)] + alpha^T G alpha / 2."""

    def __init__(self, law, Nmat, wts, psi, G):
        self.law, self.N, self.wts, self.psi, self.G = law, Nmat, wts, psi, G
        self.mass = Nmat.T @ wts

    def value(self, x):
        aq = np.clip(self.N @ x, 0.0, 1.0)
        return float(self.wts @ (self.law.a(aq) * self.psi + self.law.w(aq)) + 0.5 * x @ (self.G @ x))

    def grad(self, x):
        aq = np.clip(self.N @ x, 0.0, 1.0)
        return self.N.T @ (self.wts * (self.law.da(aq) * self.psi + self.law.dw(aq))) + self.G @ x


def _alpha_problem_3d(p, law, f: Field3D) -> _AlphaProblem:
    m = f.mesh
    _, _, _, _, wq, _ = m.reference()
    psi = elastic_density(p, f).ravel()
    wts = np.tile(wq, m.n_cells) / m.measure
    return _AlphaProblem(law, _interp_matrix(m), wts, psi, gradient_matrix(p, m, f.delta))


def _alpha_problem_1d(p, law, g: Field1D) -> _AlphaProblem:
    mesh = g.mesh
    N, dN, wq = mesh.reference()
    el = mesh.elements
    du = g.u3bar[el] @ dN.T
    psi = (0.5 * p.E * du**2).ravel()
    rows = np.repeat(np.arange(mesh.nz * 2), 2)
    cols = np.repeat(el, 2, axis=0).ravel()
    Nmat = sp.csr_matrix((np.tile(N, (mesh.nz, 1)).ravel(), (rows, cols)),
                         shape=(mesh.nz * 2, mesh.n_nodes))
    ke = 2 * p.grad_coef / mesh.h
    n = mesh.n_nodes
    diag = np.full(n, 2 * ke)
    diag[[0, -1]] = ke
    G = sp.diags([diag, np.full(n - 1, -ke), np.full(n - 1, -ke)], [0, 1, -1], format="csr")
    return _AlphaProblem(law, Nmat, np.tile(wq, mesh.nz), psi, G)


def projected_gradient(prob: _AlphaProblem, x0: np.ndarray, tol: float, max_iters: int,
                       memory: int = 10):
    """Spectral projected gradient on [0,1]^n in the lumped-mass metric.

    Barzilai-Borwein steps with a nonmonotone (max of last ``memory`` values)
    Armijo backtracking; projection is the last operation of every step.
    Returns (x, projected-gradient inf-norm, iterations, converged).
    """
    m = prob.mass
    x = project_alpha(x0)
    fx = prob.value(x)
    g = prob.grad(x)
    hist = [fx]
    t = 1.0
    pg = np.max(np.abs(x - project_alpha(x - g / m))) if x.size else 0.0
    it = 0
    while pg > tol and it < max_iters:
        it += 1
        d = project_alpha(x - t * g / m) - x
        gd = float(g @ d)
        fref = max(hist[-memory:])
        theta = 1.0
        while True:
            xn = x + theta * d
            fn = prob.value(xn)
            if fn <= fref + 1e-4 * theta * gd or theta < 1e-12:
                break
            theta *= 0.5
        xn = project_alpha(xn)
        gn = prob.grad(xn)
        s = xn - x
        y = gn - g
        sy = float(s @ y)
        t = float(np.clip((s * m) @ s / sy, 1e-12, 1e12)) if sy > 0 else 1e12
        x, g, fx = xn, gn, fn
        hist.append(fx)
        pg = np.max(np.abs(x - project_alpha(x - g / m)))
    return x, float(pg), it, pg <= tol


def solve_alpha(p: MaterialParams, law: ConstitutiveLaw, f: Field, cfg: SolverConfig = SolverConfig()):
    """Minimise over damage in [0,1] at frozen displacement.

    Returns (field, projected-gradient norm, converged flag).
    """
    if isinstance(f, Field3D):
        prob = _alpha_problem_3d(p, law, f)
        x0 = f.alpha
    else:
        prob = _alpha_problem_1d(p, law, f)
        x0 = f.alphabar
    x, pg, _, ok = projected_gradient(prob, x0, cfg.pgd_tol, cfg.pgd_max_iters)
    out = f.copy()
    if isinstance(f, Field3D):
        out.alpha = x
    else:
        out.alphabar = x
    return out, pg, ok


# ---------------------------------------------------------------------------

def _energy(p, law, f):
    return energy_3d(p, law, f) if isinstance(f, Field3D) else energy_1d(p, law, f)


def _alpha_of(f):
    return f.alpha if isinstance(f, Field3D) else f.alphabar


def _unloaded(p, law, f: Field) -> bool:
    top = f.u3[f.mesh.top_nodes] if isinstance(f, Field3D) else f.u3bar[-1:]
    return p.eps_z == 0.0 and not np.any(top) and law.w(0.0) == 0.0


def _single_run(p, law, f: Field, cfg: SolverConfig):
    t0 = time.perf_counter()
    f = f.copy()
    trace = [_energy(p, law, f).total]
    changes = []
    converged = False
    ures = pgn = 0.0
    inner_ok = True
    it = 0
    for it in range(1, cfg.outer_max_iters + 1):
        old = _alpha_of(f).copy()
        f, ures, ok_u = solve_u(p, law, f, cfg)
        trace.append(_energy(p, law, f).total)
        f, pgn, ok_a = solve_alpha(p, law, f, cfg)
        trace.append(_energy(p, law, f).total)
        inner_ok = ok_u and ok_a
        dal = float(np.max(np.abs(_alpha_of(f) - old)))
        changes.append(dal)
        e_prev, e_new = trace[-3], trace[-1]
        rel = (e_prev - e_new) / max(abs(e_prev), 1e-300)
        if dal < cfg.outer_tol_alpha and rel < cfg.outer_tol_energy and inner_ok:
            converged = True
            break
    # final displacement solve so u is exactly optimal for the returned damage
    f, ures, ok_u = solve_u(p, law, f, cfg)
    trace.append(_energy(p, law, f).total)
    converged = converged and ok_u
    rep = SolveReport(iterations=it, converged=bool(converged), energy=_energy(p, law, f), trace=trace,
                      alpha_change=changes, u_residual=ures, alpha_pg_norm=pgn,
                      wallclock=time.perf_counter() - t0)
    if not converged:
        log.warning("alternate minimisation stopped after %d iterations without convergence", it)
    return f, rep


def alternate_minimize(p: MaterialParams, law: ConstitutiveLaw, init: Field,
                       cfg: SolverConfig = SolverConfig()):
    """Block-coordinate descent from ``init``; returns (field, SolveReport).

    The result is a critical point of the discrete energy, not a certified
    global minimiser. With ``cfg.multistart > 0`` extra runs start from
    seeded random damage fields and the lowest-energy result is kept; all
    final energies are recorded in the report.
    """
    errs = init.violations(1e-12)
    if errs:
        raise ValueError("inadmissible initial field: " + "; ".join(errs))
    if _unloaded(p, law, init):
        # every term is nonnegative and vanishes at the zero state: exact global minimiser
        z = init.copy()
        for name in ("u1", "u2", "u3", "alpha") if isinstance(z, Field3D) else ("u3bar", "alphabar"):
            setattr(z, name, np.zeros_like(getattr(z, name)))
        e = _energy(p, law, z)
        return z, SolveReport(iterations=0, converged=True, energy=e, trace=[e.total],
                              multistart_energies=[e.total] * (cfg.multistart + 1) if cfg.multistart else [])
    best, rep = _single_run(p, law, init, cfg)
    if cfg.multistart:
        rng = np.random.default_rng(cfg.seed)
        energies = [rep.energy.total]
        for _ in range(cfg.multistart):
            start = init.copy()
            a = rng.uniform(0.0, 1.0, size=_alpha_of(init).shape)
            if isinstance(start, Field3D):
                start.alpha = a
            else:
                start.alphabar = a
            f2, rep2 = _single_run(p, law, start, cfg)
            energies.append(rep2.energy.total)
            if rep2.energy.total < rep.energy.total:
                best, rep = f2, rep2
        rep.multistart_energies = energies
    return best, rep
