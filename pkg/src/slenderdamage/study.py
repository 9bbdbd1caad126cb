"""Delta sweeps comparing 3D minimizers with the 1D minimizer, plus pointwise oracles."""

from __future__ import annotations

import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from .energy import energy_1d
from .fields import (DiagnosticsRecord, Field1D, Field3D, _ref_at_qp, embed_uniaxial, expand_section,
                     linear_1d, qp_section_average, qp_values, slice_average, strain, test_field,
                     theorem2_diagnostics)
from .material import ConstitutiveLaw, MaterialParams
from .mesh import CylinderMesh, build_cylinder, build_interval
from .output import loglog_svg, write_csv, write_json
from .recovery import resample_1d
from .solver import SolverConfig, SolveReport, alternate_minimize


@dataclass(frozen=True)
class HomogeneousOracle:
    grid_n: int
    eps: float
    alpha_star: float
    e_star: float


def homogeneous_oracle(params: MaterialParams, law: ConstitutiveLaw, eps: float,
                       grid_n: int = 100_000) -> HomogeneousOracle:
    """Exhaustive scan of a(alpha) E/2 eps^2 + w(alpha) over alpha in {0, 1/n, ..., 1}."""
    if int(grid_n) != grid_n or grid_n < 1000:
        raise ValueError(f"grid_n must be an integer >= 1000 (got {grid_n})")
    alpha = np.arange(int(grid_n) + 1) / grid_n
    e = law.a(alpha) * 0.5 * params.E * eps**2 + law.w(alpha)
    i = int(np.argmin(e))
    return HomogeneousOracle(int(grid_n), float(eps), float(alpha[i]), float(e[i]))


@dataclass
class Prop1Remainders:
    """Nonnegative remainder integrals of the 1D lower bound, per unit volume."""

    deviatoric: float
    poisson: float
    variance: float

    def as_dict(self) -> dict:
        return asdict(self)


def prop1_remainders(params: MaterialParams, law: ConstitutiveLaw, f3d: Field3D,
                     g1d: Optional[Field1D] = None) -> Prop1Remainders:
    """Deviatoric, Poisson-coupling and cross-section-variance remainders of a 3D field.

    The weight a(alpha_hat(z)) uses the 1D damage profile when ``g1d`` is given,
    otherwise the section average of the 3D damage.
    """
    m = f3d.mesh
    _, _, _, _, wq, _ = m.reference()
    if g1d is not None:
        _, _, ahat, _ = _ref_at_qp(m, resample_1d(g1d, m.nz))
    else:
        al, _, _, _ = qp_values(m, f3d.alpha)
        ahat = expand_section(m, qp_section_average(m, al))
    a = law.a(np.clip(ahat, 0.0, 1.0))
    e = strain(f3d)
    e33_mean = expand_section(m, qp_section_average(m, e.e33))
    lam, mu, nu, E = params.lam, params.mu, params.nu, params.E

    def integ(q):
        return float((a * q * wq).sum() / m.measure)

    return Prop1Remainders(
        deviatoric=integ(0.5 * mu * (e.e11 - e.e22) ** 2),
        poisson=integ(2 * (lam + mu) * (0.5 * (e.e11 + e.e22) + nu * e.e33) ** 2),
        variance=integ(0.5 * E * (e.e33 - e33_mean) ** 2),
    )


@dataclass(frozen=True)
class StudyConfig:
    """Sweep settings. ``init`` is "warm" (embedded 1D minimizer) or "cold" (u_test, alpha = 0).

    The 1D solve starts from the affine field with damage
    ``bump_amplitude * exp(-((z - 0.5) / bump_width)^2)``; amplitude 0 gives uniform init.
    """

    deltas: tuple = (0.4, 0.2, 0.1)
    nxy: int = 16
    nz: int = 32
    nz1d: int = 32
    init: str = "warm"
    bump_amplitude: float = 0.0
    bump_width: float = 0.1
    threads: int = 1

    def violations(self) -> list[str]:
        errs = []
        d = list(self.deltas)
        if not d:
            errs.append("study.deltas must not be empty")
        elif any(not 0 < x <= 1 for x in d):
            errs.append("study.deltas entries must lie in (0, 1]")
        elif any(b >= a for a, b in zip(d, d[1:])):
            errs.append("study.deltas must be strictly decreasing")
        if self.init not in ("warm", "cold"):
            errs.append(f"study.init must be 'warm' or 'cold' (got {self.init!r})")
        if not 0 <= self.bump_amplitude <= 1:
            errs.append("study.bump_amplitude must lie in [0, 1]")
        if not self.bump_width > 0:
            errs.append("study.bump_width must be > 0")
        if self.threads < 1:
            errs.append("study.threads must be >= 1")
        if self.nxy < 4 or self.nz < 2 or self.nz1d < 2:
            errs.append("mesh sizes too small (need nxy >= 4, nz >= 2, nz1d >= 2)")
        return errs


def initial_1d(params: MaterialParams, nz: int, amplitude: float = 0.0, width: float = 0.1) -> Field1D:
    m = build_interval(nz)
    g = linear_1d(m, params.eps_z)
    if amplitude > 0:
        g.alphabar = amplitude * np.exp(-((m.nodes - 0.5) / width) ** 2)
    return g


@dataclass
class StudyRecord:
    delta: float
    E3d_min: float
    E1d_min: float
    gap: float
    diag: DiagnosticsRecord
    prop1: Prop1Remainders
    u3_slice_residual: float
    alpha_transverse: float       # per unit volume
    transverse_bound: float       # 2 M delta^2 L^2 / (w1 ell^2)
    iters: int
    converged: bool
    multistart_energies: list = field(default_factory=list)
    wallclock: float = 0.0

    CSV_HEADER = ("delta", "E3d_min", "E1d_min", "gap", "u3_slice_residual", "alpha_transverse",
                  "transverse_bound", "iters", "converged",
                  "diag_u3", "diag_e33", "diag_e11", "diag_e22", "diag_shear",
                  "diag_alpha_transverse", "diag_alpha_axial",
                  "prop1_deviatoric", "prop1_poisson", "prop1_variance")

    def csv_row(self) -> list:
        d = self.diag.as_dict()
        p = self.prop1.as_dict()
        return [self.delta, self.E3d_min, self.E1d_min, self.gap, self.u3_slice_residual,
                self.alpha_transverse, self.transverse_bound, self.iters, self.converged,
                d["u3"], d["e33"], d["e11"], d["e22"], d["shear"], d["alpha_transverse"],
                d["alpha_axial"], p["deviatoric"], p["poisson"], p["variance"]]

    def as_dict(self, timings: bool = False) -> dict:
        out = {k: getattr(self, k) for k in ("delta", "E3d_min", "E1d_min", "gap", "u3_slice_residual",
                                             "alpha_transverse", "transverse_bound", "iters",
                                             "converged", "multistart_energies")}
        out["diag"] = self.diag.as_dict()
        out["prop1"] = self.prop1.as_dict()
        if timings:
            out["wallclock"] = self.wallclock
        return out


def _nonincreasing(values, slack: float = 0.05) -> bool:
    v = np.asarray(values, float)
    return bool(np.all(v[1:] <= (1.0 + slack) * v[:-1]))


@dataclass
class StudyResult:
    records: list
    g1d: Field1D
    report1d: SolveReport
    fields3d: list
    checks: dict

    def write(self, out_dir, comment: str | None = None, timings: bool = False) -> list[Path]:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        paths = [out / "study.csv", out / "study.json", out / "gap_vs_delta.svg",
                 out / "residuals_vs_delta.svg"]
        write_csv(paths[0], StudyRecord.CSV_HEADER, (r.csv_row() for r in self.records), comment)
        write_json(paths[1], {
            "comment": comment or "",
            "records": [r.as_dict(timings) for r in self.records],
            "checks": self.checks,
            "solve1d": self.report1d.as_dict(timings),
            "profile1d": {"z": self.g1d.mesh.nodes, "u3bar": self.g1d.u3bar,
                          "alphabar": self.g1d.alphabar},
        })
        d = [r.delta for r in self.records]
        loglog_svg(paths[2], {"|E3d - E1d|": (d, [abs(r.gap) for r in self.records])},
                   "delta", "energy gap", "3D vs 1D minimum", comment)
        series = {name: (d, [r.diag.as_dict()[name] for r in self.records])
                  for name in ("u3", "e33", "e11", "shear", "alpha_transverse", "alpha_axial")}
        series["poisson"] = (d, [r.prop1.poisson for r in self.records])
        loglog_svg(paths[3], series, "delta", "residual", "distance from uniaxial limit", comment)
        return paths


def summarize(records: list, slack: float = 0.05) -> dict:
    """Monotonicity and sign checks over the converged records."""
    ok = [r for r in records if r.converged]
    checks = {"n_records": len(records), "n_converged": len(ok)}
    checks["gap_nonincreasing"] = _nonincreasing([abs(r.gap) for r in ok], slack)
    for name in DiagnosticsRecord.__dataclass_fields__:
        checks[f"diag_{name}_nonincreasing"] = _nonincreasing(
            [getattr(r.diag, name) for r in ok], slack)
    checks["prop1_nonnegative"] = all(v >= 0 for r in records for v in r.prop1.as_dict().values())
    checks["poisson_decreasing"] = bool(np.all(np.diff([r.prop1.poisson for r in ok]) < 0))
    checks["transverse_bound_holds"] = all(r.alpha_transverse <= r.transverse_bound for r in ok)
    if len(ok) >= 2:
        first, last = ok[0], ok[-1]
        checks["shear_reduction"] = first.diag.shear / last.diag.shear if last.diag.shear > 0 else np.inf
        checks["alpha_transverse_reduction"] = (first.diag.alpha_transverse / last.diag.alpha_transverse
                                                if last.diag.alpha_transverse > 0 else np.inf)
    disagreements = [r.delta for r in records
                     if len(r.multistart_energies) > 1
                     and np.ptp(r.multistart_energies) > 1e-8 * max(1.0, abs(r.E3d_min))]
    checks["multistart_disagreement_deltas"] = disagreements
    return checks


def _sweep_entry(params, law, cfg, mesh: CylinderMesh, g_embed: Field1D, g1d: Field1D,
                 E1: float, delta: float, init: str) -> tuple[StudyRecord, Field3D]:
    t0 = time.perf_counter()
    if init == "warm":
        f0 = embed_uniaxial(g_embed, mesh, delta, params.nu)
    else:
        f0 = test_field(mesh, params.eps_z, params.nu, delta)
    f, rep = alternate_minimize(params, law, f0, cfg)
    E3 = rep.energy.total
    ubar = slice_average(f, which="u3")
    u3_res = float(np.sum((ubar - g_embed.u3bar) ** 2) * mesh.hz)
    M = 0.5 * params.E * params.eps_z**2
    rec = StudyRecord(
        delta=float(delta), E3d_min=E3, E1d_min=E1, gap=E3 - E1,
        diag=theorem2_diagnostics(f, g_embed, params.nu),
        prop1=prop1_remainders(params, law, f, g1d),
        u3_slice_residual=u3_res,
        alpha_transverse=rep.energy.damage_grad_transverse * delta**2 / params.grad_coef,
        transverse_bound=2 * M * delta**2 * params.bigL**2 / (params.w1 * params.ell**2),
        iters=rep.iterations, converged=rep.converged,
        multistart_energies=list(rep.multistart_energies),
        wallclock=time.perf_counter() - t0,
    )
    return rec, f


def gamma_sweep(params: MaterialParams, law: ConstitutiveLaw, cfg: SolverConfig,
                study: StudyConfig) -> StudyResult:
    """Solve the 1D problem once and the 3D problem for each delta; collect diagnostics."""
    errs = study.violations() + cfg.violations()
    if errs:
        raise ValueError("; ".join(errs))
    mesh = build_cylinder(study.nxy, study.nz)
    g0 = initial_1d(params, study.nz1d, study.bump_amplitude, study.bump_width)
    g1d, rep1 = alternate_minimize(params, law, g0, cfg)
    E1 = energy_1d(params, law, g1d).total
    g_embed = resample_1d(g1d, study.nz)

    def run(d):
        return _sweep_entry(params, law, cfg, mesh, g_embed, g1d, E1, d, study.init)

    deltas = [float(d) for d in study.deltas]
    if study.threads > 1:
        with ThreadPoolExecutor(max_workers=study.threads) as pool:
            results = list(pool.map(run, deltas))
    else:
        results = [run(d) for d in deltas]
    records = [r for r, _ in results]
    return StudyResult(records=records, g1d=g1d, report1d=rep1,
                       fields3d=[f for _, f in results], checks=summarize(records))
