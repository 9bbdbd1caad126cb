"""Command-line front end.

Configuration files use INI syntax (``[section]`` headers, ``key = value``
lines, ``#`` or ``;`` comments). A key is referred to as ``section.key`` in
error messages. Lists are comma separated. Unknown sections or keys are
errors; every violated constraint is reported at once.
"""

from __future__ import annotations

import argparse
import configparser
import hashlib
import json
import logging
import sys
from dataclasses import dataclass, fields
from pathlib import Path

import numpy as np

from .energy import energy_1d, energy_3d, grad_energy_1d, grad_energy_3d
from .fields import slice_profiles_csv, test_field
from .material import (ConstitutiveLaw, MaterialParams, ParameterError, at1_threshold_strain,
                       verify_uniaxial_identity)
from .mesh import MeshError, build_cylinder, build_interval
from .output import fmt, write_csv, write_json
from .recovery import kinked_profile, limsup_check
from .solver import SolverConfig, alternate_minimize
from .study import StudyConfig, gamma_sweep, initial_1d

EXIT_OK, EXIT_CONFIG, EXIT_SOLVER, EXIT_IO = 0, 2, 3, 4

DEFAULT_CONFIG = Path(__file__).with_name("default.ini")


class ConfigError(ValueError):
    def __init__(self, violations: list[str]):
        super().__init__("; ".join(violations))
        self.violations = list(violations)


class SolverFailure(RuntimeError):
    pass


def _floats(text: str) -> tuple:
    return tuple(float(t) for t in text.replace(";", ",").split(",") if t.strip())


# (type, default); None default means required
SCHEMA = {
    "material": {"lambda": (float, None), "mu": (float, None), "eta": (float, None),
                 "w1": (float, None), "ell": (float, None), "L": (float, 1.0),
                 "eps_z": (float, 0.0)},
    "law": {"degradation": (str, "quadratic"), "damage_energy": (str, "at2"),
            "table_nodes": (_floats, ()), "a_values": (_floats, ()), "w_values": (_floats, ())},
    "mesh": {"nxy": (int, 16), "nz": (int, 32), "nz1d": (int, 32)},
    "solver": {f.name: (type(f.default), f.default) for f in fields(SolverConfig)},
    "study": {"deltas": (_floats, (0.4, 0.2, 0.1)), "output_dir": (str, "out"),
              "init": (str, "warm"), "bump_amplitude": (float, 0.0), "bump_width": (float, 0.1)},
    "recovery": {"profile": (str, "minimizer"), "kink": (float, 0.5), "ratio": (float, 3.0),
                 "extension": (str, "zero")},
}


@dataclass
class RunConfig:
    params: MaterialParams
    law: ConstitutiveLaw
    solver: SolverConfig
    study: StudyConfig
    recovery: dict
    output_dir: Path
    values: dict          # normalised section -> key -> value, used for hashing

    @property
    def config_hash(self) -> str:
        canon = json.dumps(self.values, sort_keys=True, default=_canon)
        return hashlib.sha256(canon.encode()).hexdigest()[:16]

    @property
    def header(self) -> str:
        return f"config_hash={self.config_hash}"


def _canon(v):
    if isinstance(v, float):
        return fmt(v)
    if isinstance(v, tuple):
        return [fmt(x) for x in v]
    return str(v)


def _parse(text: str) -> tuple[dict, list[str]]:
    cp = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=("#", ";"))
    cp.optionxform = str
    cp.read_string(text)
    values: dict = {}
    errs = []
    for sec in cp.sections():
        if sec not in SCHEMA:
            errs.append(f"unknown section [{sec}]")
            continue
        for key in cp[sec]:
            if key not in SCHEMA[sec]:
                errs.append(f"unknown key {sec}.{key}")
    for sec, entries in SCHEMA.items():
        values[sec] = {}
        for key, (typ, default) in entries.items():
            if cp.has_option(sec, key):
                raw = cp.get(sec, key).strip()
                try:
                    if typ is int:
                        x = float(raw)
                        if x != int(x):
                            raise ValueError
                        val = int(x)
                    else:
                        val = typ(raw)
                except ValueError:
                    errs.append(f"{sec}.{key}: cannot parse {raw!r} as {getattr(typ, '__name__', 'list')}")
                    continue
            elif default is None:
                errs.append(f"{sec}.{key} is required")
                continue
            else:
                val = default
            values[sec][key] = val
    return values, errs


def load_config(path, seed: int | None = None, threads: int | None = None,
                out: str | None = None) -> RunConfig:
    """Parse and validate a config file; raises ConfigError listing all problems."""
    text = Path(path).read_text()
    try:
        values, errs = _parse(text)
    except configparser.Error as exc:
        raise ConfigError([f"malformed config: {exc}"]) from None
    if seed is not None:
        values["solver"]["seed"] = int(seed)
    # unknown keys are reported together with the semantic checks below
    if any(len(values[sec]) < len(SCHEMA[sec]) for sec in SCHEMA):
        raise ConfigError(errs)
    m, lw, ms, so, st, rc = (values[k] for k in ("material", "law", "mesh", "solver", "study", "recovery"))

    params = law = solver = None
    try:
        params = MaterialParams(lam=m["lambda"], mu=m["mu"], eta=m["eta"], w1=m["w1"], ell=m["ell"],
                                bigL=m["L"], eps_z=m["eps_z"])
    except ParameterError as exc:
        errs.extend(f"material.{e}" for e in str(exc).split("; "))
    if params is not None:
        try:
            tables = {}
            if lw["degradation"] == "tabulated":
                tables["a_table"] = (lw["table_nodes"], lw["a_values"])
            if lw["damage_energy"] == "tabulated":
                tables["w_table"] = (lw["table_nodes"], lw["w_values"])
            law = ConstitutiveLaw.from_params(params, lw["degradation"], lw["damage_energy"], **tables)
        except ParameterError as exc:
            errs.append(f"law: {exc}")
    for k in ("nxy", "nz", "nz1d"):
        lo = 4 if k == "nxy" else 2
        if ms[k] < lo:
            errs.append(f"mesh.{k} must be >= {lo} (got {ms[k]})")
    try:
        solver = SolverConfig(**so)
    except ValueError as exc:
        errs.extend(f"solver.{e}" for e in str(exc).split("; "))
    study = StudyConfig(deltas=tuple(st["deltas"]), nxy=ms["nxy"], nz=ms["nz"], nz1d=ms["nz1d"],
                        init=st["init"], bump_amplitude=st["bump_amplitude"],
                        bump_width=st["bump_width"], threads=int(threads or 1))
    for e in study.violations():
        if e.startswith("study.") and e not in errs:
            errs.append(e)
    if rc["profile"] not in ("minimizer", "kinked"):
        errs.append("recovery.profile must be 'minimizer' or 'kinked'")
    if rc["extension"] not in ("zero", "edge"):
        errs.append("recovery.extension must be 'zero' or 'edge'")
    if not 0 < rc["kink"] < 1:
        errs.append("recovery.kink must lie in (0, 1)")
    if not rc["ratio"] > 0:
        errs.append("recovery.ratio must be > 0")
    if errs:
        raise ConfigError(errs)
    outdir = Path(out) if out else Path(st["output_dir"])
    return RunConfig(params=params, law=law, solver=solver, study=study, recovery=rc,
                     output_dir=outdir, values=values)


# --- subcommands --------------------------------------------------------------------

def _trace_csv(path, rep, header):
    write_csv(path, ("step", "energy"), enumerate(rep.trace), header)


def _check_converged(rep, what: str):
    if not rep.converged:
        raise SolverFailure(f"{what} did not converge after {rep.iterations} iterations "
                            f"(last alpha change {rep.alpha_change[-1] if rep.alpha_change else 0:.3g})")


def cmd_solve1d(rc: RunConfig, args) -> dict:
    g0 = initial_1d(rc.params, rc.study.nz1d, rc.study.bump_amplitude, rc.study.bump_width)
    g, rep = alternate_minimize(rc.params, rc.law, g0, rc.solver)
    out = rc.output_dir
    g.to_csv(out / "solve1d_profile.csv", rc.header)
    _trace_csv(out / "solve1d_trace.csv", rep, rc.header)
    write_json(out / "solve1d_report.json", {"config_hash": rc.config_hash, "report": rep.as_dict()})
    print(json.dumps({"energy": fmt(rep.energy.total), "iterations": rep.iterations,
                      "converged": rep.converged}))
    _check_converged(rep, "1D alternate minimisation")
    return rep.as_dict()


def cmd_solve3d(rc: RunConfig, args) -> dict:
    delta = args.delta if args.delta is not None else rc.study.deltas[-1]
    if not 0 < delta <= 1:
        raise ConfigError([f"--delta must lie in (0, 1] (got {delta})"])
    mesh = build_cylinder(rc.study.nxy, rc.study.nz)
    f0 = test_field(mesh, rc.params.eps_z, rc.params.nu, delta)
    f, rep = alternate_minimize(rc.params, rc.law, f0, rc.solver)
    out = rc.output_dir
    slice_profiles_csv(f, out / "solve3d_slices.csv", rc.header)
    _trace_csv(out / "solve3d_trace.csv", rep, rc.header)
    write_json(out / "solve3d_report.json", {"config_hash": rc.config_hash, "delta": delta,
                                             "report": rep.as_dict()})
    print(json.dumps({"delta": fmt(delta), "energy": fmt(rep.energy.total),
                      "iterations": rep.iterations, "converged": rep.converged}))
    _check_converged(rep, "3D alternate minimisation")
    return rep.as_dict()


def cmd_recovery(rc: RunConfig, args) -> dict:
    m1 = build_interval(rc.study.nz1d)
    if rc.recovery["profile"] == "kinked":
        g = kinked_profile(m1, rc.params.eps_z, rc.recovery["kink"], rc.recovery["ratio"])
    else:
        g0 = initial_1d(rc.params, rc.study.nz1d, rc.study.bump_amplitude, rc.study.bump_width)
        g, rep = alternate_minimize(rc.params, rc.law, g0, rc.solver)
        _check_converged(rep, "1D alternate minimisation")
    mesh = build_cylinder(rc.study.nxy, rc.study.nz)
    table = limsup_check(rc.params, rc.law, mesh, m1, g, rc.study.deltas, rc.recovery["extension"])
    out = rc.output_dir
    table.write_csv(out / "recovery.csv", rc.header)
    table.write_svg(out / "recovery_gap.svg", rc.header)
    summary = {"config_hash": rc.config_hash, "gap_strictly_decreasing": table.gap_strictly_decreasing(),
               "bound_constant": table.bound_constant()}
    write_json(out / "recovery.json", summary)
    print(json.dumps({k: (fmt(v) if isinstance(v, float) else v) for k, v in summary.items()}))
    return summary


def cmd_gamma_study(rc: RunConfig, args) -> dict:
    res = gamma_sweep(rc.params, rc.law, rc.solver, rc.study)
    res.write(rc.output_dir, rc.header, timings=args.timings)
    print(json.dumps(res.checks, default=fmt))
    return res.checks


def _validate_checks(rc: RunConfig, seed: int) -> dict:
    rng = np.random.default_rng(seed)
    p = rc.params
    ident = verify_uniaxial_identity(p)
    mesh = build_cylinder(max(4, min(rc.study.nxy, 8)), max(2, min(rc.study.nz, 8)))
    m1 = build_interval(max(2, min(rc.study.nz1d, 16)))
    delta = rc.study.deltas[-1]

    def rand3():
        n = mesh.n_nodes
        f = test_field(mesh, p.eps_z, p.nu, delta)
        f.u1 = f.u1 + 0.01 * rng.standard_normal(n)
        f.u2 = f.u2 + 0.01 * rng.standard_normal(n)
        f.alpha = rng.uniform(0.1, 0.9, n)
        return f

    def rand1():
        g = initial_1d(p, m1.nz)
        g.u3bar = g.u3bar + 0.01 * np.concatenate([[0], rng.standard_normal(m1.nz - 1), [0]])
        g.alphabar = rng.uniform(0.1, 0.9, m1.n_nodes)
        return g

    worst = {}
    for name, make, efun, gfun, keys in (
        ("grad3d", rand3, energy_3d, grad_energy_3d, ("u1", "u2", "u3", "alpha")),
        ("grad1d", rand1, energy_1d, grad_energy_1d, ("u3bar", "alphabar")),
    ):
        errs = []
        for _ in range(3):
            f = make()
            g = gfun(p, rc.law, f, mask_dirichlet=False)
            dirs = {k: rng.standard_normal(getattr(f, k).shape) for k in keys}
            exact = sum(float(g[k] @ dirs[k]) for k in keys)
            h = 1e-6
            fp, fm = f.copy(), f.copy()
            for k in keys:
                setattr(fp, k, getattr(f, k) + h * dirs[k])
                setattr(fm, k, getattr(f, k) - h * dirs[k])
            fd = (efun(p, rc.law, fp).total - efun(p, rc.law, fm).total) / (2 * h)
            errs.append(abs(fd - exact) / max(abs(exact), 1e-12))
        worst[name] = max(errs)
    te = energy_3d(p, rc.law, test_field(mesh, p.eps_z, p.nu, delta)).total
    target = 0.5 * p.E * p.eps_z**2
    return {"identity_residual": ident,
            "test_field_rel_error": abs(te - target) / target if target > 0 else abs(te),
            "grad3d_rel_error": worst["grad3d"], "grad1d_rel_error": worst["grad1d"],
            "E": p.E, "nu": p.nu, "at1_threshold": at1_threshold_strain(p)}


def cmd_validate(rc: RunConfig, args) -> dict:
    res = _validate_checks(rc, rc.solver.seed)
    ok = (res["identity_residual"] <= 1e-14 and res["test_field_rel_error"] <= 1e-12
          and res["grad3d_rel_error"] <= 1e-6 and res["grad1d_rel_error"] <= 1e-6)
    res["passed"] = ok
    print(json.dumps({k: (fmt(v) if isinstance(v, float) else v) for k, v in res.items()}))
    if args.out:
        write_json(rc.output_dir / "validate.json", {"config_hash": rc.config_hash, **res})
    if not ok:
        raise SolverFailure("validation checks failed")
    return res


COMMANDS = {"solve1d": cmd_solve1d, "solve3d": cmd_solve3d, "recovery": cmd_recovery,
            "gamma-study": cmd_gamma_study, "validate": cmd_validate}


HELP = {"solve1d": "minimise the 1D limit energy",
        "solve3d": "minimise the rescaled 3D energy at one aspect ratio",
        "recovery": "build recovery fields for a 1D profile and tabulate the energy gap",
        "gamma-study": "sweep the aspect ratio and compare 3D and 1D minimisers",
        "validate": "identity, test-field and gradient checks"}


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="slenderdamage",
                                 description="Gradient-damage rods: 3D/1D minimisation and delta sweeps.")
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", default=str(DEFAULT_CONFIG), help="INI config file (default: shipped config)")
    common.add_argument("--out", default=None, help="output directory (overrides study.output_dir)")
    common.add_argument("--threads", type=int, default=1, help="worker cap for delta sweeps")
    common.add_argument("--seed", type=int, default=None, help="overrides solver.seed")
    common.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        sp = sub.add_parser(name, parents=[common], help=HELP[name])
        if name == "solve3d":
            sp.add_argument("--delta", type=float, default=None,
                            help="aspect ratio (default: last entry of study.deltas)")
        if name == "gamma-study":
            sp.add_argument("--timings", action="store_true",
                            help="include wall-clock times in study.json (breaks bit-identity)")
    return ap


def _fail(code: int, kind: str, message: str, violations=None) -> int:
    err = {"error": kind, "message": message, "exit_code": code}
    if violations:
        err["violations"] = violations
    print(json.dumps(err), file=sys.stderr)
    return code


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    if args.threads < 1:
        return _fail(EXIT_CONFIG, "config", "--threads must be >= 1", ["--threads"])
    try:
        rc = load_config(args.config, seed=args.seed, threads=args.threads, out=args.out)
    except ConfigError as exc:
        return _fail(EXIT_CONFIG, "config", str(exc), exc.violations)
    except OSError as exc:
        return _fail(EXIT_IO, "io", f"cannot read config: {exc}")
    delta = getattr(args, "delta", None)
    if delta is not None and not 0 < delta <= 1:
        return _fail(EXIT_CONFIG, "config", f"--delta must lie in (0, 1] (got {delta})", ["--delta"])
    try:
        if args.command != "validate" or args.out:
            rc.output_dir.mkdir(parents=True, exist_ok=True)
        COMMANDS[args.command](rc, args)
    except ConfigError as exc:
        return _fail(EXIT_CONFIG, "config", str(exc), exc.violations)
    except (ParameterError, MeshError) as exc:
        return _fail(EXIT_CONFIG, "config", str(exc))
    except SolverFailure as exc:
        return _fail(EXIT_SOLVER, "solver", str(exc))
    except OSError as exc:
        return _fail(EXIT_IO, "io", str(exc))
    return EXIT_OK


def main_entry() -> None:
    sys.exit(main())


if __name__ == "__main__":
    main_entry()
