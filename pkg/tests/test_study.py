import json

import numpy as np
import pytest

from slenderdamage.fields import embed_uniaxial, linear_1d
from slenderdamage.fields import test_field as uniaxial_field
from slenderdamage.material import ConstitutiveLaw, MaterialParams, at1_threshold_strain
from slenderdamage.mesh import build_cylinder, build_interval
from slenderdamage.solver import SolverConfig
from slenderdamage.study import (StudyConfig, gamma_sweep, homogeneous_oracle, initial_1d,
                                 prop1_remainders, summarize)


@pytest.fixture
def hom(derived):
    hp = derived["homogeneous"]["params"]
    p = MaterialParams(lam=hp["lam"], mu=hp["mu"], eta=hp["eta"], w1=hp["w1"], ell=0.1)
    return p, hp


def test_oracle_zero_strain(hom):
    p, _ = hom
    for kind in ("at1", "at2"):
        r = homogeneous_oracle(p, ConstitutiveLaw.from_params(p, damage_energy=kind), 0.0, 1000)
        assert (r.alpha_star, r.e_star) == (0.0, 0.0)


def test_oracle_example_frozen(hom, derived):
    p, hp = hom
    assert p.E == pytest.approx(hp["E"])
    ref = derived["homogeneous"]["example_eps1"]
    r = homogeneous_oracle(p, ConstitutiveLaw.from_params(p), 1.0, 1000)
    assert r.alpha_star == ref["scan1000_alpha"]
    assert r.e_star == pytest.approx(ref["scan1000_energy"], rel=1e-14)
    fine = homogeneous_oracle(p, ConstitutiveLaw.from_params(p), 1.0, 100_000)
    assert abs(fine.alpha_star - ref["closed_form_alpha"]) <= 5e-6
    assert fine.e_star == pytest.approx(ref["closed_form_energy"], abs=1e-10)


def test_oracle_at1_threshold(hom, derived):
    p, _ = hom
    law = ConstitutiveLaw.from_params(p, damage_energy="at1")
    eps_c = derived["homogeneous"]["at1_threshold"]["eps_c"]
    assert at1_threshold_strain(p) == pytest.approx(eps_c, rel=1e-15)
    assert homogeneous_oracle(p, law, 0.999 * eps_c).alpha_star == 0.0
    assert homogeneous_oracle(p, law, 1.001 * eps_c).alpha_star > 0.0


def test_oracle_rejects_coarse_grid(hom):
    p, _ = hom
    with pytest.raises(ValueError):
        homogeneous_oracle(p, ConstitutiveLaw.from_params(p), 1.0, 999)


def test_prop1_uniaxial_fields_vanish(params, law):
    m = build_cylinder(8, 8)
    f = uniaxial_field(m, params.eps_z, params.nu, 0.2)
    r = prop1_remainders(params, law, f)
    assert max(r.as_dict().values()) <= 1e-28
    g = linear_1d(build_interval(8), params.eps_z)
    g.alphabar = np.linspace(0, 0.5, 9)
    f2 = embed_uniaxial(g, m, 0.2, params.nu)
    r2 = prop1_remainders(params, law, f2, g)
    assert max(r2.as_dict().values()) <= 1e-12


def test_prop1_poisson_closed_form(params, law):
    m = build_cylinder(10, 4)
    f = uniaxial_field(m, params.eps_z, params.nu, 0.3)
    f.u1[:] = 0.0
    f.u2[:] = 0.0
    r = prop1_remainders(params, law, f)
    expect = 2 * (params.lam + params.mu) * params.nu**2 * params.eps_z**2
    assert r.poisson == pytest.approx(expect, rel=1e-13)
    assert r.deviatoric == pytest.approx(0.0, abs=1e-30)
    assert r.variance == pytest.approx(0.0, abs=1e-30)


def test_prop1_nonnegative_random(params, law):
    rng = np.random.default_rng(5)
    m = build_cylinder(6, 4)
    f = uniaxial_field(m, params.eps_z, params.nu, 0.3)
    for k in ("u1", "u2", "u3"):
        setattr(f, k, rng.standard_normal(m.n_nodes))
    f.alpha = rng.uniform(0, 1, m.n_nodes)
    assert min(prop1_remainders(params, law, f).as_dict().values()) >= 0


def test_study_config_validation():
    errs = StudyConfig(deltas=(0.1, 0.2), init="hot", threads=0).violations()
    assert any("study.deltas" in e for e in errs)
    assert any("study.init" in e for e in errs)
    assert any("threads" in e for e in errs)


def test_sweep_rejects_unsorted(params, law):
    with pytest.raises(ValueError, match="study.deltas"):
        gamma_sweep(params, law, SolverConfig(), StudyConfig(deltas=(0.1, 0.4)))


def test_subthreshold_sweep_is_elastic(params, tmp_path):
    law = ConstitutiveLaw.from_params(params, damage_energy="at1")
    p = params.replace(eps_z=0.5 * at1_threshold_strain(params))
    res = gamma_sweep(p, law, SolverConfig(), StudyConfig(deltas=(0.4, 0.2, 0.1), nxy=8, nz=8, nz1d=8))
    for r in res.records:
        assert r.converged
        assert abs(r.gap) <= 1e-12
        assert r.diag.shear <= 1e-20
    for f in res.fields3d:
        assert np.max(f.alpha) == 0.0
    assert res.records[0].E1d_min == pytest.approx(0.5 * p.E * p.eps_z**2, rel=1e-13)
    paths = res.write(tmp_path, "config_hash=x")
    for path in paths:
        assert path.exists()
    data = json.loads((tmp_path / "study.json").read_text())
    assert data["comment"] == "config_hash=x"
    assert "wallclock" not in data["records"][0]


def test_cold_start_and_threads_agree(params):
    p = params.replace(eps_z=4.0 / 3.0, ell=0.2)
    law = ConstitutiveLaw.from_params(p)
    base = dict(deltas=(0.5, 0.3), nxy=6, nz=8, nz1d=8, bump_amplitude=0.5)
    a = gamma_sweep(p, law, SolverConfig(), StudyConfig(**base))
    b = gamma_sweep(p, law, SolverConfig(), StudyConfig(threads=2, **base))
    for ra, rb in zip(a.records, b.records):
        assert ra.E3d_min == pytest.approx(rb.E3d_min, rel=1e-12)
    c = gamma_sweep(p, law, SolverConfig(), StudyConfig(init="cold", **base))
    assert all(r.E3d_min >= 0 for r in c.records)


def test_initial_1d_bump(params):
    g = initial_1d(params, 10, 0.5, 0.1)
    assert g.alphabar[5] == pytest.approx(0.5)
    g.check()


def test_summarize_slack_and_exclusion(params, law):
    from slenderdamage.fields import DiagnosticsRecord
    from slenderdamage.study import Prop1Remainders, StudyRecord

    def rec(d, gap, conv=True):
        diag = DiagnosticsRecord(*(gap for _ in range(7)))
        return StudyRecord(delta=d, E3d_min=1.0, E1d_min=1.0, gap=gap, diag=diag,
                           prop1=Prop1Remainders(0.0, gap, 0.0), u3_slice_residual=0.0,
                           alpha_transverse=0.0, transverse_bound=1.0, iters=1, converged=conv)

    s = summarize([rec(0.4, 1.0), rec(0.2, 1.04), rec(0.1, 0.5)])
    assert s["gap_nonincreasing"] and not s["poisson_decreasing"]
    s = summarize([rec(0.4, 1.0), rec(0.2, 2.0, conv=False), rec(0.1, 0.5)])
    assert s["gap_nonincreasing"] and s["n_converged"] == 2
    assert s["shear_reduction"] == pytest.approx(2.0)
