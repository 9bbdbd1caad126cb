import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from slenderdamage.energy import energy_3d
from slenderdamage.fields import linear_1d, strain
from slenderdamage.fields import test_field as uniaxial_field
from slenderdamage.material import ConstitutiveLaw, MaterialParams
from slenderdamage.mesh import build_cylinder, build_interval
from slenderdamage.recovery import (Mollifier, build_recovery, k_of_delta, kinked_profile, limsup_check,
                                    mollify_strain, resample_1d)


@pytest.fixture(scope="module")
def kink_setup(derived):
    rp = derived["recovery"]["params"]
    p = MaterialParams(lam=rp["lam"], mu=rp["mu"], eta=0.1, w1=1.0, ell=0.2, eps_z=rp["eps_z"])
    m1 = build_interval(rp["nz"])
    return p, m1, kinked_profile(m1, rp["eps_z"], rp["kink"], rp["ratio"])


@pytest.mark.parametrize("s", [1.0, 0.5, 0.125, 0.01])
def test_mollifier_unit_mass_and_support(s):
    M = Mollifier(s)
    assert abs(M.total_mass() - 1.0) <= 1e-10
    z = np.linspace(-2 * s, 2 * s, 2001)
    rho = M.density(z)
    assert np.all(rho >= 0)
    assert np.all(rho[np.abs(z) >= s] == 0)
    assert M.cdf(-s) == 0.0 and M.cdf(s) == pytest.approx(1.0, abs=1e-15)


def test_mollifier_cdf_matches_density():
    M = Mollifier(0.7)
    z = np.linspace(-0.69, 0.69, 101)
    h = 1e-6
    assert np.allclose((M.cdf(z + h) - M.cdf(z - h)) / (2 * h), M.density(z), atol=1e-7)


def test_normalisation_matches_oracle(derived):
    assert Mollifier().normalisation == pytest.approx(derived["recovery"]["bump_normalisation"], rel=1e-13)


def test_rejects_bad_width_and_k():
    with pytest.raises(ValueError):
        Mollifier(0.0)
    g = linear_1d(build_interval(4), 0.1)
    for k in (0, 2.5, -1):
        with pytest.raises(ValueError):
            mollify_strain(g, k)
    with pytest.raises(ValueError):
        mollify_strain(g, 2, extension="periodic")


def test_k_of_delta():
    assert k_of_delta(0.01) == 10
    assert k_of_delta(0.04) == 5
    assert k_of_delta(1 / 9) == 3
    assert k_of_delta(0.4) == 1
    assert k_of_delta(1.0) == 1
    assert k_of_delta(2.0) == 1
    with pytest.raises(ValueError):
        k_of_delta(0.0)


@settings(max_examples=50, deadline=None)
@given(d=st.floats(1e-6, 1.0))
def test_k_of_delta_is_floor(d):
    k = k_of_delta(d)
    assert k * k * d <= 1.0 + 1e-12 and (k == 1 or (k + 1) ** 2 * d > 1.0)


def test_affine_profile_constant_away_from_layer():
    g = linear_1d(build_interval(64), 0.2)
    v = mollify_strain(g, 64)
    z = np.linspace(0.2, 0.8, 31)
    assert np.allclose(v(z), -0.2, atol=1e-14)
    # zero extension halves the strain at the ends
    assert v(np.array([0.0]))[0] == pytest.approx(-0.1, abs=1e-14)


def test_edge_extension_reproduces_constant_slope():
    g = linear_1d(build_interval(16), 0.2)
    v = mollify_strain(g, 1, extension="edge")
    assert np.allclose(v(np.linspace(0, 1, 41)), -0.2, atol=1e-15)


def test_step_mollification_preserves_bounds(kink_setup):
    _, _, g = kink_setup
    v = mollify_strain(g, 9, extension="edge")
    z = np.linspace(0, 1, 501)
    s = g.slope()
    assert v(z).min() >= s.min() - 1e-14 and v(z).max() <= s.max() + 1e-14


def test_strain_error_decreases_like_oracle(kink_setup, derived):
    _, _, g = kink_setup
    ref = derived["recovery"]["strain_l2_error_by_k"]
    errs = [mollify_strain(g, k).l2_error() for k in (4, 16, 64)]
    assert errs[0] > errs[1] > errs[2]
    for k, e in zip((4, 16, 64), errs):
        assert e == pytest.approx(ref[str(k)], rel=1e-8)


def test_derivative_bound_constant_recorded(kink_setup):
    _, _, g = kink_setup
    consts = [mollify_strain(g, k).derivative_constant for k in (1, 4, 16, 64)]
    assert all(np.isfinite(consts)) and max(consts) < 1.0


def test_recovery_field_structure(kink_setup):
    p, _, g = kink_setup
    m = build_cylinder(8, 48)
    delta = 0.1
    f = build_recovery(g, delta, m, p.nu)
    f.check()
    v = mollify_strain(g, k_of_delta(delta))
    e = strain(f)
    vq = np.repeat(v(m.z_levels), m.n_xy)
    # e11 = -nu v_k, e12 = 0 (bilinear interpolation of -nu x v is exact in x)
    assert np.allclose(f.u1, -p.nu * m.nodes[:, 0] * vq)
    assert np.allclose(e.e12, 0.0, atol=1e-15)
    assert np.allclose(e.e11, e.e22)
    # e13 = -delta nu x v_k' / 2 with v_k' the slope of the nodal interpolant
    qp = m.quadrature_points()
    dv = np.diff(v(m.z_levels)) / m.hz
    expect = -0.5 * delta * p.nu * qp[..., 0] * dv[m.cell_level][:, None]
    assert np.allclose(e.e13, expect, atol=1e-15)


def test_recovery_of_affine_state_is_uniaxial(params, law):
    m = build_cylinder(8, 8)
    g = linear_1d(build_interval(8), params.eps_z)
    f = build_recovery(g, 0.05, m, params.nu, extension="edge")
    t = uniaxial_field(m, params.eps_z, params.nu, 0.05)
    assert np.allclose(f.u1, t.u1, atol=1e-15) and np.allclose(f.u3, t.u3)
    assert energy_3d(params, law, f).total == pytest.approx(0.5 * params.E * params.eps_z**2, rel=1e-13)


def test_recovery_preserves_boundary_values(kink_setup):
    p, _, g = kink_setup
    m = build_cylinder(6, 12)
    f = build_recovery(g, 0.3, m, p.nu)
    assert np.all(f.u3[m.bottom_nodes] == 0.0)
    assert np.allclose(f.u3[m.top_nodes], -p.eps_z)


def test_resample_between_meshes(kink_setup):
    _, _, g = kink_setup
    h = resample_1d(g, 96)
    assert h.mesh.nz == 96
    assert np.allclose(h.u3bar[::2], g.u3bar)


def test_limsup_gaps_match_oracle(kink_setup, derived):
    p, m1, g = kink_setup
    law = ConstitutiveLaw.from_params(p)
    m3 = build_cylinder(12, 48)
    ref = derived["recovery"]["sweep"]
    deltas = [r["delta"] for r in ref]
    table = limsup_check(p, law, m3, m1, g, deltas)
    assert table.gap_strictly_decreasing()
    for row, r in zip(table.rows, ref):
        assert row.k == r["k"]
        assert row.E1d == pytest.approx(r["E1d"], rel=1e-13)
        assert row.bound == pytest.approx(r["bound"], rel=1e-8)
        assert row.strain_l2_error == pytest.approx(r["strain_l2_error"], rel=1e-8)
        # z-interpolation of v_k and the voxel section are the only differences
        assert row.gap == pytest.approx(r["gap_continuum_z"], rel=5e-3)


def test_limsup_rejects_unsorted(kink_setup):
    p, m1, g = kink_setup
    law = ConstitutiveLaw.from_params(p)
    with pytest.raises(ValueError):
        limsup_check(p, law, build_cylinder(4, 48), m1, g, [0.1, 0.2])
    with pytest.raises(ValueError):
        limsup_check(p, law, build_cylinder(4, 48), build_interval(8), g, [0.2, 0.1])


def test_limsup_outputs(tmp_path, kink_setup):
    p, m1, g = kink_setup
    law = ConstitutiveLaw.from_params(p)
    table = limsup_check(p, law, build_cylinder(4, 48), m1, g, [0.4, 0.1])
    table.write_csv(tmp_path / "r.csv", "config_hash=abc")
    table.write_svg(tmp_path / "r.svg", "config_hash=abc")
    lines = (tmp_path / "r.csv").read_text().splitlines()
    assert lines[0] == "# config_hash=abc" and lines[1].startswith("delta,k,E3d")
    assert len(lines) == 4
    assert "config_hash=abc" in (tmp_path / "r.svg").read_text()
