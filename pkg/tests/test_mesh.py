import json

import numpy as np
import pytest

from slenderdamage.mesh import MeshError, build_cylinder, build_interval


def test_measure_matches_direct_column_count(derived):
    ref = derived["mesh"]["nxy64_nz32"]
    m = build_cylinder(64, 32)
    assert m.columns.shape[0] == ref["n_columns"]
    assert m.measure == pytest.approx(ref["measure"], rel=1e-15)
    assert m.n_cells == 32 * ref["n_columns"]


def test_measure_converges_to_pi():
    errs = [abs(build_cylinder(n, 2).section_area - np.pi) for n in (16, 64, 256)]
    assert errs[-1] < errs[0]
    assert errs[-1] < 0.02


def test_node_numbering_and_tags():
    m = build_cylinder(8, 6)
    X = m.nodes
    assert X.shape == (m.n_xy * 7, 3)
    assert np.all(X[m.bottom_nodes, 2] == 0.0)
    assert np.all(X[m.top_nodes, 2] == 1.0)
    # each cell spans one slab in z with vertices in the a = ix + 2 iy + 4 iz order
    c = X[m.cells[0]]
    assert np.allclose(c[1] - c[0], [m.hx, 0, 0])
    assert np.allclose(c[2] - c[0], [0, m.hy, 0])
    assert np.allclose(c[4] - c[0], [0, 0, m.hz])


def test_columns_centres_inside_disk():
    m = build_cylinder(10, 3)
    assert np.all(np.sum(m.column_centers**2, axis=1) < 1.0)


def test_xy_weights_sum_to_section_area():
    m = build_cylinder(12, 4)
    assert m.xy_weights.sum() == pytest.approx(m.section_area, rel=1e-14)


def test_reference_partition_of_unity():
    m = build_cylinder(6, 3)
    N, dx, dy, dz, wq, _ = m.reference()
    assert np.allclose(N.sum(axis=1), 1.0)
    for d in (dx, dy, dz):
        assert np.allclose(d.sum(axis=1), 0.0)
    assert wq.sum() == pytest.approx(m.cell_volume)


def test_quadrature_integrates_x_squared_exactly():
    m = build_cylinder(8, 2)
    _, _, _, _, wq, _ = m.reference()
    qp = m.quadrature_points()
    num = float((qp[..., 0] ** 2 * wq).sum())
    h = m.hx
    exact = sum(h * h * (cx * cx + h * h / 12) for cx, _ in m.column_centers) * 1.0
    assert num == pytest.approx(exact, rel=1e-13)


@pytest.mark.parametrize("nxy,nz", [(3, 4), (8, 1), (4.5, 3)])
def test_rejects_degenerate_sizes(nxy, nz):
    with pytest.raises(MeshError):
        build_cylinder(nxy, nz)


def test_interval_mesh():
    m = build_interval(8)
    assert m.n_nodes == 9
    assert m.lumped_mass.sum() == pytest.approx(1.0)
    N, dN, wq = m.reference()
    assert wq.sum() == pytest.approx(m.h)
    with pytest.raises(MeshError):
        build_interval(1)


def test_mesh_json(tmp_path):
    m = build_cylinder(4, 2)
    p = tmp_path / "mesh.json"
    m.to_json(p)
    data = json.loads(p.read_text())
    assert len(data["nodes"]) == m.n_nodes
    assert data["tags"]["z0"] == m.bottom_nodes.tolist()
