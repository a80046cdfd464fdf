import json
import math
import subprocess

import numpy as np
import pytest

import evolvefem as ef


def test_sphere_mesh_and_matrices():
    m = ef.sphere_mesh(2)
    assert m.degree == 2
    assert m.positions.shape == (m.num_nodes, 3)
    assert m.connectivity.shape == (m.num_elements, 6)

    mass, stiff = ef.mass_stiffness(m, m.positions)
    n = m.num_nodes
    assert mass["shape"] == (n, n)
    ones = np.ones(n)

    def apply(csr, x):
        y = np.zeros(n)
        ptr, idx, val = csr["indptr"], csr["indices"], csr["data"]
        for i in range(n):
            y[i] = val[ptr[i]:ptr[i + 1]] @ x[idx[ptr[i]:ptr[i + 1]]]
        return y

    assert abs(ones @ apply(mass, ones) - 4 * math.pi) < 5e-3
    assert np.abs(apply(stiff, ones)).max() < 1e-12
    assert ef.surface_area(m, 2.0 * m.positions) == pytest.approx(4 * ones @ apply(mass, ones))


def test_coefficients():
    delta, gamma = ef.bdf_coefficients(2)
    assert delta == [1.5, -2.0, 0.5]
    assert gamma == [2.0, -1.0]
    assert ef.zero_stable(6) and not ef.zero_stable(7)
    assert ef.nevanlinna_odeh_eta(5) == pytest.approx(0.8160, abs=5e-5)
    assert ef.nevanlinna_odeh_eta(6) is None
    assert ef.multiplier_check(5, 0.816) and not ef.multiplier_check(5, 0.0)
    assert "not zero-stable" in ef.coefficients_table(7)


def test_logistic_radius():
    r, rdot = ef.logistic_radius(1.0)
    assert rdot == pytest.approx((1 - r / 2) * r)
    with pytest.raises(ef.InputError):
        ef.logistic_radius(-1.0)


def test_manufactured_run_converges_in_tau(tmp_path):
    errs = []
    for tau in (0.1, 0.05):
        out = ef.run(law="regularized", order=2, levels=[3], tau=tau, end_time=1.0,
                     write_vtk=False, output_dir=str(tmp_path))
        errs.append(out["runs"][0]["position_error"][1])
    assert math.log2(errs[0] / errs[1]) > 1.5
    summary = json.loads((tmp_path / "summary.json").read_text())
    assert summary["runs"][0]["steps"] == 20


def test_config_errors():
    with pytest.raises(ef.ConfigError):
        ef.run(law="dynamic", order=6, write_vtk=False)
    with pytest.raises(ef.ConfigError):
        ef.run(alpha=0.0, write_vtk=False)
    with pytest.raises(ef.ConfigError):
        ef.run(not_a_key=1)


def test_vtk_roundtrip_with_meshio(tmp_path):
    meshio = pytest.importorskip("meshio")
    m = ef.sphere_mesh(1)
    u = m.positions[:, 2].copy()
    path = tmp_path / "s.vtk"
    ef.write_vtk(str(path), m, m.positions, velocity=0.5 * m.positions, u=u, time=0.25)
    data = meshio.read(path)
    assert data.cells[0].type == "triangle6"
    np.testing.assert_allclose(data.points, m.positions, atol=1e-15)
    np.testing.assert_array_equal(data.cells[0].data, m.connectivity)
    np.testing.assert_allclose(data.point_data["velocity"], 0.5 * m.positions)
    np.testing.assert_allclose(data.point_data["u"].ravel(), u)


def test_mcf_demo_shrinks(tmp_path):
    meshio = pytest.importorskip("meshio")
    out = ef.mcf_demo(levels=[2], end_time=0.1, output_dir=str(tmp_path))
    runs = out["runs"]
    assert [r["name"] for r in runs] == ["alpha_0.1", "alpha_0.01", "alpha_0.001", "alpha_0"]
    for r in runs:
        a = r["areas"]
        assert all(b < c for b, c in zip(a[1:], a[:-1]))
        assert meshio.read(r["files"][-1]).points.shape[1] == 3


def test_coupled_run_carries_u(tmp_path):
    meshio = pytest.importorskip("meshio")
    out = ef.run(law="coupled", levels=[1], tau=0.1, end_time=0.2, output_dir=str(tmp_path))
    data = meshio.read(out["runs"][0]["files"][-1])
    assert "u" in data.point_data


def test_weak_residual_decays():
    r2 = ef.weak_residual("dynamic", 2, 1.0)
    r3 = ef.weak_residual("dynamic", 3, 1.0)
    assert r2 / r3 > 4.0
