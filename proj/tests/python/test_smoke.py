"""End-to-end smoke tests for the Python bindings.

Small meshes only: the point is that every exposed operation runs and its
basic contracts hold, not numerical accuracy (the C++ suite covers that).
"""

import math

import numpy as np
import pytest

import peelfield as pf


@pytest.fixture(scope="module")
def sphere():
    return pf.generate_sphere_mesh([87.0, 92.0, 100.0], [1.0, 0.0125, 1.0], 16.0)


@pytest.fixture(scope="module")
def forward(sphere):
    peeled = pf.peel(sphere, 0.0, {1})
    sources = pf.place_sources(sphere, peeled, 25)
    sensors = pf.fibonacci_montage(100.0, 16)
    L = pf.compute_leadfield(sphere, sensors, peeled, sources)
    return peeled, sources, sensors, L


def test_version():
    assert pf.__version__ == "0.1.0"


def test_mesh_basics(sphere):
    assert sphere.node_count > 0
    assert sphere.tet_count > 0
    assert sphere.nodes.shape == (sphere.node_count, 3)
    assert sphere.tetra.shape == (sphere.tet_count, 4)
    assert set(sphere.labels) == {1, 2, 3}
    assert sphere.conductivities == {1: 1.0, 2: 0.0125, 3: 1.0}
    # everything inside the outer radius, nothing escapes
    assert np.linalg.norm(sphere.nodes, axis=1).max() <= 100.0 + 1e-9
    ball = 4.0 / 3.0 * math.pi * 100.0**3
    assert abs(sphere.total_volume() / ball - 1.0) < 0.15  # coarse staircase


def test_mesh_roundtrip(tmp_path, sphere):
    path = str(tmp_path / "mesh.tetmesh")
    pf.save_mesh(sphere, path)
    again = pf.load_mesh(path)
    assert again.node_count == sphere.node_count
    assert again.tet_count == sphere.tet_count
    np.testing.assert_array_equal(again.tetra, sphere.tetra)


def test_mesh_constructor_validates():
    nodes = np.zeros((4, 3))
    nodes[1, 0] = nodes[2, 1] = nodes[3, 2] = 1.0
    mesh = pf.Mesh(nodes, np.array([[0, 1, 2, 3]]), [1], {1: 0.33})
    assert mesh.tet_count == 1
    with pytest.raises(pf.ConfigError):
        pf.Mesh(nodes, np.array([[0, 1, 2, 2]]), [1], {1: 0.33})


def test_generate_rejects_bad_shells():
    with pytest.raises(pf.ConfigError):
        pf.generate_sphere_mesh([92.0, 87.0, 100.0], [1.0, 1.0, 1.0], 16.0)


def test_refine_grows_selected_compartment(sphere):
    refined = pf.refine_compartments(sphere, {2})
    n_before = sum(1 for lab in sphere.labels if lab == 2)
    n_after = sum(1 for lab in refined.labels if lab == 2)
    assert n_after > n_before
    assert refined.tet_count > sphere.tet_count


def test_peel_partitions_active_set(sphere):
    peeled = pf.peel(sphere, 0.0, {1})
    active = [t for t in range(sphere.tet_count) if sphere.labels[t] == 1]
    assert sorted(peeled.kept_tetra + peeled.removed_tetra) == active
    assert not set(peeled.kept_tetra) & set(peeled.removed_tetra)
    deeper = pf.peel(sphere, 8.0, {1})
    assert set(deeper.kept_tetra) <= set(peeled.kept_tetra)
    assert pf.effective_depth(sphere, deeper) >= 8.0


def test_sources_live_in_kept_elements(sphere, forward):
    peeled, sources, _, _ = forward
    assert sources.count > 0
    assert sources.positions.shape == (sources.count, 3)
    kept = set(peeled.kept_tetra)
    assert all(host in kept for host in sources.host_tetra)


def test_leadfield_shape_and_gauge(forward):
    _, sources, sensors, L = forward
    assert L.shape == (len(sensors), 3 * sources.count)
    # columns are mean-free over sensors by construction
    assert np.abs(L.mean(axis=0)).max() < 1e-9 * np.abs(L).max()


def test_leadfield_roundtrip(tmp_path, forward):
    _, _, _, L = forward
    path = str(tmp_path / "leadfield.dmat")
    pf.save_leadfield(path, L)
    np.testing.assert_array_equal(pf.load_leadfield(path), L)


def test_rdm_mag_zero_on_identical(forward):
    _, _, _, L = forward
    rdm, mag = pf.rdm_mag(L, L)
    assert max(rdm) == 0.0
    assert max(mag) == 0.0


def test_analytic_leadfield_matches_potential():
    radii = [87.0, 92.0, 100.0]
    sigma = [1.0, 0.0125, 1.0]
    sensors = pf.fibonacci_montage(100.0, 12)
    source = np.array([[0.0, 0.0, 40.0]])
    L = pf.analytic_leadfield(radii, sigma, sensors, source)
    assert L.shape == (12, 3)
    direct = np.array(
        [pf.analytic_potential(radii, sigma, source[0], [0, 0, 1], s) for s in sensors]
    )
    np.testing.assert_allclose(L[:, 2], direct - direct.mean(), atol=1e-12)


def test_noiseless_scan_recovers_source(forward):
    _, sources, _, L = forward
    rng = np.random.default_rng(7)
    for idx in rng.choice(sources.count, size=5, replace=False):
        moment = rng.standard_normal(3)
        measurement = L[:, 3 * idx : 3 * idx + 3] @ moment
        recon = pf.dipole_scan(L, measurement)
        assert recon["argmax"] == idx
        assert recon["scores"][idx] > 1.0 - 1e-9
        found = pf.sloreta(L, measurement, 100.0)
        assert found["moments"].shape == (sources.count, 3)
        assert np.linalg.norm(
            sources.positions[found["argmax"]] - sources.positions[idx]
        ) <= 20.0  # coarse grid: sLORETA may land on a touching neighbour


def test_run_study_writes_outputs(tmp_path):
    config = tmp_path / "study.cfg"
    config.write_text(
        "config_version: 1\n"
        "shell_radii_mm: 87,92,100\n"
        "shell_conductivities: 1.0,0.0125,1.0\n"
        "mesh_edge_mm: 16\n"
        "sensor_count: 16\n"
        "active_compartments: 1\n"
        "peel_depths_mm: 0\n"
        "source_count: 25\n"
        "trials: 2\n"
        "snr_db: 20\n"
        "methods: dipole_scan\n"
        "seed: 3\n"
    )
    out = tmp_path / "out"
    report = pf.run_study(str(config), str(out))
    assert report["node_count"] > 0
    assert len(report["summary"]) == 1
    row = report["summary"][0]
    assert row["method"] == "dipole_scan"
    assert row["count"] == 2 * report["source_counts_per_depth"][0]
    assert row["mean_mm"] >= 0.0
    for name in ("localisation.csv", "summary.csv", "dispersion.csv", "manifest.json"):
        assert (out / name).is_file()
