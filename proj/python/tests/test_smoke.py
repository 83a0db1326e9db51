import json

import numpy as np
import pytest

import dcr_recon as dcr


def small_geometry(views=90, step=4.0, cols=96):
    return dcr.ScanGeometry.from_dict(
        {
            "source_to_detector_mm": 400.0,
            "source_to_isocenter_mm": 200.0,
            "detector_cols": cols,
            "detector_rows": 1,
            "pixel_size_mm": [1.0, 1.0],
            "angles": {"start": 0.0, "step": step, "count": views},
        }
    )


def test_hu_round_trip():
    assert dcr.mu_to_hu(0.02) == pytest.approx(0.0)
    assert dcr.hu_to_mu(1000.0) == pytest.approx(0.04)
    assert dcr.mu_to_hu(dcr.hu_to_mu(-123.0)) == pytest.approx(-123.0)


def test_soft_threshold_cases():
    assert dcr.soft_threshold(0.3, 0.5) == 0.0
    assert dcr.soft_threshold(1.2, 0.5) == pytest.approx(0.7)
    assert dcr.soft_threshold(-1.2, 0.5) == pytest.approx(-0.7)


def test_geometry_dict_round_trip():
    g = small_geometry()
    d = g.to_dict()
    assert d["detector_cols"] == 96
    assert len(d["angles_deg"]) == 90
    assert dcr.ScanGeometry.from_dict(d).to_dict() == d


def test_disk_projection_matches_chord():
    grid = dcr.ImageGrid.centered_2d(64, 1.0)
    img = dcr.phantom({"preset": "water_disk", "radius_mm": 20.0}, grid, supersample=4)
    assert img.shape == (1, 64, 64)
    g = small_geometry(views=4, step=90.0)
    sino = dcr.forward_project(img, grid, g)
    assert sino.shape == (4, 1, 96)
    # Central ray crosses the full diameter.
    center = sino[0, 0, 47:49].mean()
    assert center == pytest.approx(0.02 * 40.0, rel=0.02)


def test_fbp_restores_water_disk():
    grid = dcr.ImageGrid.centered_2d(64, 1.0)
    img = dcr.phantom({"preset": "water_disk", "radius_mm": 20.0}, grid, supersample=4)
    g = small_geometry(views=180, step=2.0)
    rec = dcr.fbp(dcr.forward_project(img, grid, g), g, grid)
    inner = dcr.rmse_hu(rec, img, grid, fov_radius_mm=15.0)
    assert inner < 40.0


def test_truncation_mask_and_wce():
    grid = dcr.ImageGrid.centered_2d(64, 1.0)
    img = dcr.phantom({"preset": "water_disk", "radius_mm": 25.0}, grid)
    g = small_geometry(views=30, step=12.0)
    sino = dcr.forward_project(img, grid, g)
    values, mask = dcr.restrict(sino, g, "truncation", kept_cols=40)
    assert mask.sum() == 30 * 40
    assert np.all(values[mask == 0] == 0.0)
    ext, ext_mask = dcr.wce_extrapolate(values, g, mask)
    assert np.all(ext[mask == 1] == values[mask == 1])
    assert np.count_nonzero(ext_mask == 2) > 0


def test_poisson_noise_is_seeded():
    g = small_geometry(views=2, step=90.0)
    sino = np.full((2, 1, 96), 2.0, dtype=np.float32)
    a = dcr.add_poisson_noise(sino, g, photons_i0=1e5, seed=7)
    b = dcr.add_poisson_noise(sino, g, photons_i0=1e5, seed=7)
    c = dcr.add_poisson_noise(sino, g, photons_i0=1e5, seed=8)
    assert np.array_equal(a, b)
    assert not np.array_equal(a, c)
    assert abs(float(a.mean()) - 2.0) < 0.01


def test_dcr_from_exact_prior_stays_close():
    grid = dcr.ImageGrid.centered_2d(48, 1.0)
    truth = dcr.phantom({"preset": "shepp_logan", "half_extent_mm": 22.0}, grid, supersample=2)
    g = small_geometry(views=60, step=3.0, cols=64)
    sino = dcr.forward_project(truth, grid, g)
    values, mask = dcr.restrict(sino, g, "truncation", kept_cols=32)
    image, trace = dcr.reconstruct_dcr(
        values, g, mask, truth, grid, solver={"n_max": 2, "l_max": 2}, reference=truth, reference_radius_mm=10.0
    )
    assert image.shape == truth.shape
    assert len(trace) == 2
    assert trace[-1]["rmse"] < 15.0
    assert np.all(image >= 0.0)


def test_metrics_identity():
    grid = dcr.ImageGrid.centered_2d(32, 1.0)
    img = dcr.phantom({"preset": "shepp_logan", "half_extent_mm": 15.0}, grid)
    assert dcr.rmse_hu(img, img, grid) == 0.0
    assert dcr.ssim(img, img, grid) == pytest.approx(1.0)


def test_volume_file_round_trip(tmp_path):
    grid = dcr.ImageGrid.centered_2d(16, 2.0)
    img = np.random.default_rng(0).random((1, 16, 16), dtype=np.float32) * 0.03
    path = str(tmp_path / "v.json")
    dcr.save_volume(path, img, grid)
    back, g2 = dcr.load_volume(path)
    assert np.array_equal(back, img)
    assert g2.dims == grid.dims
    header = json.loads((tmp_path / "v.json").read_text())
    assert header["byte_order"] == "little"


def test_validate_config_reports_every_problem(tmp_path):
    diags = dcr.validate_config(
        {"solver": {"lambda": 2.5}, "prior": {"kind": "file", "path": str(tmp_path / "missing.json")}}
    )
    assert any("relaxation" in d for d in diags)
    assert any("missing.json" in d for d in diags)
    assert dcr.validate_config({}) == []


def test_resolved_config_tracks_noise():
    assert dcr.resolve_config({"noise": {"enabled": True}})["solver"]["e1"] == pytest.approx(0.05)
    assert dcr.resolve_config({})["solver"]["e1"] == pytest.approx(0.005)


def test_errors_surface_as_exceptions():
    grid = dcr.ImageGrid.centered_2d(8, 1.0)
    with pytest.raises(dcr.DcrError):
        dcr.rmse_hu(np.zeros((1, 8, 8), np.float32), np.zeros((1, 4, 4), np.float32), grid)
