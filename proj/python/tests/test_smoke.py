import numpy as np
import pytest

import sdfgen


def analytic_sphere(n, r):
    t = np.linspace(-0.5, 0.5, n)
    z, y, x = np.meshgrid(t, t, t, indexing="ij")
    return r - np.sqrt(x * x + y * y + z * z)


def test_icosphere_distance_matches_sphere():
    v, f = sdfgen.make_icosphere(0.4, 3)
    grid = sdfgen.mesh_to_sdf(v, f, 24)
    assert grid.shape == (24, 24, 24)
    assert np.abs(grid - analytic_sphere(24, 0.4)).max() < 0.01
    assert sdfgen.winding_number(v, f, (0, 0, 0)) == pytest.approx(1.0)


def test_bands_are_complementary():
    grid = analytic_sphere(16, 0.3)
    low, high = sdfgen.split_bands(grid, 2)
    np.testing.assert_allclose(low + high, grid, atol=1e-12)
    np.testing.assert_allclose(sdfgen.low_pass(low, 2), low, atol=1e-12)


def test_surface_of_sphere():
    v, f = sdfgen.marching_cubes(analytic_sphere(32, 0.4))
    stats = sdfgen.mesh_stats(v, f)
    assert stats["closed_manifold"]
    assert stats["euler"] == 2
    assert stats["area"] == pytest.approx(4 * np.pi * 0.16, rel=0.02)


def test_sdf_file_round_trip(tmp_path):
    grid = analytic_sphere(10, 0.3)
    sdfgen.write_sdf(tmp_path / "s.sdf", grid)
    np.testing.assert_allclose(sdfgen.read_sdf(tmp_path / "s.sdf"), grid, atol=1e-7)
    with pytest.raises(sdfgen.SdfgenError):
        sdfgen.read_sdf(tmp_path / "missing.sdf")


def test_bad_inputs_raise():
    with pytest.raises(ValueError):
        sdfgen.split_bands(np.zeros((4, 4, 5)), 1)
    with pytest.raises(IndexError):
        sdfgen.mesh_to_sdf(np.zeros((3, 3)), np.array([[0, 1, 5]]), 8)


def test_train_and_generate(tmp_path):
    assert sdfgen.synth_dataset(tmp_path / "data", count=4, seed=1) == 4
    sdfgen.train_lfg(tmp_path / "data", tmp_path / "lfg.ckpt", steps=3, batch=2)
    sdfgen.train_hfg(tmp_path / "data", tmp_path / "hfg.ckpt", steps=3, batch=2)
    gen = sdfgen.ShapeGenerator(tmp_path / "lfg.ckpt", tmp_path / "hfg.ckpt")
    assert gen.resolution == 16
    out = gen.generate(5, symmetry="x")
    np.testing.assert_array_equal(out["composed"], out["composed"][:, :, ::-1])
    np.testing.assert_allclose(out["field"], gen.tau * out["composed"])
    again = gen.generate(5, symmetry="x")
    np.testing.assert_array_equal(out["field"], again["field"])
    frames = gen.interpolate(1, 2, steps=3)
    assert len(frames) == 3
