import os

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from spectrarec.cube import boxcar_response, synthesize_rgb
from spectrarec.dataset import load_dataset, save_dataset
from spectrarec.errors import DatasetError, GenerationError
from spectrarec.metrics import sam
from spectrarec.synth import (
    HEIPOR_GRID,
    MSI_BRAIN_GRID,
    SceneSpec,
    make_dataset,
    make_endmembers,
    render_scene,
    split_sizes,
    wavelength_grid,
)

GRID = (460.0, 720.0, 10.0)
WL = wavelength_grid(*GRID)


def scene(k=3, noise=0.0, seed=0, size=16):
    return SceneSpec(size, size, GRID, make_endmembers(WL, k, seed + 100), noise_sigma=noise, seed=seed)


def test_grid_presets():
    assert len(wavelength_grid(*MSI_BRAIN_GRID)) == 27
    assert len(wavelength_grid(*HEIPOR_GRID)) == 100
    assert wavelength_grid(*HEIPOR_GRID)[-1] == 995.0
    with pytest.raises(GenerationError):
        wavelength_grid(500, 400, 5)


def test_single_endmember_is_normalised():
    (em,) = make_endmembers(WL, 1, 3)
    assert em.spectrum.shape == WL.shape
    assert np.all(em.spectrum >= 0)
    assert np.sum(em.spectrum) == pytest.approx(1.0, abs=1e-12)


def test_endmembers_deterministic():
    a = make_endmembers(WL, 4, 9)
    b = make_endmembers(WL, 4, 9)
    assert all(np.array_equal(x.spectrum, y.spectrum) for x, y in zip(a, b))
    c = make_endmembers(WL, 4, 10)
    assert not np.array_equal(a[0].spectrum, c[0].spectrum)


@settings(max_examples=15, deadline=None)
@given(k=st.integers(2, 6), seed=st.integers(0, 10_000))
def test_endmember_pairwise_separation(k, seed):
    ems = make_endmembers(WL, k, seed)
    for i in range(k):
        for j in range(i + 1, k):
            # arccos oracle, independent of the library formula
            u, v = ems[i].spectrum, ems[j].spectrum
            angle = np.arccos(np.clip(u @ v / np.linalg.norm(u) / np.linalg.norm(v), -1, 1))
            assert angle >= 0.1 - 1e-9
            assert sam(u[None, None], v[None, None]) >= 0.1


def test_endmember_errors():
    with pytest.raises(GenerationError):
        make_endmembers(WL, 0, 0)
    with pytest.raises(GenerationError):
        make_endmembers(WL, 5, 0, min_angle=3.0, max_tries=20)


def test_scene_spec_validation():
    ems = make_endmembers(WL, 2, 0)
    with pytest.raises(GenerationError):
        SceneSpec(8, 8, GRID, ems, blob_count=0)
    with pytest.raises(GenerationError):
        SceneSpec(8, 8, GRID, ems, noise_sigma=-1)
    with pytest.raises(GenerationError):
        SceneSpec(8, 8, (500.0, 600.0, 10.0), ems)


def test_one_endmember_no_noise_is_constant():
    cube, ab = render_scene(scene(k=1))
    em = scene(k=1).endmembers[0].spectrum
    np.testing.assert_array_equal(ab, 1.0)
    assert np.array_equal(cube.data, np.broadcast_to(em, cube.data.shape))


def test_abundance_simplex():
    _, ab = render_scene(scene(k=4, seed=5))
    assert np.all(ab >= 0)
    np.testing.assert_allclose(ab.sum(axis=2), 1.0, atol=1e-9)


def test_clean_pixels_in_convex_hull():
    sc = scene(k=3, seed=2)
    cube, _ = render_scene(sc)
    ems = np.stack([e.spectrum for e in sc.endmembers])
    # least squares for weights with a sum-to-one row appended
    a = np.vstack([ems.T, np.ones(len(ems))])
    px = cube.data.reshape(-1, len(WL))
    for y in px[::7]:
        w, *_ = np.linalg.lstsq(a, np.append(y, 1.0), rcond=None)
        assert np.linalg.norm(a @ w - np.append(y, 1.0)) <= 1e-9
        assert np.all(w >= -1e-9)


def test_noise_level():
    clean, _ = render_scene(scene(k=3, seed=4, size=64))
    noisy, _ = render_scene(scene(k=3, noise=0.01, seed=4, size=64))
    dev = (noisy.data - clean.data).ravel()
    assert dev.size >= 10_000
    assert 0.005 <= dev.std() <= 0.02
    assert np.all(noisy.data >= 0)


def test_split_sizes():
    assert split_sizes(10, (0.6, 0.1, 0.3)) == (6, 1, 3)
    assert split_sizes(20, (0.6, 0.1, 0.3)) == (12, 2, 6)
    with pytest.raises(DatasetError):
        split_sizes(10, (0.5, 0.1, 0.3))
    with pytest.raises(DatasetError):
        split_sizes(10, (0.0, 0.5, 0.5))


def test_dataset_sizes_and_pairing():
    resp = boxcar_response(WL)
    ds = make_dataset(10, scene(seed=1, size=8), resp)
    assert (len(ds.train), len(ds.val), len(ds.test)) == (6, 1, 3)
    seeds = [s.seed for s in ds.train + ds.val + ds.test]
    assert len(set(seeds)) == 10
    for s in ds.train + ds.val + ds.test:
        assert s.cube.data.dtype == np.float32
        assert np.array_equal(synthesize_rgb(s.cube, resp).data, s.rgb.data)


def test_dataset_deterministic():
    resp = boxcar_response(WL)
    a = make_dataset(6, scene(seed=3, size=8), resp)
    b = make_dataset(6, scene(seed=3, size=8), resp)
    for x, y in zip(a.train + a.val + a.test, b.train + b.val + b.test):
        assert x.name == y.name and x.seed == y.seed
        assert np.array_equal(x.cube.data, y.cube.data)
        assert np.array_equal(x.rgb.data, y.rgb.data)


def test_dataset_round_trip(tmp_path):
    resp = boxcar_response(WL)
    ds = make_dataset(5, scene(seed=6, size=8, noise=0.002), resp)
    save_dataset(ds, tmp_path)
    again = load_dataset(tmp_path)
    assert np.array_equal(again.wavelengths, ds.wavelengths.astype(np.float32))
    before = {s.name: s for s in ds.train + ds.val + ds.test}
    for split in ("train", "val", "test"):
        assert sorted(s.name for s in again.split(split)) == sorted(s.name for s in ds.split(split))
    for s in again.train + again.val + again.test:
        ref = before[s.name]
        assert s.seed == ref.seed
        assert np.array_equal(s.cube.data, ref.cube.data)
        assert np.array_equal(s.rgb.data, ref.rgb.data)
        assert np.array_equal(synthesize_rgb(s.cube, resp).data, s.rgb.data)


def test_dataset_manifest_errors(tmp_path):
    with pytest.raises(DatasetError):
        load_dataset(tmp_path)
    (tmp_path / "manifest.csv").write_text("a,b\r\n")
    with pytest.raises(DatasetError):
        load_dataset(tmp_path)


def test_load_subset_of_splits(tmp_path):
    ds = make_dataset(5, scene(seed=8, size=8), boxcar_response(WL))
    save_dataset(ds, tmp_path)
    only = load_dataset(tmp_path, splits=("test",))
    assert not only.train and len(only.test) == len(ds.test)
    assert os.path.exists(tmp_path / "manifest.csv")
