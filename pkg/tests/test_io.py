import numpy as np
import pytest
from hypothesis import given, strategies as st

from deblurnet.data import imageio, manifest
from deblurnet.data.fixtures import toy_pairs, write_frame_fixture


@given(st.floats(0, 1))
def test_srgb_round_trip(x):
    assert imageio.linear_to_srgb(imageio.srgb_to_linear(x)) == pytest.approx(x, abs=1e-6)  # the standard's knee constants differ by ~3e-8


def test_srgb_reference_points():
    assert imageio.srgb_to_linear(0.5) == pytest.approx(0.2140, abs=1e-4)
    assert imageio.srgb_to_linear(1.0) == 1.0 and imageio.srgb_to_linear(0.0) == 0.0


def test_image_file_round_trip(tmp_path, rng):
    img = rng.random((3, 9, 11)).astype(np.float32)
    path = tmp_path / "x.png"
    imageio.write_image(path, img)
    back = imageio.read_image(path)
    assert back.shape == img.shape and back.dtype == np.float32
    # 8-bit sRGB quantization error in linear space
    assert np.abs(imageio.linear_to_srgb(back) - imageio.linear_to_srgb(img)).max() <= 0.5 / 255 + 1e-6


def test_frames_are_listed_in_natural_order(tmp_path):
    for name in ("f10.png", "f2.png", "f1.png", "notes.txt", "f3.PPM"):
        (tmp_path / name).write_bytes(b"")
    names = [p.rsplit("/", 1)[-1] for p in imageio.list_frames(tmp_path)]
    assert names == ["f1.png", "f2.png", "f3.PPM", "f10.png"]


def test_manifest_round_trip(tmp_path, rng):
    g, f = rng.random((2, 3, 8, 8)).astype(np.float32)
    blur, sharp = manifest.write_pair(tmp_path, "p0", g, f)
    entries = [manifest.ManifestEntry("p0", blur, sharp, ne=9, mean_blur_size=1.5, source="s")]
    path = tmp_path / manifest.MANIFEST_NAME
    manifest.write_manifest(path, entries)
    assert manifest.read_manifest(path) == entries
    assert manifest.manifest_path(str(tmp_path)) == str(path)
    loaded, pairs = manifest.load_pairs(path)
    assert loaded == entries
    np.testing.assert_allclose(pairs[0][0], imageio.read_image(tmp_path / blur))


def test_frame_fixture_layout(tmp_path):
    dirs = write_frame_fixture(tmp_path, size=48)
    assert len(dirs) == 4
    assert all(len(imageio.list_frames(d)) == 24 for d in dirs)


def test_toy_pairs_have_two_blur_clusters():
    pairs, sizes, labels = toy_pairs(n_small=2, n_large=2, size=32)
    assert len(pairs) == 4 and list(labels) == [0, 0, 1, 1]
    assert sizes[labels == 1].min() > 5 * sizes[labels == 0].max()
    for g, f in pairs:
        assert g.shape == f.shape == (3, 32, 32)
