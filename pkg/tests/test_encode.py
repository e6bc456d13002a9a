import struct

import numpy as np
import pytest
from hypothesis import given, strategies as st

from tnn.core import INF
from tnn.encode import (GRID, N_FIELDS, ONE_PHASE, THREE_PHASE, DataError, Dataset, StreamSpec,
                        Transform, binarize_image, build_stream, corner_pixels, load_many,
                        load_mnist, posneg_encode, posneg_encode_rf, posneg_lines, read_idx_images,
                        read_idx_labels, scaled_stream, swap_label, transpose_image, write_idx)

from conftest import have_mnist, mnist_paths, synthetic_images


def test_idx_round_trip(tmp_path):
    ds = synthetic_images(12)
    write_idx(tmp_path / "i", tmp_path / "l", ds.images, ds.labels)
    back = load_mnist(tmp_path / "i", tmp_path / "l")
    assert np.array_equal(back.images, ds.images) and np.array_equal(back.labels, ds.labels)


def test_idx_byte_layout(tmp_path):
    ds = synthetic_images(2)
    write_idx(tmp_path / "i", tmp_path / "l", ds.images, ds.labels)
    raw = (tmp_path / "i").read_bytes()
    assert struct.unpack(">IIII", raw[:16]) == (0x803, 2, 28, 28)
    assert raw[16:16 + 784] == ds.images[0].tobytes()
    assert (tmp_path / "l").read_bytes()[:8] == struct.pack(">II", 0x801, 2)


def test_idx_bad_magic(tmp_path):
    p = tmp_path / "x"
    p.write_bytes(struct.pack(">IIII", 0x801, 1, 28, 28) + bytes(784))
    with pytest.raises(DataError, match="magic"):
        read_idx_images(p)


def test_idx_truncated_reports_sizes(tmp_path):
    p = tmp_path / "x"
    p.write_bytes(struct.pack(">IIII", 0x803, 2, 28, 28) + bytes(800))
    with pytest.raises(DataError, match="816.*1584"):
        read_idx_images(p)
    q = tmp_path / "y"
    q.write_bytes(struct.pack(">II", 0x801, 5) + bytes(2))
    with pytest.raises(DataError):
        read_idx_labels(q)


def test_idx_missing_and_mismatched(tmp_path):
    with pytest.raises(FileNotFoundError):
        read_idx_images("")
    ds = synthetic_images(3)
    write_idx(tmp_path / "i", tmp_path / "l", ds.images, ds.labels[:3])
    write_idx(tmp_path / "i2", tmp_path / "l2", ds.images[:2], ds.labels[:2])
    with pytest.raises(DataError, match="mismatch"):
        load_mnist(tmp_path / "i", tmp_path / "l2")


@pytest.mark.skipif(not have_mnist(), reason="MNIST files not available")
def test_real_mnist_sizes():
    imgs, labs = mnist_paths()
    assert len(load_mnist(imgs[0], labs[0])) == 60_000
    assert len(load_many(imgs, labs)) == 70_000


def test_binarize_image():
    assert binarize_image(np.zeros((28, 28))).sum() == 0
    assert binarize_image(np.array([[200, 127, 128]])).tolist() == [[1, 0, 1]]
    with pytest.raises(ValueError):
        binarize_image(np.zeros((2, 2)), 0)


def test_posneg_corner_example():
    img = np.zeros((28, 28), dtype=np.uint8)
    img[0, 0] = 1
    img[2, 2] = 1
    assert corner_pixels(img)[0].tolist() == [1, 0, 0, 1]
    assert posneg_encode(img)[0].tolist() == [0, INF, INF, 0, INF, 0, 0, INF]
    assert posneg_lines(img)[0].tolist() == [0, 5, 6, 3]
    assert posneg_encode(np.zeros((28, 28)))[0].tolist() == [INF] * 4 + [0] * 4


@given(st.integers(0, 2**32 - 1))
def test_posneg_homeostasis(seed):
    img = (np.random.default_rng(seed).random((28, 28)) < 0.3).astype(np.uint8)
    v = posneg_encode(img)
    assert v.shape == (N_FIELDS, 8) and N_FIELDS == GRID * GRID == 676
    assert ((v == 0).sum(axis=1) == 4).all()
    assert (v == 0).sum() == 2704
    lines = posneg_lines(img)
    dense = np.full((676, 8), INF)
    np.put_along_axis(dense, lines, 0, axis=1)
    assert np.array_equal(dense, v)


def test_posneg_rf_probe_encoder():
    img = np.zeros((28, 28), dtype=np.uint8)
    img[3, 4] = 1
    v = posneg_encode_rf(img, 3, 4)
    assert v.shape == (50,) and (v == 0).sum() == 25 and v[0] == 0 and v[25] == INF
    with pytest.raises(ValueError):
        posneg_encode_rf(img, 25, 25)


def test_transpose_and_swap():
    img = np.zeros((28, 28), dtype=np.uint8)
    img[2, 5] = 1
    assert transpose_image(img)[5, 2] == 1
    assert np.array_equal(transpose_image(transpose_image(img)), img)
    sym = img + img.T
    assert np.array_equal(transpose_image(sym), sym)
    assert swap_label(0) == 1 and swap_label(3) == 2
    assert all(swap_label(swap_label(k)) == k for k in range(10))


def test_stream_layouts():
    assert ONE_PHASE.total == 70_000 and ONE_PHASE.boundaries() == []
    assert THREE_PHASE.boundaries() == [20_000, 40_000]
    assert THREE_PHASE.transform_at(19_999) is Transform.IDENTITY
    assert THREE_PHASE.transform_at(20_000) is Transform.TRANSPOSE
    assert THREE_PHASE.transform_at(40_000) is Transform.TRANSPOSE_SWAP
    assert StreamSpec.from_dict(THREE_PHASE.to_dict()) == THREE_PHASE
    small = scaled_stream(THREE_PHASE, 70)
    assert [n for n, _ in small.phases] == [20, 20, 30]


def test_build_stream_applies_transforms():
    ds = synthetic_images(70)
    frames = list(build_stream(scaled_stream(THREE_PHASE, 70), ds))
    assert len(frames) == 70
    f = frames[45]
    assert f.label == ds.labels[45] ^ 1
    assert np.array_equal(f.binary, binarize_image(ds.images[45].T))
    assert frames[5].label == ds.labels[5]
    assert list(build_stream(StreamSpec(((0, Transform.IDENTITY),)), ds)) == []
    with pytest.raises(DataError):
        next(build_stream(ONE_PHASE, ds))
