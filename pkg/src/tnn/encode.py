"""MNIST ingestion, binarization, PosNeg corner-pixel encoding and the
1-phase / 3-phase stream builders."""
from __future__ import annotations

import enum
import hashlib
import os
import struct
from dataclasses import dataclass
from typing import Iterator, Sequence

import numpy as np

from .core import INF, TIME_DTYPE

IMAGE_MAGIC = 0x00000803
LABEL_MAGIC = 0x00000801

IMG_SIZE = 28
RF = 3
GRID = IMG_SIZE - RF + 1          # 26 receptive fields per side
N_FIELDS = GRID * GRID            # 676
LINES_PER_FIELD = 8
SPIKES_PER_FIELD = 4

# window offsets of the four corner pixels, row-major
CORNERS = ((0, 0), (0, 2), (2, 0), (2, 2))

DEFAULT_BINARIZE_THRESHOLD = 128


class DataError(Exception):
    """Malformed or missing dataset file."""


@dataclass
class Dataset:
    images: np.ndarray   # (N, 28, 28) uint8
    labels: np.ndarray   # (N,) uint8

    def __len__(self):
        return len(self.labels)

    def __post_init__(self):
        if len(self.images) != len(self.labels):
            raise DataError(f"{len(self.images)} images but {len(self.labels)} labels")

    @classmethod
    def concat(cls, parts: Sequence["Dataset"]) -> "Dataset":
        if not parts:
            return cls(np.zeros((0, IMG_SIZE, IMG_SIZE), np.uint8), np.zeros(0, np.uint8))
        return cls(np.concatenate([p.images for p in parts]),
                   np.concatenate([p.labels for p in parts]))


def _read(path) -> bytes:
    if not path or not os.path.isfile(path):
        raise FileNotFoundError(f"no such data file: {path!r}")
    with open(path, "rb") as fh:
        return fh.read()


def read_idx_images(path) -> np.ndarray:
    buf = _read(path)
    if len(buf) < 16:
        raise DataError(f"{path}: truncated header, expected 16 bytes, got {len(buf)}")
    magic, n, rows, cols = struct.unpack(">IIII", buf[:16])
    if magic != IMAGE_MAGIC:
        raise DataError(f"{path}: bad magic 0x{magic:08x} at offset 0, expected 0x{IMAGE_MAGIC:08x}")
    expected = 16 + n * rows * cols
    if len(buf) < expected:
        raise DataError(f"{path}: truncated at byte {len(buf)}, expected {expected} bytes")
    return np.frombuffer(buf, dtype=np.uint8, count=n * rows * cols, offset=16).reshape(n, rows, cols)


def read_idx_labels(path) -> np.ndarray:
    buf = _read(path)
    if len(buf) < 8:
        raise DataError(f"{path}: truncated header, expected 8 bytes, got {len(buf)}")
    magic, n = struct.unpack(">II", buf[:8])
    if magic != LABEL_MAGIC:
        raise DataError(f"{path}: bad magic 0x{magic:08x} at offset 0, expected 0x{LABEL_MAGIC:08x}")
    expected = 8 + n
    if len(buf) < expected:
        raise DataError(f"{path}: truncated at byte {len(buf)}, expected {expected} bytes")
    labels = np.frombuffer(buf, dtype=np.uint8, count=n, offset=8)
    if labels.size and labels.max() > 9:
        bad = int(np.argmax(labels > 9))
        raise DataError(f"{path}: label {labels[bad]} out of range at byte offset {8 + bad}")
    return labels


def load_mnist(images_path, labels_path) -> Dataset:
    images = read_idx_images(images_path)
    labels = read_idx_labels(labels_path)
    if len(images) != len(labels):
        raise DataError(f"count mismatch: {images_path} has {len(images)} images, "
                        f"{labels_path} has {len(labels)} labels")
    if images.shape[1:] != (IMG_SIZE, IMG_SIZE):
        raise DataError(f"{images_path}: images are {images.shape[1:]}, expected 28x28")
    return Dataset(images, labels)


def load_many(image_paths: Sequence, label_paths: Sequence) -> Dataset:
    """Load and concatenate several IDX pairs in order (train then test gives
    the 70K stream)."""
    if len(image_paths) != len(label_paths):
        raise DataError("need one labels file per images file")
    return Dataset.concat([load_mnist(i, l) for i, l in zip(image_paths, label_paths)])


def write_idx(images_path, labels_path, images: np.ndarray, labels: np.ndarray) -> None:
    n, rows, cols = images.shape
    with open(images_path, "wb") as fh:
        fh.write(struct.pack(">IIII", IMAGE_MAGIC, n, rows, cols))
        fh.write(np.ascontiguousarray(images, dtype=np.uint8).tobytes())
    with open(labels_path, "wb") as fh:
        fh.write(struct.pack(">II", LABEL_MAGIC, len(labels)))
        fh.write(np.ascontiguousarray(labels, dtype=np.uint8).tobytes())


def file_sha256(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


# ---------------------------------------------------------------------------
# image transforms
# ---------------------------------------------------------------------------

def binarize_image(img: np.ndarray, threshold: int = DEFAULT_BINARIZE_THRESHOLD) -> np.ndarray:
    if not 0 < threshold <= 255:
        raise ValueError("threshold must be in 1..255")
    return (np.asarray(img) >= threshold).astype(np.uint8)


def transpose_image(img: np.ndarray) -> np.ndarray:
    return np.ascontiguousarray(np.asarray(img).T)


def swap_label(label: int) -> int:
    if not 0 <= label <= 9:
        raise ValueError(f"label {label} out of range")
    return label ^ 1


def corner_pixels(bimg: np.ndarray) -> np.ndarray:
    """``(676, 4)`` corner pixels of every 3x3 window, windows row-major."""
    bimg = np.asarray(bimg)
    g = bimg.shape[0] - RF + 1
    return np.stack([bimg[dr:dr + g, dc:dc + g] for dr, dc in CORNERS], axis=-1).reshape(g * g, 4)


def posneg_lines(bimg: np.ndarray) -> np.ndarray:
    """Index of the spiking line for each corner: ``k`` for a set pixel,
    ``4 + k`` for a clear one. Shape ``(676, 4)``; all spikes are at t = 0."""
    c = corner_pixels(bimg).astype(np.int32)
    return np.arange(4, dtype=np.int32)[None, :] + 4 * (1 - c)


def posneg_encode(bimg: np.ndarray) -> np.ndarray:
    """Full PosNeg volleys ``(676, 8)``: four positive lines then four negative."""
    c = corner_pixels(bimg)
    pos = np.where(c == 1, 0, INF)
    neg = np.where(c == 0, 0, INF)
    return np.concatenate([pos, neg], axis=1).astype(TIME_DTYPE)


def posneg_encode_rf(bimg: np.ndarray, top: int, left: int, size: int = 5) -> np.ndarray:
    """PosNeg volley over every pixel of one ``size x size`` receptive field:
    ``size**2`` positive lines then ``size**2`` negative ones."""
    patch = np.asarray(bimg)[top:top + size, left:left + size].reshape(-1)
    if patch.size != size * size:
        raise ValueError("receptive field runs off the image")
    return np.concatenate([np.where(patch == 1, 0, INF), np.where(patch == 0, 0, INF)]).astype(TIME_DTYPE)


# ---------------------------------------------------------------------------
# streams
# ---------------------------------------------------------------------------

class Transform(str, enum.Enum):
    IDENTITY = "identity"
    TRANSPOSE = "transpose"
    TRANSPOSE_SWAP = "transpose+label_swap"


@dataclass(frozen=True)
class StreamSpec:
    phases: tuple[tuple[int, Transform], ...]

    @property
    def total(self) -> int:
        return sum(n for n, _ in self.phases)

    def transform_at(self, index: int) -> Transform:
        for n, tr in self.phases:
            if index < n:
                return tr
            index -= n
        raise IndexError("index beyond stream length")

    def boundaries(self) -> list[int]:
        out, acc = [], 0
        for n, _ in self.phases[:-1]:
            acc += n
            out.append(acc)
        return out

    def to_dict(self) -> dict:
        return {"phases": [[n, tr.value] for n, tr in self.phases]}

    @classmethod
    def from_dict(cls, d) -> "StreamSpec":
        return cls(tuple((int(n), Transform(tr)) for n, tr in d["phases"]))


ONE_PHASE = StreamSpec(((70_000, Transform.IDENTITY),))
THREE_PHASE = StreamSpec(((20_000, Transform.IDENTITY),
                          (20_000, Transform.TRANSPOSE),
                          (30_000, Transform.TRANSPOSE_SWAP)))

STREAMS = {"1phase": ONE_PHASE, "3phase": THREE_PHASE}


def scaled_stream(spec: StreamSpec, total: int) -> StreamSpec:
    """Same phase proportions, shortened to ``total`` inputs (the last phase
    absorbs rounding)."""
    if total >= spec.total:
        return spec
    phases, used = [], 0
    for idx, (n, tr) in enumerate(spec.phases):
        m = total - used if idx == len(spec.phases) - 1 else n * total // spec.total
        phases.append((m, tr))
        used += m
    return StreamSpec(tuple(phases))


@dataclass
class Frame:
    """One encoded input: layer-1 spiking line per corner plus its label."""

    index: int
    lines: np.ndarray    # (676, 4) spiking line index per corner slot
    label: int
    binary: np.ndarray   # (28, 28) binarized image after the phase transform

    @property
    def volleys(self) -> np.ndarray:
        """The ``(676, 8)`` PosNeg volleys."""
        return posneg_encode(self.binary)


def build_stream(spec: StreamSpec, data: Dataset,
                 threshold: int = DEFAULT_BINARIZE_THRESHOLD,
                 start: int = 0, stop: int | None = None) -> Iterator[Frame]:
    """Yield encoded frames ``start <= index < stop`` in stream order."""
    stop = spec.total if stop is None else min(stop, spec.total)
    if len(data) < stop:
        raise DataError(f"stream needs {stop} images, dataset has {len(data)}")
    for i in range(start, stop):
        tr = spec.transform_at(i)
        img = data.images[i]
        label = int(data.labels[i])
        if tr is not Transform.IDENTITY:
            img = transpose_image(img)
        if tr is Transform.TRANSPOSE_SWAP:
            label = swap_label(label)
        b = binarize_image(img, threshold)
        yield Frame(i, posneg_lines(b), label, b)
