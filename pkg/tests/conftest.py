import os
from pathlib import Path

import numpy as np
import pytest

from tnn.encode import Dataset, write_idx

MNIST_DIR = Path(os.environ.get("MNIST_DIR", "/root/data/mnist"))


def synthetic_images(n: int, seed: int = 0) -> Dataset:
    """Ten noisy stroke templates, one per class, so small networks can learn."""
    rng = np.random.default_rng(seed)
    templates = np.zeros((10, 28, 28), dtype=np.uint8)
    for k in range(10):
        r, c = 4 + 2 * k, 3 + (7 * k) % 20
        templates[k, r:r + 4, 2:26] = 255
        templates[k, 2:26, c:c + 4] = 255
    labels = (np.arange(n) * 7 + 3) % 10
    imgs = templates[labels].copy()
    noise = rng.random(imgs.shape) < 0.03
    imgs[noise] = 255 - imgs[noise]
    return Dataset(imgs, labels.astype(np.uint8))


@pytest.fixture(scope="session")
def synth_idx(tmp_path_factory):
    """A 400-image synthetic IDX pair on disk."""
    root = tmp_path_factory.mktemp("synth")
    ds = synthetic_images(400)
    img, lab = root / "images.idx", root / "labels.idx"
    write_idx(img, lab, ds.images, ds.labels)
    return str(img), str(lab)


def mnist_paths():
    names = [("train-images-idx3-ubyte", "train-labels-idx1-ubyte"),
             ("t10k-images-idx3-ubyte", "t10k-labels-idx1-ubyte")]
    return ([str(MNIST_DIR / i) for i, _ in names], [str(MNIST_DIR / l) for _, l in names])


def have_mnist() -> bool:
    return all(os.path.isfile(p) for ps in mnist_paths() for p in ps)


def pytest_terminal_summary(terminalreporter):
    try:
        from test_acceptance import RESULTS
    except ImportError:
        return
    if RESULTS:
        terminalreporter.section("acceptance criteria")
        for n in sorted(RESULTS):
            terminalreporter.write_line(RESULTS[n])
