import numpy as np
import pytest

from tnn import checkpoint
from tnn.checkpoint import CheckpointError
from tnn.config import preset
from tnn.encode import StreamSpec, Transform, build_stream
from tnn.network import Network

from conftest import synthetic_images

FRAMES = list(build_stream(StreamSpec(((40, Transform.IDENTITY),)), synthetic_images(40)))


def trained(name="ecvt", n=20):
    net = Network(preset(name))
    for f in FRAMES[:n]:
        net.step(f)
    return net


def test_round_trip_is_bit_identical(tmp_path):
    net = trained()
    path = tmp_path / "c.bin"
    checkpoint.save(path, net, 20, {"note": [1, 2]})
    fresh = Network(preset("ecvt"))
    ck = checkpoint.load(path)
    assert checkpoint.restore(fresh, ck) == 20 and ck.extra == {"note": [1, 2]}
    for (_, a), (_, b) in zip(net.state_arrays(), fresh.state_arrays()):
        assert np.array_equal(a, b)
    assert checkpoint.dumps(fresh, 20, {"note": [1, 2]}) == path.read_bytes()


def test_restored_network_continues_identically(tmp_path):
    net = trained(n=20)
    blob = checkpoint.dumps(net, 20)
    other = Network(preset("ecvt"))
    checkpoint.restore(other, checkpoint.loads(blob))
    for f in FRAMES[20:]:
        assert net.step(f).prediction == other.step(f).prediction
    assert checkpoint.dumps(net, 40) == checkpoint.dumps(other, 40)


def test_config_mismatch_rejected():
    blob = checkpoint.dumps(trained(), 20)
    with pytest.raises(CheckpointError, match="config"):
        checkpoint.restore(Network(preset("ecvt").with_overrides(w_max=4)), checkpoint.loads(blob))
    with pytest.raises(CheckpointError):
        checkpoint.restore(Network(preset("eccvt")), checkpoint.loads(blob))


def test_corrupt_files_rejected(tmp_path):
    blob = checkpoint.dumps(trained(n=2), 2)
    with pytest.raises(CheckpointError, match="empty or truncated"):
        checkpoint.loads(b"")
    with pytest.raises(CheckpointError, match="checksum"):
        checkpoint.loads(blob[:-100] + blob[-32:])
    flipped = bytearray(blob)
    flipped[200] ^= 1
    with pytest.raises(CheckpointError, match="checksum"):
        checkpoint.loads(bytes(flipped))
    with pytest.raises(CheckpointError, match="magic"):
        checkpoint.loads(b"X" + blob[1:])
    bumped = bytearray(blob)
    bumped[8] = 9
    with pytest.raises(CheckpointError, match="version"):
        checkpoint.loads(bytes(bumped))
    (tmp_path / "empty").write_bytes(b"")
    with pytest.raises(CheckpointError):
        checkpoint.load(tmp_path / "empty")
    with pytest.raises(CheckpointError):
        checkpoint.load(tmp_path / "missing")


def test_little_endian_layout():
    net = Network(preset("ecvt"))
    blob = checkpoint.dumps(net, 0)
    assert blob[:8] == checkpoint.MAGIC
    half = (8 << 10) // 2
    assert half.to_bytes(4, "little") * 4 in blob
