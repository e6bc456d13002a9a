"""Versioned binary checkpoints of network state.

Layout::

    magic (8 bytes) | version (u32 LE) | header length (u32 LE) | header JSON
    | arrays (int32 LE, in header order) | sha256 of everything before (32 bytes)

The header echoes the config, stream position, array names and shapes,
plus a free-form ``extra`` mapping (e.g. tracker state). It is serialized
with sorted keys and no timestamps so identical state gives identical bytes.
"""
from __future__ import annotations

import hashlib
import json
import os
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .config import NetworkConfig

MAGIC = b"TNNCKPT\x00"
VERSION = 1
_DIGEST = 32
_PREFIX = struct.Struct("<II")


class CheckpointError(ValueError):
    pass


@dataclass
class Checkpoint:
    config: dict
    position: int
    arrays: dict[str, np.ndarray]
    extra: dict


def dumps(net, position: int, extra: dict | None = None) -> bytes:
    arrays = net.state_arrays()
    header = {
        "config": net.cfg.to_dict(),
        "position": int(position),
        "arrays": [[name, list(a.shape)] for name, a in arrays],
        "extra": extra or {},
    }
    hbytes = json.dumps(header, sort_keys=True, separators=(",", ":")).encode()
    body = [MAGIC, _PREFIX.pack(VERSION, len(hbytes)), hbytes]
    body += [np.ascontiguousarray(a, dtype="<i4").tobytes() for _, a in arrays]
    blob = b"".join(body)
    return blob + hashlib.sha256(blob).digest()


def save(path, net, position: int, extra: dict | None = None) -> None:
    """Write atomically: a crash mid-write leaves the previous file intact."""
    path = Path(path)
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_bytes(dumps(net, position, extra))
    os.replace(tmp, path)


def loads(blob: bytes) -> Checkpoint:
    head = len(MAGIC) + _PREFIX.size
    if len(blob) < head + _DIGEST:
        raise CheckpointError("checkpoint is empty or truncated")
    if blob[:len(MAGIC)] != MAGIC:
        raise CheckpointError("not a checkpoint file (bad magic)")
    version, hlen = _PREFIX.unpack_from(blob, len(MAGIC))
    if version != VERSION:
        raise CheckpointError(f"checkpoint version {version} is not supported (expected {VERSION})")
    payload, digest = blob[:-_DIGEST], blob[-_DIGEST:]
    if hashlib.sha256(payload).digest() != digest:
        raise CheckpointError("checkpoint checksum mismatch (file is corrupt or truncated)")
    try:
        header = json.loads(payload[head:head + hlen])
    except ValueError as exc:
        raise CheckpointError(f"bad checkpoint header: {exc}") from exc
    off = head + hlen
    arrays = {}
    for name, shape in header["arrays"]:
        n = int(np.prod(shape)) * 4
        if off + n > len(payload):
            raise CheckpointError(f"array {name} runs past end of checkpoint")
        arrays[name] = np.frombuffer(payload, dtype="<i4", count=n // 4, offset=off).reshape(shape).astype(np.int32)
        off += n
    if off != len(payload):
        raise CheckpointError("trailing bytes after checkpoint arrays")
    return Checkpoint(header["config"], header["position"], arrays, header["extra"])


def load(path) -> Checkpoint:
    try:
        return loads(Path(path).read_bytes())
    except OSError as exc:
        raise CheckpointError(f"cannot read checkpoint {path}: {exc}") from exc


def restore(net, ckpt: Checkpoint) -> int:
    """Load ``ckpt`` into ``net`` in place and return the stream position.

    The checkpoint's config must equal the network's.
    """
    if ckpt.config != net.cfg.to_dict():
        raise CheckpointError("checkpoint config does not match the network config")
    targets = dict(net.state_arrays())
    if set(targets) != set(ckpt.arrays):
        raise CheckpointError(f"checkpoint arrays {sorted(ckpt.arrays)} do not match {sorted(targets)}")
    for name, dst in targets.items():
        src = ckpt.arrays[name]
        if src.shape != dst.shape:
            raise CheckpointError(f"{name}: shape {src.shape} does not match {dst.shape}")
    for name, dst in targets.items():
        dst[...] = ckpt.arrays[name]
    return ckpt.position


def config_of(ckpt: Checkpoint) -> NetworkConfig:
    return NetworkConfig.from_dict(ckpt.config)
