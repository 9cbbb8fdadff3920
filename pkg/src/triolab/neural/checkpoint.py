"""Binary checkpoint format shared by trainer and CLI.

Layout: magic "TRIO1", one version byte, then per-tensor records of
(u32 name length, utf-8 name, u32 rank, u32 dims..., float32 values),
all little-endian.  Records run to end of file.
"""

from __future__ import annotations

import os
import struct
import tempfile

import numpy as np

MAGIC = b"TRIO1"
VERSION = 1


class CheckpointError(RuntimeError):
    pass


def save_checkpoint(path: str, arrays: dict[str, np.ndarray]) -> None:
    blob = bytearray()
    blob += MAGIC
    blob += bytes([VERSION])
    for name, value in arrays.items():
        encoded = name.encode("utf-8")
        value = np.asarray(value, dtype="<f4")
        blob += struct.pack("<I", len(encoded))
        blob += encoded
        blob += struct.pack("<I", value.ndim)
        for dim in value.shape:
            blob += struct.pack("<I", dim)
        blob += value.tobytes(order="C")
    fd, tmp = tempfile.mkstemp(dir=os.path.dirname(os.path.abspath(path)) or ".")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(bytes(blob))
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def load_checkpoint(path: str) -> dict[str, np.ndarray]:
    with open(path, "rb") as fh:
        blob = fh.read()
    if blob[: len(MAGIC)] != MAGIC:
        raise CheckpointError(f"{path}: bad magic, not a checkpoint file")
    if blob[len(MAGIC)] != VERSION:
        raise CheckpointError(f"{path}: unsupported checkpoint version {blob[len(MAGIC)]}")
    offset = len(MAGIC) + 1
    arrays: dict[str, np.ndarray] = {}

    def take(n: int) -> bytes:
        nonlocal offset
        if offset + n > len(blob):
            raise CheckpointError(f"{path}: truncated checkpoint")
        piece = blob[offset : offset + n]
        offset += n
        return piece

    while offset < len(blob):
        (name_len,) = struct.unpack("<I", take(4))
        name = take(name_len).decode("utf-8")
        (rank,) = struct.unpack("<I", take(4))
        dims = struct.unpack(f"<{rank}I", take(4 * rank)) if rank else ()
        count = int(np.prod(dims)) if dims else 1
        values = np.frombuffer(take(4 * count), dtype="<f4").reshape(dims)
        if name in arrays:
            raise CheckpointError(f"{path}: duplicate tensor {name!r}")
        arrays[name] = values.astype(np.float32)
    return arrays
