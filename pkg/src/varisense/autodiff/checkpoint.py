"""Self-describing binary container for named tensors.

Layout (all integers little-endian):

    magic   4 bytes  "VCAP"
    version u16      currently 1
    count   u32      number of tensors
    per tensor:
        name_len u16, name UTF-8 bytes
        rank     u16, dims u32 each
        payload  float64 little-endian, C order

Tensors are written sorted by name so the same mapping always produces the
same bytes.
"""
from __future__ import annotations

import struct
from pathlib import Path

import numpy as np

MAGIC = b"VCAP"
VERSION = 1


def save_checkpoint(path: str | Path, tensors: dict[str, np.ndarray]) -> None:
    chunks = [MAGIC, struct.pack("<HI", VERSION, len(tensors))]
    for name in sorted(tensors):
        arr = np.asarray(tensors[name], dtype=np.float64)
        nb = name.encode("utf-8")
        chunks.append(struct.pack("<H", len(nb)))
        chunks.append(nb)
        chunks.append(struct.pack("<H", arr.ndim))
        chunks.append(struct.pack(f"<{arr.ndim}I", *arr.shape) if arr.ndim else b"")
        chunks.append(arr.astype("<f8", order="C").tobytes())
    Path(path).write_bytes(b"".join(chunks))


def load_checkpoint(path: str | Path) -> dict[str, np.ndarray]:
    buf = Path(path).read_bytes()
    if buf[:4] != MAGIC:
        raise ValueError(f"not a checkpoint container: bad magic {buf[:4]!r}")
    version, count = struct.unpack_from("<HI", buf, 4)
    if version != VERSION:
        raise ValueError(f"unsupported checkpoint version {version}")
    off = 10
    out: dict[str, np.ndarray] = {}
    for _ in range(count):
        (name_len,) = struct.unpack_from("<H", buf, off)
        off += 2
        name = buf[off:off + name_len].decode("utf-8")
        off += name_len
        (rank,) = struct.unpack_from("<H", buf, off)
        off += 2
        dims = struct.unpack_from(f"<{rank}I", buf, off) if rank else ()
        off += 4 * rank
        n = int(np.prod(dims)) if rank else 1
        arr = np.frombuffer(buf, dtype="<f8", count=n, offset=off).reshape(dims)
        off += 8 * n
        out[name] = arr.astype(np.float64)
    if off != len(buf):
        raise ValueError(f"trailing bytes in checkpoint: {len(buf) - off}")
    return out
