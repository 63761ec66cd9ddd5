"""Binary portable graymap (P5, 8-bit) reading and writing."""
from __future__ import annotations

from pathlib import Path

import numpy as np


def read_pgm(path: str | Path) -> np.ndarray:
    """Read an 8-bit P5 graymap into a (H, W) uint8 array."""
    buf = Path(path).read_bytes()
    if buf[:2] != b"P5":
        raise ValueError(f"{path}: not a binary graymap (magic {buf[:2]!r})")
    fields: list[int] = []
    pos = 2
    while len(fields) < 3:
        while pos < len(buf) and buf[pos:pos + 1].isspace():
            pos += 1
        if buf[pos:pos + 1] == b"#":
            while pos < len(buf) and buf[pos] != 0x0A:
                pos += 1
            continue
        start = pos
        while pos < len(buf) and not buf[pos:pos + 1].isspace():
            pos += 1
        fields.append(int(buf[start:pos]))
    pos += 1  # single whitespace after maxval
    width, height, maxval = fields
    if maxval != 255:
        raise ValueError(f"{path}: only 8-bit graymaps supported (maxval {maxval})")
    data = np.frombuffer(buf, dtype=np.uint8, count=width * height, offset=pos)
    return data.reshape(height, width).copy()


def write_pgm(path: str | Path, image: np.ndarray) -> None:
    """Write a (H, W) array as an 8-bit P5 graymap; floats in [0,1] are scaled."""
    img = np.asarray(image)
    if img.dtype != np.uint8:
        img = np.clip(np.rint(img * 255.0), 0, 255).astype(np.uint8)
    h, w = img.shape
    header = f"P5\n{w} {h}\n255\n".encode("ascii")
    Path(path).write_bytes(header + img.tobytes())
