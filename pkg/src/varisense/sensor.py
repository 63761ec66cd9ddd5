"""Programmable-sensor forward model.

Each pixel integrates its scene signal over contiguous exposure windows given
by its compression ratio r (rT measurements of T/rT frames each), with shot
and read noise applied at readout. Frames are divided by T before summation
so a full-length exposure integrates to at most 1, keeping signals inside the
noise model's working range; higher ratios therefore see weaker per-readout
signals from their shorter windows.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .autodiff import load_checkpoint, save_checkpoint
from .video import VideoClip

MAX_MEASUREMENTS = 8
RATIO_COUNTS = (0, 1, 2, 4, 8)  # measurements per pixel, i.e. r*T

SIGMA_SHOT = 4.95e-3
SIGMA_READ = 7.25e-3


@dataclass
class NoiseConfig:
    sigma_ss: float = SIGMA_SHOT
    sigma_r: float = SIGMA_READ
    enabled: bool = True

    def __post_init__(self):
        if self.sigma_ss < 0 or self.sigma_r < 0:
            raise ValueError("noise scales must be nonnegative")


@dataclass
class RatioMap:
    """Per-pixel measurement counts (rT values), plus the frame count."""

    counts: np.ndarray  # (H, W) ints in RATIO_COUNTS
    frames: int = 16

    def __post_init__(self):
        self.counts = np.asarray(self.counts, dtype=np.int64)
        bad = np.setdiff1d(np.unique(self.counts), RATIO_COUNTS)
        if bad.size:
            raise ValueError(f"invalid measurement counts {bad.tolist()}")

    @classmethod
    def uniform(cls, height: int, width: int, count: int, frames: int = 16) -> "RatioMap":
        return cls(np.full((height, width), count), frames)

    @property
    def ratios(self) -> np.ndarray:
        return self.counts / self.frames

    @property
    def r_avg(self) -> float:
        return float(self.counts.mean() / self.frames)


@dataclass
class CodedAperture:
    mask: np.ndarray  # (H, W, T) binary, fixed after initialization

    def __post_init__(self):
        vals = np.unique(self.mask)
        if not np.all(np.isin(vals, (0, 1))):
            raise ValueError("aperture entries must be binary")
        self.mask = self.mask.astype(np.float64)
        self.mask.flags.writeable = False

    @classmethod
    def random(cls, height: int, width: int, frames: int,
               rng: np.random.Generator, density: float = 0.5) -> "CodedAperture":
        return cls((rng.random((height, width, frames)) < density).astype(np.float64))


def measurement_matrix(r: float, frames: int) -> np.ndarray:
    """Binary rT x T matrix; row i integrates frames (i-1)/r+1 .. i/r.

    Rows are orthogonal with A A^T = (1/r) I. r = 0 yields an empty (0, T)
    matrix.
    """
    m_float = r * frames
    m = int(round(m_float))
    if abs(m_float - m) > 1e-9 or m < 0:
        raise ValueError(f"ratio {r} with T={frames} gives non-integral rT={m_float}")
    if m == 0:
        return np.zeros((0, frames), dtype=np.int64)
    if frames % m:
        raise ValueError(f"T={frames} not divisible by rT={m}")
    width = frames // m
    rows = np.zeros((m, frames), dtype=np.int64)
    for i in range(m):
        rows[i, i * width:(i + 1) * width] = 1
    return rows


def readout_schedule(r: float, frames: int) -> list[tuple[int, int, int]]:
    """(exposure-start, exposure-end, readout-time) per measurement, 1-indexed.

    Electrons clear at each readout, so windows are disjoint and contiguous
    and together cover frames 1..T.
    """
    a = measurement_matrix(r, frames)
    schedule = []
    for row in a:
        cols = np.nonzero(row)[0]
        start, end = int(cols[0]) + 1, int(cols[-1]) + 1
        schedule.append((start, end, end))
    return schedule


def exposure_noise(e, cfg: NoiseConfig, rng: np.random.Generator | None = None):
    """Readout value U(e) = e + shot + read noise for integrated signal e >= 0.

    Shot noise scales with sqrt(e); read noise is fixed. Scalar or array.
    """
    arr = np.asarray(e, dtype=np.float64)
    if np.any(arr < 0):
        raise ValueError("integrated signal must be nonnegative")
    if not cfg.enabled:
        return e
    if rng is None:
        raise ValueError("noise enabled but no generator supplied")
    shot = rng.standard_normal(arr.shape) * (np.sqrt(arr) * cfg.sigma_ss)
    read = rng.standard_normal(arr.shape) * cfg.sigma_r
    out = arr + shot + read
    return float(out) if np.isscalar(e) else out


@dataclass
class SensorData:
    """Captured measurements in the canonical zero-padded (H, W, 8) layout.

    Channel k at pixel p holds measurement k when k < counts[p]; higher
    channels are structural zeros, not observations (counts travels with the
    data for that reason).
    """

    packed: np.ndarray  # (H, W, 8)
    counts: np.ndarray  # (H, W)
    frames: int = 16

    @property
    def height(self) -> int:
        return self.packed.shape[0]

    @property
    def width(self) -> int:
        return self.packed.shape[1]

    def vector(self, i: int, j: int) -> np.ndarray:
        return self.packed[i, j, :self.counts[i, j]].copy()

    def save(self, path: str | Path) -> None:
        save_checkpoint(path, {"packed": self.packed,
                               "counts": self.counts.astype(np.float64),
                               "frames": np.array(float(self.frames))})

    @classmethod
    def load(cls, path: str | Path) -> "SensorData":
        t = load_checkpoint(path)
        return cls(t["packed"], t["counts"].astype(np.int64), int(t["frames"]))


def pack_measurements(vectors: dict[tuple[int, int], np.ndarray],
                      counts: np.ndarray) -> np.ndarray:
    packed = np.zeros(counts.shape + (MAX_MEASUREMENTS,))
    for (i, j), vec in vectors.items():
        if len(vec) != counts[i, j]:
            raise ValueError(f"pixel ({i},{j}): {len(vec)} values for count {counts[i, j]}")
        packed[i, j, :len(vec)] = vec
    return packed


def unpack_measurements(packed: np.ndarray, counts: np.ndarray
                        ) -> dict[tuple[int, int], np.ndarray]:
    out = {}
    h, w = counts.shape
    for i in range(h):
        for j in range(w):
            out[(i, j)] = packed[i, j, :counts[i, j]].copy()
    return out


def capture(scene: VideoClip | np.ndarray, ratio_map: RatioMap,
            aperture: CodedAperture | None = None,
            noise: NoiseConfig | None = None,
            rng: np.random.Generator | None = None) -> SensorData:
    """Simulate the sensor over a clip: per-pixel windowed integration of
    S/T (optionally masked by the coded aperture), then readout noise."""
    s = scene.data if isinstance(scene, VideoClip) else np.asarray(scene)
    h, w, t = s.shape
    if ratio_map.counts.shape != (h, w):
        raise ValueError(f"ratio map {ratio_map.counts.shape} vs scene {(h, w)}")
    if ratio_map.frames != t:
        raise ValueError(f"ratio map frames {ratio_map.frames} vs scene frames {t}")
    x = s
    if aperture is not None:
        if aperture.mask.shape != s.shape:
            raise ValueError(f"aperture {aperture.mask.shape} vs scene {s.shape}")
        x = s * aperture.mask
    x = x / t

    packed = np.zeros((h, w, MAX_MEASUREMENTS))
    for m in RATIO_COUNTS:
        if m == 0:
            continue
        sel = ratio_map.counts == m
        if not sel.any():
            continue
        integ = x.reshape(h, w, m, t // m).sum(axis=3)
        packed[sel, :m] = integ[sel]

    noise = noise if noise is not None else NoiseConfig()
    if noise.enabled:
        valid = np.arange(MAX_MEASUREMENTS) < ratio_map.counts[:, :, None]
        packed[valid] = exposure_noise(packed[valid], noise, rng)
    return SensorData(packed=packed, counts=ratio_map.counts.copy(), frames=t)
