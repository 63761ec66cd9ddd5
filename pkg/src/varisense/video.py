"""Clip ingestion and synthetic moving scenes.

Clips are (H, W, T) grids of scene irradiance in [0,1]; T defaults to 16.
Synthetic scenes substitute for recorded footage: they are pure functions of
(spec, seed), so datasets are reproducible and train/test splits stay
disjoint.
"""
from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .autodiff import load_checkpoint, save_checkpoint
from .pgm import read_pgm
from .rng import stream

DEFAULT_FRAMES = 16

SCENE_KINDS = ("translating-rectangle", "drifting-sinusoid", "static-texture", "mixed")


@dataclass
class VideoClip:
    data: np.ndarray  # (H, W, T) float64 in [0,1]

    def __post_init__(self):
        if self.data.ndim != 3:
            raise ValueError(f"clip must be HxWxT, got shape {self.data.shape}")
        if self.data.min() < 0.0 or self.data.max() > 1.0:
            raise ValueError("clip values must lie in [0,1]")

    @property
    def height(self) -> int:
        return self.data.shape[0]

    @property
    def width(self) -> int:
        return self.data.shape[1]

    @property
    def frames(self) -> int:
        return self.data.shape[2]


@dataclass
class SceneSpec:
    kind: str = "mixed"
    velocity: float = 1.0  # pixels per frame
    contrast: float = 1.0
    seed: int = 0
    layout_seed: int | None = None  # shared motion geometry across clips

    def __post_init__(self):
        if self.kind not in SCENE_KINDS:
            raise ValueError(f"unknown scene kind {self.kind!r}")
        if self.velocity < 0:
            raise ValueError("velocity must be >= 0")
        if not 0.0 < self.contrast <= 1.0:
            raise ValueError("contrast must be in (0,1]")


def load_clips(directory: str | Path, crop: tuple[int, int],
               frames: int = DEFAULT_FRAMES, stride: int | None = None) -> list[VideoClip]:
    """Slice a directory of graymap frames into center-cropped clips.

    Frames are taken in lexicographic order, converted to [0,1] by dividing
    by 255, center-cropped to ``crop``, and cut into clips of ``frames``
    frames starting every ``stride`` frames (default: non-overlapping).
    """
    stride = frames if stride is None else stride
    paths = sorted(Path(directory).glob("*.pgm"))
    if not paths:
        raise ValueError(f"no .pgm frames in {directory}")
    ch, cw = crop
    images = []
    shape = None
    for p in paths:
        img = read_pgm(p)
        if shape is None:
            shape = img.shape
        elif img.shape != shape:
            raise ValueError(f"frame sizes differ: {shape} vs {img.shape} ({p.name})")
        images.append(img)
    h, w = shape
    if h < ch or w < cw:
        raise ValueError(f"frames {h}x{w} smaller than crop {ch}x{cw}")
    top = (h - ch) // 2
    left = (w - cw) // 2
    stack = np.stack([im[top:top + ch, left:left + cw] for im in images], axis=2)
    stack = stack.astype(np.float64) / 255.0
    clips = []
    for start in range(0, stack.shape[2] - frames + 1, stride):
        clips.append(VideoClip(stack[:, :, start:start + frames].copy()))
    return clips


def _texture(h: int, w: int, rng: np.random.Generator, contrast: float) -> np.ndarray:
    """Smooth random background: low-frequency cosine mixture plus grain."""
    yy, xx = np.meshgrid(np.arange(h), np.arange(w), indexing="ij")
    img = np.zeros((h, w))
    for _ in range(4):
        fy, fx = rng.uniform(0.5, 3.0, size=2)
        ph = rng.uniform(0, 2 * np.pi)
        img += np.cos(2 * np.pi * (fy * yy / h + fx * xx / w) + ph)
    img += 0.6 * rng.standard_normal((h, w))
    lo, hi = img.min(), img.max()
    img = (img - lo) / (hi - lo)
    return 0.5 + contrast * (img - 0.5)


def synthesize(spec: SceneSpec, height: int, width: int,
               frames: int = DEFAULT_FRAMES) -> VideoClip:
    """Render a synthetic clip; deterministic for a fixed spec."""
    rng = stream("scene", spec.kind, spec.velocity, spec.contrast, spec.seed)
    kind = spec.kind
    if kind == "static-texture":
        frame = _texture(height, width, rng, spec.contrast)
        data = np.repeat(frame[:, :, None], frames, axis=2)
        return VideoClip(data)

    if kind == "drifting-sinusoid":
        yy, xx = np.meshgrid(np.arange(height), np.arange(width), indexing="ij")
        fy, fx = rng.uniform(1.0, 4.0, size=2)
        ph = rng.uniform(0, 2 * np.pi)
        data = np.empty((height, width, frames))
        for t in range(frames):
            shift = spec.velocity * t
            wave = np.sin(2 * np.pi * (fy * yy / height + fx * (xx - shift) / width) + ph)
            data[:, :, t] = 0.5 + 0.5 * spec.contrast * wave
        return VideoClip(data)

    # translating-rectangle: bright box over a dark floor, left edge moving
    # right at spec.velocity px/frame; geometry comes from layout_seed when
    # set, so a dataset can share one motion layout across varied textures
    rect_h = max(2, height // 3)
    rect_w = max(2, width // 3)
    geom_rng = rng if spec.layout_seed is None else \
        stream("layout", spec.kind, spec.velocity, spec.layout_seed)
    top = int(geom_rng.integers(0, height - rect_h + 1))
    left0 = int(geom_rng.integers(0, max(1, width - rect_w - int(spec.velocity * (frames - 1)))))
    floor = 0.5 - 0.45 * spec.contrast
    level = 0.5 + 0.5 * spec.contrast

    if kind == "translating-rectangle":
        data = np.full((height, width, frames), floor)
        for t in range(frames):
            left = left0 + int(round(spec.velocity * t))
            data[top:top + rect_h, left:min(left + rect_w, width), t] = level
        return VideoClip(data)

    # mixed: the moving rectangle composited onto a static texture
    background = _texture(height, width, rng, 0.6 * spec.contrast)
    data = np.repeat(background[:, :, None], frames, axis=2)
    for t in range(frames):
        left = left0 + int(round(spec.velocity * t))
        data[top:top + rect_h, left:min(left + rect_w, width), t] = level
    return VideoClip(np.clip(data, 0.0, 1.0))


def save_clips(path: str | Path, clips: list[VideoClip]) -> None:
    """Cache clips in the checkpoint container format."""
    save_checkpoint(path, {f"clip.{i:05d}": c.data for i, c in enumerate(clips)})


def load_cached_clips(path: str | Path) -> list[VideoClip]:
    tensors = load_checkpoint(path)
    return [VideoClip(tensors[name]) for name in sorted(tensors)]


def make_dataset(n_train: int, n_test: int, height: int, width: int,
                 frames: int = DEFAULT_FRAMES, kind: str = "mixed",
                 velocity: float = 1.0, seed: int = 0
                 ) -> tuple[list[VideoClip], list[VideoClip]]:
    """Disjoint train/test clips sampled per-spec; 80/20 by construction of
    the requested counts, deterministic under the seed.

    All clips share one motion layout (keyed on the dataset seed) with
    per-clip texture and phase variation, so the per-location motion
    statistics are stationary across the dataset.
    """
    clips = [
        synthesize(SceneSpec(kind=kind, velocity=velocity,
                             seed=seed * 100003 + i, layout_seed=seed),
                   height, width, frames)
        for i in range(n_train + n_test)
    ]
    order = stream("split", seed, n_train, n_test).permutation(len(clips))
    train = [clips[i] for i in order[:n_train]]
    test = [clips[i] for i in order[n_train:]]
    return train, test
