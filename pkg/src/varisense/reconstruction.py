"""Video reconstruction from captured sensor data.

The initial stage inverts each pixel's measurement operator in closed form
(the blockwise least-norm inverse; the Gram matrix of each measurement block
is diagonal, so no linear solves are needed). A compact convolutional
refinement then cleans up noise and the block structure. Reconstructions are
rescaled by T at the initial stage so they live in the same [0,1] scene
domain as the target clips.
"""
from __future__ import annotations

from pathlib import Path

import numpy as np

from . import autodiff as af
from .autodiff import Conv2d, Tensor
from .pgm import write_pgm
from .sensor import CodedAperture, RatioMap, SensorData
from .video import VideoClip


def _recon_maps(counts: np.ndarray, frames: int,
                mask: np.ndarray | None = None) -> tuple[np.ndarray, np.ndarray]:
    """Per-frame gather index into channel-major packed data, and the scale
    applied after gathering; together they realize the blockwise inverse."""
    h, w = counts.shape
    idx = np.zeros((frames, h, w), dtype=np.intp)
    scale = np.zeros((frames, h, w))
    for m in np.unique(counts):
        if m == 0:
            continue
        sel = counts == m
        d = frames // m
        k_of_t = np.repeat(np.arange(m), d)
        pix = np.flatnonzero(sel)
        idx[:, sel] = k_of_t[:, None] * (h * w) + pix[None, :]
        if mask is None:
            scale[:, sel] = m
        else:
            bw = mask.transpose(2, 0, 1)[:, sel]  # (T, n)
            csum = bw.reshape(m, d, -1).sum(axis=1)  # ones per window
            c_of_t = np.repeat(csum, d, axis=0)
            scale[:, sel] = np.divide(frames * bw, c_of_t,
                                      out=np.zeros_like(bw), where=c_of_t > 0)
    return idx, scale


def _check_ratio_map(data: SensorData, ratio_map: RatioMap | None) -> None:
    if ratio_map is None:
        return
    if ratio_map.frames != data.frames or not np.array_equal(ratio_map.counts, data.counts):
        raise ValueError("ratio map does not match the captured data's counts")


def initial_reconstruction(data: SensorData, ratio_map: RatioMap | None = None,
                           aperture: CodedAperture | None = None) -> np.ndarray:
    """Blockwise pseudoinverse reconstruction, (H, W, T) in scene scale.

    Without an aperture each frame takes its window's mean; with one, windows
    spread their measurement over the unmasked frames only, and windows whose
    mask rows vanish (or pixels with ratio 0) contribute zeros.
    """
    _check_ratio_map(data, ratio_map)
    mask = aperture.mask if aperture is not None else None
    if mask is not None and mask.shape != (data.height, data.width, data.frames):
        raise ValueError(f"aperture {mask.shape} vs data "
                         f"{(data.height, data.width, data.frames)}")
    idx, scale = _recon_maps(data.counts, data.frames, mask)
    packed_cm = data.packed.transpose(2, 0, 1)
    v0 = scale * packed_cm.reshape(-1)[idx]
    return v0.transpose(1, 2, 0)


def initial_reconstruction_masked(data: SensorData, ratio_map: RatioMap | None,
                                  aperture: CodedAperture) -> np.ndarray:
    return initial_reconstruction(data, ratio_map, aperture)


def initial_reconstruction_op(packed: Tensor, counts: np.ndarray, frames: int,
                              aperture: CodedAperture | None = None) -> Tensor:
    """Differentiable initial reconstruction on channel-major packed data.

    ``packed`` is (8, H, W); the result is (T, H, W). The map is linear in
    the measurements, so the gather/scale pair is exact.
    """
    mask = aperture.mask if aperture is not None else None
    idx, scale = _recon_maps(counts, frames, mask)
    return af.mul(af.gather_flat(packed, idx), Tensor(scale))


class ReconPipeline:
    """Convolutional refinement on top of the initial reconstruction.

    Six 3x3 conv layers at 32 channels on (V0, ratio plane, optional
    aperture) with a residual output, final layer zero-initialized so an
    untrained pipeline is the identity on V0.
    """

    def __init__(self, frames: int, *, mask_enabled: bool, rng: np.random.Generator,
                 channels: int = 32, depth: int = 6):
        self.frames = frames
        self.mask_enabled = mask_enabled
        cin = frames + 1 + (frames if mask_enabled else 0)
        gain = 6 ** 0.5  # all but the zero-init output conv feed relus
        self.layers = [Conv2d(cin, channels, 3, rng=rng, gain=gain)]
        for _ in range(depth - 2):
            self.layers.append(Conv2d(channels, channels, 3, rng=rng, gain=gain))
        self.layers.append(Conv2d(channels, frames, 3, rng=rng, zero_init=True))

    def params(self) -> list[Tensor]:
        return [p for layer in self.layers for p in layer.params()]

    def __call__(self, v0: Tensor, ratio_map: RatioMap,
                 aperture: CodedAperture | None = None) -> Tensor:
        """Refine (T, H, W) v0 into the final reconstruction, same shape."""
        planes = [v0, Tensor(ratio_map.ratios[None, :, :])]
        if self.mask_enabled:
            if aperture is None:
                raise ValueError("pipeline built with aperture input but none given")
            planes.append(Tensor(aperture.mask.transpose(2, 0, 1)))
        x = af.concat(planes, axis=0)
        for layer in self.layers[:-1]:
            x = af.relu(layer(x))
        return v0 + self.layers[-1](x)


def refine(v0: np.ndarray | Tensor, ratio_map: RatioMap, pipeline: ReconPipeline,
           aperture: CodedAperture | None = None) -> Tensor:
    """Convenience wrapper accepting (H, W, T) arrays or (T, H, W) tensors."""
    if isinstance(v0, np.ndarray):
        v0 = Tensor(v0.transpose(2, 0, 1))
    return pipeline(v0, ratio_map, aperture)


def mse_loss(target: np.ndarray | VideoClip, recon: Tensor | np.ndarray):
    """Mean squared error over all H*W*T entries; Tensor in, Tensor out.

    Array targets are compared in (H, W, T) layout against tensors in
    channel-major (T, H, W) layout.
    """
    tgt = target.data if isinstance(target, VideoClip) else np.asarray(target)
    if isinstance(recon, Tensor):
        tgt_cm = tgt.transpose(2, 0, 1) if tgt.ndim == 3 else tgt
        if tgt_cm.shape != recon.shape:
            raise ValueError(f"mse_loss: target {tgt_cm.shape} vs recon {recon.shape}")
        diff = recon - Tensor(tgt_cm)
        return af.tmean(diff * diff)
    if tgt.shape != recon.shape:
        raise ValueError(f"mse_loss: target {tgt.shape} vs recon {recon.shape}")
    return float(np.mean((tgt - recon) ** 2))


MSE_FLOOR = 1e-12


def psnr(target: np.ndarray | VideoClip, recon: np.ndarray) -> float:
    """10*log10(1/MSE) in dB for [0,1] signals, capped at 120 dB."""
    mse = mse_loss(target, recon)
    return float(10.0 * np.log10(1.0 / max(mse, MSE_FLOOR)))


def export_clip_pgm(clip: np.ndarray | VideoClip, directory: str | Path,
                    prefix: str = "frame") -> list[Path]:
    """Dump a clip as a numbered graymap frame sequence."""
    data = clip.data if isinstance(clip, VideoClip) else clip
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    paths = []
    for t in range(data.shape[2]):
        p = directory / f"{prefix}_{t:04d}.pgm"
        write_pgm(p, np.clip(data[:, :, t], 0.0, 1.0))
        paths.append(p)
    return paths
