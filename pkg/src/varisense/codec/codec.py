"""Task-aware codec: transform, quantize, entropy-code, and the rate loss.

Inference rounds the latents and range-codes them under the learned models;
training replaces rounding with additive uniform noise so the rate term stays
differentiable. Streams are framed in a checksummed container so truncation
or corruption is detected instead of decoding garbage.
"""
from __future__ import annotations

import struct
import zlib
from dataclasses import dataclass

import numpy as np

from .. import autodiff as af
from ..autodiff import Tensor
from ..reconstruction import mse_loss
from ..sensor import SensorData
from .entropy import (
    SIGMA_MIN,
    ConditionalGaussian,
    FactorizedEntropy,
    from_symbols,
    gaussian_box_prob,
    to_symbols,
)
from .rangecoder import range_code, range_decode
from .transforms import CodecTransforms


class CodecModel:
    def __init__(self, height: int, width: int, *, rng: np.random.Generator,
                 channels: int = 48, frames: int = 16):
        self.transforms = CodecTransforms(height, width, rng=rng, channels=channels)
        self.factorized = FactorizedEntropy(channels)
        self.frames = frames

    def params(self) -> list[Tensor]:
        return self.transforms.params() + self.factorized.params()


def _packed_to_input(data: SensorData, frames: int) -> np.ndarray:
    return data.packed.transpose(2, 0, 1) * frames


def _sigma_numpy(raw: np.ndarray) -> np.ndarray:
    return np.logaddexp(0.0, raw) + SIGMA_MIN


def _z_tables(model: CodecModel) -> np.ndarray:
    """Per-element cumulative tables for the side latent (channel-major)."""
    per_channel = model.factorized.cdf_tables()
    c, hz, wz = model.transforms.side_shape
    return np.repeat(per_channel, hz * wz, axis=0)


def encode(data: SensorData, model: CodecModel) -> tuple[bytes, bytes]:
    """Compress packed measurements into (main, side) bitstreams."""
    x = Tensor(_packed_to_input(data, model.frames))
    y = model.transforms.g_a(x).data
    z = model.transforms.h_a(Tensor(y)).data
    y_hat, z_hat = np.rint(y), np.rint(z)

    sym_z = to_symbols(z_hat).reshape(-1)
    stream_z = range_code(sym_z, _z_tables(model))

    mu_t, raw_t = model.transforms.h_s(Tensor(z_hat))
    mu, sigma = mu_t.data, _sigma_numpy(raw_t.data)
    sym_y = to_symbols(y_hat).reshape(-1)
    stream_y = range_code(sym_y, ConditionalGaussian.cdf_tables(mu, sigma))
    return stream_y, stream_z


def decode(stream_y: bytes, stream_z: bytes, model: CodecModel) -> np.ndarray:
    """Bitstreams -> packed measurements (H, W, 8); exact latent recovery."""
    c, hz, wz = model.transforms.side_shape
    sym_z = range_decode(stream_z, _z_tables(model), c * hz * wz)
    z_hat = from_symbols(sym_z).reshape(c, hz, wz)

    mu_t, raw_t = model.transforms.h_s(Tensor(z_hat))
    mu, sigma = mu_t.data, _sigma_numpy(raw_t.data)
    cy, hy, wy = model.transforms.latent_shape
    sym_y = range_decode(stream_y, ConditionalGaussian.cdf_tables(mu, sigma), cy * hy * wy)
    y_hat = from_symbols(sym_y).reshape(cy, hy, wy)

    packed_scaled = model.transforms.g_s(Tensor(y_hat)).data
    return packed_scaled.transpose(1, 2, 0) / model.frames


def ideal_bits(data: SensorData, model: CodecModel) -> float:
    """-sum log2 P of the rounded latents under the real-valued models (the
    entropy oracle the measured stream lengths are held against)."""
    x = Tensor(_packed_to_input(data, model.frames))
    y = model.transforms.g_a(x)
    z = model.transforms.h_a(y)
    y_hat, z_hat = np.rint(y.data), np.rint(z.data)
    bits_z = model.factorized.bits(Tensor(z_hat)).item()
    mu_t, raw_t = model.transforms.h_s(Tensor(z_hat))
    p_y = gaussian_box_prob(y_hat, mu_t.data, _sigma_numpy(raw_t.data))
    return bits_z + float(-np.log2(p_y).sum())


def relaxed_forward(data: SensorData, model: CodecModel,
                    rng: np.random.Generator) -> tuple[Tensor, Tensor, Tensor]:
    """Training pass: additive-uniform-noise quantization relaxation.

    Returns (decoded packed measurements (8,H,W), bits_y, bits_z), all
    differentiable w.r.t. the model parameters.
    """
    x = Tensor(_packed_to_input(data, model.frames))
    y = model.transforms.g_a(x)
    y_noisy = y + Tensor(rng.uniform(-0.5, 0.5, size=y.shape))
    z = model.transforms.h_a(y)
    z_noisy = z + Tensor(rng.uniform(-0.5, 0.5, size=z.shape))

    bits_z = model.factorized.bits(z_noisy)
    mu, raw = model.transforms.h_s(z_noisy)
    sigma = ConditionalGaussian.sigma_from_raw(raw)
    bits_y = ConditionalGaussian.bits(y_noisy, mu, sigma)

    i_tilde = model.transforms.g_s(y_noisy) * (1.0 / model.frames)
    return i_tilde, bits_y, bits_z


def rd_loss(target, recon, bits_y, bits_z, beta: float):
    """Distortion plus beta times the (estimated) coding cost."""
    if beta < 0:
        raise ValueError("beta must be nonnegative")
    distortion = mse_loss(target, recon)
    rate = (bits_y + bits_z) if isinstance(bits_y, Tensor) else bits_y + bits_z
    return distortion + rate * beta


# ---------------------------------------------------------------------------
# container framing

_MAGIC = b"VCTC"
_VERSION = 1
_HEADER = struct.Struct("<4sHIIIIII")  # magic, ver, H, W, len_z, len_y, crc_z, crc_y


def write_container(stream_y: bytes, stream_z: bytes, height: int, width: int) -> bytes:
    header = _HEADER.pack(_MAGIC, _VERSION, height, width, len(stream_z),
                          len(stream_y), zlib.crc32(stream_z), zlib.crc32(stream_y))
    return header + stream_z + stream_y


def read_container(blob: bytes) -> tuple[bytes, bytes, int, int]:
    if len(blob) < _HEADER.size:
        raise ValueError("container truncated: header incomplete")
    magic, version, height, width, len_z, len_y, crc_z, crc_y = _HEADER.unpack_from(blob, 0)
    if magic != _MAGIC:
        raise ValueError(f"bad container magic {magic!r}")
    if version != _VERSION:
        raise ValueError(f"unsupported container version {version}")
    if len(blob) != _HEADER.size + len_z + len_y:
        raise ValueError("container truncated: payload length mismatch")
    stream_z = blob[_HEADER.size:_HEADER.size + len_z]
    stream_y = blob[_HEADER.size + len_z:]
    if zlib.crc32(stream_z) != crc_z or zlib.crc32(stream_y) != crc_y:
        raise ValueError("container checksum mismatch")
    return stream_y, stream_z, height, width
