"""Joint-design semantic link for captured sensor data.

A semantic-channel encoder maps packed measurements (plus the ratio map,
which both ends share) to a grid of real modulated symbols at 1/8 spatial
resolution; a rate-allocation policy chooses how many symbol channels each
location keeps; the survivors are flattened, power-normalized and sent
through the channel; the decoder rebuilds packed measurements from the noisy
symbols and the (error-free) rate map.
"""
from __future__ import annotations

import struct
from dataclasses import dataclass

import numpy as np

from . import autodiff as af
from .autodiff import Conv2d, ConvTranspose2d, ResBlock, Tensor
from .channel import ChannelConfig, power_normalize, transmit
from .ratio_policy import reinforce_loss
from .sensor import MAX_MEASUREMENTS, SensorData

MAX_SYMBOL_CHANNELS = 48
RATE_VALUES = (1, 2, 3, 4)
EXPLORE_POLICY_WEIGHT = 0.6
UE_CLAMP = 1e-9


@dataclass
class RateMap:
    """Per-location symbol budget f in {1..4}; s*f channels kept, the first
    ones in channel order."""

    f: np.ndarray  # (H/8, W/8)
    symbols_per_unit: int = 12  # 6 in the low-rate regime

    def __post_init__(self):
        self.f = np.asarray(self.f, dtype=np.int64)
        if self.symbols_per_unit not in (6, 12):
            raise ValueError(f"symbols per unit must be 6 or 12, got {self.symbols_per_unit}")
        bad = np.setdiff1d(np.unique(self.f), RATE_VALUES)
        if bad.size:
            raise ValueError(f"rate values {bad.tolist()} outside {{1..4}}")

    @property
    def kept(self) -> np.ndarray:
        return self.symbols_per_unit * self.f

    @property
    def n_z(self) -> int:
        return int(self.kept.sum())


class SemCoders:
    """Symmetric semantic-channel encoder/decoder pair.

    Encoder: embedding conv, three stride-2 stages of [downsample + 2
    residual blocks], mapping conv to the symbol channels. Decoder mirrors it
    with transposed convolutions, taking the rate plane as an extra input.
    """

    def __init__(self, height: int, width: int, *, channels: int = MAX_SYMBOL_CHANNELS,
                 rng: np.random.Generator, widths: tuple[int, int, int] = (32, 32, 48)):
        if height % 8 or width % 8:
            raise ValueError(f"geometry {height}x{width} must be divisible by 8")
        if channels > MAX_SYMBOL_CHANNELS:
            raise ValueError(f"symbol channels {channels} exceed {MAX_SYMBOL_CHANNELS}")
        self.height, self.width, self.channels = height, width, channels
        w1, w2, w3 = widths
        cin = MAX_MEASUREMENTS + 1  # packed measurements + ratio plane

        gain = ResBlock.GAIN  # every conv below feeds a relu except the maps
        self.enc_embed = Conv2d(cin, w1, 3, rng=rng, gain=gain)
        self.enc_stages = []
        for win, wout in ((w1, w1), (w1, w2), (w2, w3)):
            self.enc_stages.append((
                Conv2d(win, wout, 3, stride=2, padding=1, rng=rng, gain=gain),
                ResBlock(wout, rng=rng),
                ResBlock(wout, rng=rng),
            ))
        self.enc_map = Conv2d(w3, channels, 3, rng=rng)

        self.dec_embed = Conv2d(channels + 1, w3, 3, rng=rng, gain=gain)
        self.dec_stages = []
        for win, wout in ((w3, w2), (w2, w1), (w1, w1)):
            self.dec_stages.append((
                ResBlock(win, rng=rng),
                ResBlock(win, rng=rng),
                ConvTranspose2d(win, wout, 3, stride=2, padding=1,
                                output_padding=1, rng=rng, gain=gain),
            ))
        self.dec_map = Conv2d(w1, MAX_MEASUREMENTS, 3, rng=rng)

    def encoder_params(self) -> list[Tensor]:
        out = self.enc_embed.params() + self.enc_map.params()
        for stage in self.enc_stages:
            for mod in stage:
                out += mod.params()
        return out

    def decoder_params(self) -> list[Tensor]:
        out = self.dec_embed.params() + self.dec_map.params()
        for stage in self.dec_stages:
            for mod in stage:
                out += mod.params()
        return out

    def params(self) -> list[Tensor]:
        return self.encoder_params() + self.decoder_params()


def sce_encode(data: SensorData, coders: SemCoders) -> Tensor:
    """Packed measurements -> symbol block X of shape (C, H/8, W/8)."""
    h, w = data.height, data.width
    if h % 8 or w % 8:
        raise ValueError(f"sensor data {h}x{w} not divisible by 8")
    if (h, w) != (coders.height, coders.width):
        raise ValueError(f"data {h}x{w} vs coders {coders.height}x{coders.width}")
    # measurements carry a 1/T integration factor; undo it so the network
    # sees O(1) inputs and the normalized symbol power is well-conditioned
    planes = np.concatenate([data.packed.transpose(2, 0, 1) * data.frames,
                             (data.counts / data.frames)[None, :, :]], axis=0)
    x = af.relu(coders.enc_embed(Tensor(planes)))
    for down, res1, res2 in coders.enc_stages:
        x = res2(res1(af.relu(down(x))))
    return coders.enc_map(x)


def scd_decode(x_tilde: Tensor, rate_map: RateMap | None, coders: SemCoders) -> Tensor:
    """Received symbols (+ rate plane) -> packed measurements (8, H, W)."""
    if rate_map is None:
        plane = np.ones((1,) + tuple(x_tilde.shape[1:]))
    else:
        if rate_map.f.shape != tuple(x_tilde.shape[1:]):
            raise ValueError(f"rate map {rate_map.f.shape} vs symbols {x_tilde.shape}")
        plane = (rate_map.f / max(RATE_VALUES))[None, :, :]
    x = af.concat([x_tilde, Tensor(plane)], axis=0)
    x = af.relu(coders.dec_embed(x))
    for res1, res2, up in coders.dec_stages:
        x = af.relu(up(res2(res1(x))))
    return coders.dec_map(x)


class RanPolicy:
    """Rate-allocation network: two convolutions over the symbol block
    producing 4-way logits per location, sampled with optional exploration
    mixing toward uniform.

    The symbol block is standardized to unit RMS before the convolutions:
    the power constraint makes the link loss invariant to the block's
    scale, so its norm drifts freely during training and would otherwise
    run the logits out of range.
    """

    def __init__(self, *, rng: np.random.Generator, channels: int = MAX_SYMBOL_CHANNELS,
                 hidden: int = 16, explore_uniform_weight: float = 0.4):
        self.c1 = Conv2d(channels, hidden, 3, rng=rng, gain=ResBlock.GAIN)
        self.c2 = Conv2d(hidden, len(RATE_VALUES), 3, rng=rng)
        self.explore_uniform_weight = explore_uniform_weight

    def logits(self, x: Tensor) -> Tensor:
        rms = float(np.sqrt(np.mean(x.data ** 2))) + 1e-12
        return self.c2(af.relu(self.c1(x * (1.0 / rms))))

    def probs(self, x: Tensor) -> Tensor:
        return af.softmax(self.logits(x), axis=0)

    def params(self) -> list[Tensor]:
        return self.c1.params() + self.c2.params()


def sample_rate_map(p_f: Tensor | np.ndarray, rng: np.random.Generator | None = None,
                    explore: bool = False, mode: str = "sample",
                    symbols_per_unit: int = 12) -> RateMap:
    """Draw per-location rates from P_F, optionally mixed with uniform."""
    p = p_f.data if isinstance(p_f, Tensor) else np.asarray(p_f)
    n = p.shape[0]
    if mode == "argmax":
        idx = p.argmax(axis=0)
    elif mode == "sample":
        if rng is None:
            raise ValueError("sample mode needs a generator")
        if explore:
            w = EXPLORE_POLICY_WEIGHT
            p = w * p + (1.0 - w) / n
        cdf = np.cumsum(p, axis=0)
        u = rng.random(p.shape[1:])
        idx = np.minimum((u[None, :, :] >= cdf).sum(axis=0), n - 1)
    else:
        raise ValueError(f"unknown sampling mode {mode!r}")
    return RateMap(np.asarray(RATE_VALUES)[idx], symbols_per_unit)


def _mask_indices(channels: int, shape: tuple[int, int], kept: np.ndarray) -> np.ndarray:
    """Flat channel-major indices of kept symbols in transmission order:
    row-major over locations, channel order within a location."""
    h, w = shape
    n_loc = h * w
    grid_c = np.broadcast_to(np.arange(channels), (n_loc, channels))
    grid_p = np.broadcast_to(np.arange(n_loc)[:, None], (n_loc, channels))
    keep = grid_c < kept.reshape(-1)[:, None]
    return (grid_c * n_loc + grid_p)[keep]


def mask_and_flatten(x: Tensor, rate_map: RateMap | None) -> tuple[Tensor, int]:
    """Keep the first s*f symbol channels per location and flatten.

    With no rate map every channel is kept (the fixed-rate baselines).
    Returns (Z, n_z).
    """
    c, h, w = x.shape
    if rate_map is None:
        kept = np.full((h, w), c)
    else:
        if rate_map.f.shape != (h, w):
            raise ValueError(f"rate map {rate_map.f.shape} vs symbols {(h, w)}")
        kept = rate_map.kept
        if kept.max() > c:
            raise ValueError(f"rate map keeps {kept.max()} of {c} channels")
    idx = _mask_indices(c, (h, w), kept)
    z = af.gather_flat(x, idx)
    return z, int(idx.size)


def unflatten(z_tilde: Tensor, rate_map: RateMap | None, channels: int,
              shape: tuple[int, int]) -> Tensor:
    """Inverse placement of mask_and_flatten; masked channels become zeros.

    A length mismatch is rejected: it is the unrecoverable rate-corruption
    case the side channel exists to prevent.
    """
    h, w = shape
    kept = np.full((h, w), channels) if rate_map is None else rate_map.kept
    if kept.max() > channels:
        raise ValueError(f"rate map keeps {kept.max()} of {channels} channels")
    idx = _mask_indices(channels, (h, w), kept)
    if z_tilde.size != idx.size:
        raise ValueError(f"symbol vector length {z_tilde.size} != expected {idx.size}")
    return af.reshape(af.scatter_flat(z_tilde, idx, (channels * h * w,)), (channels, h, w))


def ran_reward(target: np.ndarray, recon: np.ndarray, rate_map: RateMap,
               mu: float) -> np.ndarray:
    """Per-location reward log(1/U~) - mu*f, with U~ the 8x8 spatial pool of
    the squared error (mean over frames), clamped below."""
    if mu < 0:
        raise ValueError("mu must be nonnegative")
    if target.shape != recon.shape:
        raise ValueError(f"target {target.shape} vs recon {recon.shape}")
    err = np.mean((target - recon) ** 2, axis=2)
    h, w = err.shape
    pooled = err.reshape(h // 8, 8, w // 8, 8).mean(axis=(1, 3))
    if pooled.shape != rate_map.f.shape:
        raise ValueError(f"pooled error {pooled.shape} vs rate map {rate_map.f.shape}")
    return np.log(1.0 / np.maximum(pooled, UE_CLAMP)) - mu * rate_map.f


def ran_gradient(ran: RanPolicy, x: Tensor, sampled: RateMap, reward: np.ndarray,
                 baseline: np.ndarray | None = None) -> None:
    """Score-function gradient on the RAN parameters; the symbol block is
    state, not a differentiation path. The optional per-location baseline is
    action-independent, so the expected update is untouched."""
    if baseline is not None:
        if baseline.shape != reward.shape:
            raise ValueError(f"baseline {baseline.shape} vs reward {reward.shape}")
        reward = reward - baseline
    actions = sampled.f - 1
    reinforce_loss(ran.logits(x.detach()), actions, reward).backward()


def ran_gradient_step(ran: RanPolicy, x: Tensor, sampled: RateMap,
                      reward: np.ndarray, optimizer,
                      baseline: np.ndarray | None = None) -> None:
    ran_gradient(ran, x, sampled, reward, baseline)
    optimizer.step()


# ---------------------------------------------------------------------------
# rate-map side channel (error-free by assumption; 2 bits per element)

def encode_rate_map_bits(rate_map: RateMap) -> bytes:
    values = (rate_map.f.reshape(-1) - 1).astype(np.uint8)
    bits = np.zeros(values.size * 2, dtype=np.uint8)
    bits[0::2] = values >> 1
    bits[1::2] = values & 1
    return np.packbits(bits).tobytes()


def decode_rate_map_bits(blob: bytes, shape: tuple[int, int],
                         symbols_per_unit: int = 12) -> RateMap:
    n = shape[0] * shape[1]
    bits = np.unpackbits(np.frombuffer(blob, dtype=np.uint8), count=2 * n)
    values = (bits[0::2] << 1) | bits[1::2]
    return RateMap(values.reshape(shape).astype(np.int64) + 1, symbols_per_unit)


# ---------------------------------------------------------------------------
# serialized transmission record (debug/replay)

_RECORD_HEADER = struct.Struct("<4sIIHQ")
_RECORD_MAGIC = b"VTXR"


def write_transmission_record(height: int, width: int, rate_map: RateMap,
                              symbols: np.ndarray, seed: int) -> bytes:
    f_bits = encode_rate_map_bits(rate_map)
    header = _RECORD_HEADER.pack(_RECORD_MAGIC, height, width,
                                 rate_map.symbols_per_unit, seed)
    return header + f_bits + np.asarray(symbols, dtype="<f8").tobytes()


def read_transmission_record(blob: bytes) -> dict:
    magic, height, width, s, seed = _RECORD_HEADER.unpack_from(blob, 0)
    if magic != _RECORD_MAGIC:
        raise ValueError(f"bad transmission record magic {magic!r}")
    off = _RECORD_HEADER.size
    shape = (height // 8, width // 8)
    n_f_bytes = (2 * shape[0] * shape[1] + 7) // 8
    rate_map = decode_rate_map_bits(blob[off:off + n_f_bytes], shape, s)
    off += n_f_bytes
    symbols = np.frombuffer(blob, dtype="<f8", offset=off).copy()
    if symbols.size != rate_map.n_z:
        raise ValueError(f"record carries {symbols.size} symbols, rate map says {rate_map.n_z}")
    return {"height": height, "width": width, "seed": seed,
            "rate_map": rate_map, "symbols": symbols}


def link_round_trip(data: SensorData, coders: SemCoders, rate_map: RateMap | None,
                    channel_cfg: ChannelConfig, rng: np.random.Generator,
                    strict_norm: bool = False) -> tuple[Tensor, dict]:
    """Full differentiable link: encode, mask, normalize, transmit, decode.

    Returns the reconstructed packed measurements (8, H, W) and the
    intermediate pieces (symbol block, flattened vector, symbol count).
    """
    x = sce_encode(data, coders)
    z, n_z = mask_and_flatten(x, rate_map)
    z_hat = power_normalize(z, strict=strict_norm)
    z_tilde = transmit(z_hat, channel_cfg, rng)
    x_tilde = unflatten(z_tilde, rate_map, coders.channels, tuple(x.shape[1:]))
    i_tilde = scd_decode(x_tilde, rate_map, coders)
    return i_tilde, {"x": x, "z": z, "n_z": n_z}
