"""Analysis/synthesis transform pairs for task-aware compression.

g_a maps packed measurements down five stride-2 stages to the main latent at
1/32 resolution; h_a takes two more stride-2 steps to the side latent. The
synthesis pair mirrors them with transposed convolutions whose output padding
is chosen per stage to undo the ceil-division of odd sizes exactly, so any
geometry down to 1x1 latents round-trips.
"""
from __future__ import annotations

import numpy as np

from .. import autodiff as af
from ..autodiff import Conv2d, ConvTranspose2d, Tensor
from ..sensor import MAX_MEASUREMENTS

GA_WIDTHS = (16, 16, 24, 32, 40, 48)  # embed width + five stage outputs


def _down_size(size: int) -> int:
    # k=3, stride=2, padding=1
    return (size + 1) // 2


def _up_padding(in_size: int, target: int) -> int:
    out_base = (in_size - 1) * 2 - 2 + 3
    opad = target - out_base
    if opad not in (0, 1):
        raise ValueError(f"cannot reach size {target} from {in_size} with stride 2")
    return opad


class CodecTransforms:
    def __init__(self, height: int, width: int, *, rng: np.random.Generator,
                 channels: int = 48):
        self.height, self.width, self.channels = height, width, channels
        widths = GA_WIDTHS[:-1] + (channels,)

        # main chain sizes: (H, W) through five downsamplings
        self.ga_sizes = [(height, width)]
        for _ in range(5):
            h, w = self.ga_sizes[-1]
            self.ga_sizes.append((_down_size(h), _down_size(w)))
        # hyper chain: two more downsamplings from the latent size
        self.ha_sizes = [self.ga_sizes[-1]]
        for _ in range(2):
            h, w = self.ha_sizes[-1]
            self.ha_sizes.append((_down_size(h), _down_size(w)))

        gain = 6 ** 0.5  # relu-fed convs keep activation scale through depth
        self.ga_embed = Conv2d(MAX_MEASUREMENTS, widths[0], 3, rng=rng, gain=gain)
        self.ga_downs = [Conv2d(widths[i], widths[i + 1], 3, stride=2, padding=1,
                                rng=rng, gain=gain if i < 4 else 1.0)
                         for i in range(5)]

        self.gs_ups = []
        for i in range(5, 0, -1):
            th, tw = self.ga_sizes[i - 1]
            sh, sw = self.ga_sizes[i]
            self.gs_ups.append(ConvTranspose2d(
                widths[i], widths[i - 1], 3, stride=2, padding=1,
                output_padding=_up_padding(sh, th), rng=rng, gain=gain))
        self.gs_map = Conv2d(widths[0], MAX_MEASUREMENTS, 3, rng=rng)

        self.ha_downs = [Conv2d(channels, channels, 3, stride=2, padding=1,
                                rng=rng, gain=gain if i < 1 else 1.0)
                         for i in range(2)]
        self.hs_ups = []
        for i in range(2, 0, -1):
            th, _ = self.ha_sizes[i - 1]
            sh, _ = self.ha_sizes[i]
            self.hs_ups.append(ConvTranspose2d(
                channels, channels, 3, stride=2, padding=1,
                output_padding=_up_padding(sh, th), rng=rng, gain=gain))
        self.hs_mu = Conv2d(channels, channels, 3, rng=rng)
        self.hs_sigma = Conv2d(channels, channels, 3, rng=rng)

    @property
    def latent_shape(self) -> tuple[int, int, int]:
        h, w = self.ga_sizes[-1]
        return (self.channels, h, w)

    @property
    def side_shape(self) -> tuple[int, int, int]:
        h, w = self.ha_sizes[-1]
        return (self.channels, h, w)

    def g_a(self, x: Tensor) -> Tensor:
        x = af.relu(self.ga_embed(x))
        for i, down in enumerate(self.ga_downs):
            x = down(x)
            if i < len(self.ga_downs) - 1:
                x = af.relu(x)
        return x

    def g_s(self, y: Tensor) -> Tensor:
        x = y
        for up in self.gs_ups:
            x = af.relu(up(x))
        return self.gs_map(x)

    def h_a(self, y: Tensor) -> Tensor:
        x = af.relu(self.ha_downs[0](y))
        return self.ha_downs[1](x)

    def h_s(self, z: Tensor) -> tuple[Tensor, Tensor]:
        x = z
        for up in self.hs_ups:
            x = af.relu(up(x))
        return self.hs_mu(x), self.hs_sigma(x)

    def analysis_params(self) -> list[Tensor]:
        out = self.ga_embed.params()
        for m in self.ga_downs + self.ha_downs:
            out += m.params()
        return out

    def synthesis_params(self) -> list[Tensor]:
        out = self.gs_map.params() + self.hs_mu.params() + self.hs_sigma.params()
        for m in self.gs_ups + self.hs_ups:
            out += m.params()
        return out

    def params(self) -> list[Tensor]:
        return self.analysis_params() + self.synthesis_params()
