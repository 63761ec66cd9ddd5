"""Small trainable building blocks shared by the surrogate networks."""
from __future__ import annotations

import numpy as np

from .tensor import Tensor, conv2d, conv2d_transpose, init_uniform, relu


class Conv2d:
    """3x3-style conv layer; ``gain`` widens the init bound (sqrt(6) keeps
    activation scale roughly constant through relu chains, which deep
    unnormalized stacks need to train in reasonable time)."""

    def __init__(self, cin: int, cout: int, k: int, *, stride: int = 1,
                 padding: int | None = None, rng: np.random.Generator,
                 zero_init: bool = False, gain: float = 1.0):
        self.stride = stride
        self.padding = k // 2 if padding is None else padding
        fan_in = cin * k * k
        if zero_init:
            self.w = Tensor(np.zeros((cout, cin, k, k)), requires_grad=True)
        else:
            self.w = Tensor(gain * init_uniform((cout, cin, k, k), fan_in, rng),
                            requires_grad=True)
        self.b = Tensor(np.zeros(cout), requires_grad=True)

    def __call__(self, x: Tensor) -> Tensor:
        return conv2d(x, self.w, self.b, stride=self.stride, padding=self.padding)

    def params(self) -> list[Tensor]:
        return [self.w, self.b]


class ConvTranspose2d:
    def __init__(self, cin: int, cout: int, k: int, *, stride: int = 1,
                 padding: int | None = None, output_padding: int = 0,
                 rng: np.random.Generator, gain: float = 1.0):
        self.stride = stride
        self.padding = k // 2 if padding is None else padding
        self.output_padding = output_padding
        fan_in = cin * k * k
        self.w = Tensor(gain * init_uniform((cin, cout, k, k), fan_in, rng),
                        requires_grad=True)
        self.b = Tensor(np.zeros(cout), requires_grad=True)

    def __call__(self, x: Tensor) -> Tensor:
        return conv2d_transpose(x, self.w, self.b, stride=self.stride,
                                padding=self.padding, output_padding=self.output_padding)

    def params(self) -> list[Tensor]:
        return [self.w, self.b]


class ResBlock:
    """Two 3x3 convs with a skip; second conv zero-initialized so the block
    starts as the identity."""

    GAIN = 6 ** 0.5  # first conv feeds a relu

    def __init__(self, channels: int, *, rng: np.random.Generator):
        self.c1 = Conv2d(channels, channels, 3, rng=rng, gain=self.GAIN)
        self.c2 = Conv2d(channels, channels, 3, rng=rng, zero_init=True)

    def __call__(self, x: Tensor) -> Tensor:
        return x + self.c2(relu(self.c1(x)))

    def params(self) -> list[Tensor]:
        return self.c1.params() + self.c2.params()


def collect_params(*modules) -> list[Tensor]:
    out: list[Tensor] = []
    for m in modules:
        out.extend(m.params())
    return out


def set_trainable(params: list[Tensor], flag: bool) -> None:
    for p in params:
        p.requires_grad = flag


def named_arrays(prefix: str, params: list[Tensor]) -> dict[str, np.ndarray]:
    """Stable names for checkpointing a parameter list."""
    return {f"{prefix}.{i:03d}": p.data for i, p in enumerate(params)}


def load_named_arrays(prefix: str, params: list[Tensor],
                      tensors: dict[str, np.ndarray]) -> None:
    for i, p in enumerate(params):
        arr = tensors[f"{prefix}.{i:03d}"]
        if arr.shape != p.data.shape:
            raise ValueError(f"checkpoint shape {arr.shape} vs param {p.data.shape}")
        p.data = arr.copy()
