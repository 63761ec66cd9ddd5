"""Learned allocation of per-pixel compression ratios.

Each pixel is a one-shot agent with the five ratios as its action space. A
trainable grid at 1/8 of the map resolution feeds a small generator (one
conv, three residual blocks, one transposed conv) producing per-pixel logits;
sampling the softmax gives the ratio map, and the policy is updated with a
score-function gradient weighted by the per-pixel rate-distortion reward.
"""
from __future__ import annotations

import csv
from pathlib import Path

import numpy as np

from . import autodiff as af
from .autodiff import ConvTranspose2d, Conv2d, ResBlock, Tensor
from .pgm import write_pgm
from .rng import stream
from .sensor import RATIO_COUNTS, RatioMap

N_ACTIONS = len(RATIO_COUNTS)
COUNT_TO_INDEX = {m: i for i, m in enumerate(RATIO_COUNTS)}
MSE_CLAMP = 1e-9


class RatioPolicy:
    """Trainable logit grid at 1/8 scale plus its upsampling generator.

    The conv and transposed-conv layers start as identity/nearest-upsample
    maps so per-cell logits receive undiluted gradients from step one; the
    shared weights then learn refinements on top. Without that, the shared
    layers absorb the map-wide mean preference much faster than cells can
    differentiate, and the softmax saturates into a uniform map.
    """

    def __init__(self, height: int, width: int, frames: int = 16, *,
                 rng: np.random.Generator | None = None):
        if height % 8 or width % 8:
            raise ValueError(f"map size {height}x{width} must be divisible by 8")
        rng = rng if rng is not None else stream("ratio-policy-init")
        self.height, self.width, self.frames = height, width, frames
        self.base = Tensor(np.zeros((N_ACTIONS, height // 8, width // 8)),
                           requires_grad=True)
        self.conv_in = Conv2d(N_ACTIONS, N_ACTIONS, 3, rng=rng, zero_init=True)
        for c in range(N_ACTIONS):
            self.conv_in.w.data[c, c, 1, 1] = 1.0
        self.blocks = [ResBlock(N_ACTIONS, rng=rng) for _ in range(3)]
        self.up = ConvTranspose2d(N_ACTIONS, N_ACTIONS, 8, stride=8, padding=0, rng=rng)
        self.up.w.data[...] = 0.0
        for c in range(N_ACTIONS):
            self.up.w.data[c, c, :, :] = 1.0

    def logits(self) -> Tensor:
        x = self.conv_in(self.base)
        for block in self.blocks:
            x = block(x)
        return self.up(x)

    def params(self) -> list[Tensor]:
        out = [self.base] + self.conv_in.params() + self.up.params()
        for block in self.blocks:
            out += block.params()
        return out


class TabularRatioPolicy:
    """Raw per-pixel logits with no generator; the bandit-oracle form used to
    validate the estimator against exhaustive expectations."""

    def __init__(self, height: int = 1, width: int = 1, n_actions: int = N_ACTIONS):
        self.height, self.width, self.frames = height, width, 16
        self.base = Tensor(np.zeros((n_actions, height, width)), requires_grad=True)

    def logits(self) -> Tensor:
        return self.base

    def params(self) -> list[Tensor]:
        return [self.base]


def ratio_probs(policy) -> Tensor:
    """Per-pixel action probabilities, shape (5, H, W); channel softmax."""
    return af.softmax(policy.logits(), axis=0)


def sample_ratio_map(probs: Tensor | np.ndarray, rng: np.random.Generator | None = None,
                     mode: str = "sample", frames: int = 16) -> RatioMap:
    """Draw a ratio map from per-pixel categoricals (or take the mode)."""
    p = probs.data if isinstance(probs, Tensor) else np.asarray(probs)
    if mode == "argmax":
        idx = p.argmax(axis=0)
    elif mode == "sample":
        if rng is None:
            raise ValueError("sample mode needs a generator")
        cdf = np.cumsum(p, axis=0)
        u = rng.random(p.shape[1:])
        idx = (u[None, :, :] >= cdf).sum(axis=0)
        idx = np.minimum(idx, p.shape[0] - 1)
    else:
        raise ValueError(f"unknown sampling mode {mode!r}")
    counts = np.asarray(RATIO_COUNTS)[idx]
    return RatioMap(counts, frames)


def ratio_reward(target: np.ndarray, recon: np.ndarray, ratio_map: RatioMap,
                 lam: float) -> np.ndarray:
    """Per-pixel reward log(1/MSE_p) - lambda * r_p * T, MSE clamped below.

    MSE_p is the mean over the T frames at pixel p; the clamp bounds the log
    at perfect reconstruction without touching non-degenerate pixels.
    """
    if lam < 0:
        raise ValueError("lambda must be nonnegative")
    if target.shape != recon.shape:
        raise ValueError(f"target {target.shape} vs recon {recon.shape}")
    mse = np.mean((target - recon) ** 2, axis=2)
    return np.log(1.0 / np.maximum(mse, MSE_CLAMP)) - lam * ratio_map.counts


def reinforce_loss(logits: Tensor, actions: np.ndarray, reward: np.ndarray) -> Tensor:
    """Negated score-function objective mean_p log P_p(a_p) * Q_p.

    ``actions`` are channel indices into the (A, H, W) logits; the reward is
    treated as a constant. Minimizing this loss ascends the expected reward.
    """
    n, h, w = logits.shape
    if actions.shape != (h, w):
        raise ValueError(f"sampled actions {actions.shape} do not match policy {(h, w)}")
    if reward.shape != (h, w):
        raise ValueError(f"reward {reward.shape} vs sampled actions {actions.shape}")
    flat = actions * (h * w) + np.arange(h * w).reshape(h, w)
    logp = af.gather_flat(af.log_softmax(logits, axis=0), flat)
    return af.neg(af.tmean(logp * Tensor(reward)))


def policy_gradient(policy, sampled: RatioMap, reward: np.ndarray,
                    baseline: np.ndarray | None = None) -> None:
    """Accumulate the score-function gradient of the mean per-pixel reward.

    ``baseline``, when given, is subtracted from the reward before weighting
    the score. Each pixel's baseline is constant in its action, so the
    expected update is unchanged (the score-function identity); it only
    removes the common-mode variance that otherwise drowns the per-pixel
    preferences at small step budgets.
    """
    if baseline is not None:
        if baseline.shape != reward.shape:
            raise ValueError(f"baseline {baseline.shape} vs reward {reward.shape}")
        reward = reward - baseline
    idx_map = np.vectorize(COUNT_TO_INDEX.__getitem__)(sampled.counts)
    reinforce_loss(policy.logits(), idx_map, reward).backward()


def policy_gradient_step(policy, sampled: RatioMap, reward: np.ndarray, optimizer,
                         baseline: np.ndarray | None = None) -> None:
    policy_gradient(policy, sampled, reward, baseline)
    optimizer.step()


class RewardBaseline:
    """Per-agent running mean of observed rewards (variance reduction)."""

    def __init__(self, decay: float = 0.9):
        self.decay = decay
        self.value: np.ndarray | None = None

    def update(self, reward: np.ndarray) -> np.ndarray:
        """Fold in a new reward grid; returns the baseline to subtract."""
        if self.value is None:
            self.value = reward.copy()
        else:
            self.value = self.decay * self.value + (1.0 - self.decay) * reward
        return self.value


def ratio_map_to_pgm(ratio_map: RatioMap, path: str | Path) -> None:
    """Five gray levels, darkest for ratio 0, brightest for 8/T."""
    idx = np.vectorize(COUNT_TO_INDEX.__getitem__)(ratio_map.counts)
    write_pgm(path, np.rint(idx * 255 / (N_ACTIONS - 1)).astype(np.uint8))


def ratio_map_to_csv(ratio_map: RatioMap, path: str | Path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        for row in ratio_map.ratios:
            writer.writerow(f"{v:.6f}" for v in row)
