"""Entropy models for the quantized latents.

The side latent uses a factorized model: an independent logistic per
channel with learnable location and scale. The main latent uses a
conditional Gaussian whose per-element (mu, sigma) come from the
hyper-synthesis transform. Both floor symbol probabilities at 2^-16 so the
range coder stays stable, and both expose real-valued likelihoods (for
training bits and the ideal-entropy oracle) plus quantized tables for
coding.
"""
from __future__ import annotations

import math

import numpy as np
from scipy.special import erf as np_erf

from .. import autodiff as af
from ..autodiff import Tensor

P_MIN = 2.0 ** -16
SIGMA_MIN = 1e-2
SUPPORT = 255  # symbols cover integers in [-SUPPORT, SUPPORT]
LOG2 = math.log(2.0)


def _sigmoid(x: Tensor) -> Tensor:
    return af.div(Tensor(np.array(1.0)), af.exp(af.neg(x)) + 1.0)


def _floor_prob(p: Tensor) -> Tensor:
    # max(p, P_MIN) written with primitives: P_MIN + relu(p - P_MIN)
    return af.relu(p - P_MIN) + P_MIN


def _softplus(x: Tensor) -> Tensor:
    # relu(x) + log1p(exp(-|x|)), overflow-safe
    mag = af.relu(x) + af.relu(af.neg(x))
    return af.relu(x) + af.log(af.exp(af.neg(mag)) + 1.0)


def bits_from_likelihood(p: Tensor) -> Tensor:
    return af.neg(af.tsum(af.log(p))) * (1.0 / LOG2)


class FactorizedEntropy:
    """Learnable per-channel logistic box probabilities."""

    def __init__(self, channels: int):
        self.channels = channels
        self.loc = Tensor(np.zeros(channels), requires_grad=True)
        self.log_scale = Tensor(np.zeros(channels), requires_grad=True)

    def params(self) -> list[Tensor]:
        return [self.loc, self.log_scale]

    def likelihood(self, z: Tensor) -> Tensor:
        """P(round(z)) under the box integral, shape (C, h, w), floored."""
        c = z.shape[0]
        loc = af.reshape(self.loc, (c, 1, 1))
        inv_s = af.exp(af.neg(af.reshape(self.log_scale, (c, 1, 1))))
        upper = _sigmoid(af.mul(z - loc + 0.5, inv_s))
        lower = _sigmoid(af.mul(z - loc - 0.5, inv_s))
        return _floor_prob(upper - lower)

    def bits(self, z: Tensor) -> Tensor:
        return bits_from_likelihood(self.likelihood(z))

    def cdf_tables(self) -> np.ndarray:
        """Quantized per-channel cumulative tables over the integer support."""
        from .rangecoder import quantize_cdf

        edges = np.arange(-SUPPORT, SUPPORT + 2) - 0.5  # (2*SUPPORT+2,)
        loc = self.loc.data[:, None]
        scale = np.exp(self.log_scale.data)[:, None]
        cdf = 1.0 / (1.0 + np.exp(-(edges[None, :] - loc) / scale))
        probs = np.maximum(np.diff(cdf, axis=1), P_MIN)
        return quantize_cdf(probs)


def gaussian_box_prob(y: np.ndarray, mu: np.ndarray, sigma: np.ndarray) -> np.ndarray:
    """Real-valued model probability of the rounded symbols (numpy path)."""
    sigma = np.maximum(sigma, SIGMA_MIN)
    upper = 0.5 * (1.0 + np_erf((y + 0.5 - mu) / (sigma * math.sqrt(2.0))))
    lower = 0.5 * (1.0 + np_erf((y - 0.5 - mu) / (sigma * math.sqrt(2.0))))
    return np.maximum(upper - lower, P_MIN)


class ConditionalGaussian:
    """Gaussian box probabilities with externally supplied (mu, sigma)."""

    @staticmethod
    def sigma_from_raw(raw: Tensor) -> Tensor:
        return _softplus(raw) + SIGMA_MIN

    @staticmethod
    def likelihood(y: Tensor, mu: Tensor, sigma: Tensor) -> Tensor:
        inv = af.div(Tensor(np.array(1.0)), sigma * math.sqrt(2.0))
        upper = af.erf(af.mul(y - mu + 0.5, inv)) * 0.5 + 0.5
        lower = af.erf(af.mul(y - mu - 0.5, inv)) * 0.5 + 0.5
        return _floor_prob(upper - lower)

    @staticmethod
    def bits(y: Tensor, mu: Tensor, sigma: Tensor) -> Tensor:
        return bits_from_likelihood(ConditionalGaussian.likelihood(y, mu, sigma))

    @staticmethod
    def cdf_tables(mu: np.ndarray, sigma: np.ndarray) -> np.ndarray:
        """Quantized per-element cumulative tables, one row per element."""
        from .rangecoder import quantize_cdf

        mu = mu.reshape(-1)[:, None]
        sigma = np.maximum(sigma.reshape(-1), SIGMA_MIN)[:, None]
        edges = (np.arange(-SUPPORT, SUPPORT + 2) - 0.5)[None, :]
        cdf = 0.5 * (1.0 + np_erf((edges - mu) / (sigma * math.sqrt(2.0))))
        probs = np.maximum(np.diff(cdf, axis=1), P_MIN)
        return quantize_cdf(probs)


def to_symbols(values: np.ndarray) -> np.ndarray:
    """Rounded latents -> nonnegative table indices; range-checked."""
    rounded = np.rint(values).astype(np.int64)
    if np.any(np.abs(rounded) > SUPPORT):
        raise ValueError(f"latent magnitude exceeds coder support {SUPPORT}")
    return rounded + SUPPORT


def from_symbols(symbols: np.ndarray) -> np.ndarray:
    return symbols.astype(np.float64) - SUPPORT
