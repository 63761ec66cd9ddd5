import numpy as np
import pytest
from scipy.stats import norm

import varisense.autodiff as af
from varisense.autodiff import Tensor
from varisense.codec import (
    SUPPORT,
    CodecModel,
    CodecTransforms,
    ConditionalGaussian,
    FactorizedEntropy,
    decode,
    encode,
    gaussian_box_prob,
    ideal_bits,
    range_decode,
    rd_loss,
    read_container,
    relaxed_forward,
    write_container,
)
from varisense.rng import stream
from varisense.sensor import NoiseConfig, RatioMap, capture
from varisense.video import SceneSpec, synthesize

from gradcheck import check_gradients


def _sensor_data(h, w, key="codec"):
    clip = synthesize(SceneSpec(kind="mixed", seed=hash(key) % 2**31), h, w, 16)
    return capture(clip, RatioMap.uniform(h, w, 8),
                   noise=NoiseConfig(enabled=False))


def test_factorized_likelihood_normalizes():
    model = FactorizedEntropy(3)
    model.loc.data[:] = [0.0, 1.5, -2.0]
    model.log_scale.data[:] = [0.0, 0.7, -0.3]
    support = np.arange(-SUPPORT, SUPPORT + 1, dtype=float)
    z = Tensor(np.broadcast_to(support, (3, 1, support.size)).copy())
    p = model.likelihood(z).data
    # box probabilities over the integers telescope to ~1 (floor adds a hair)
    assert np.all(np.abs(p.sum(axis=2) - 1.0) < 1e-2)
    assert p.min() >= 2.0 ** -16


def test_factorized_gradient():
    model = FactorizedEntropy(2)
    rng = stream("fact-grad")
    z = rng.standard_normal((2, 3, 3))

    def build(loc, log_scale):
        model.loc = loc
        model.log_scale = log_scale
        return model.bits(Tensor(z))

    assert check_gradients(build, [np.array([0.1, -0.2]), np.array([0.3, 0.0])]) < 1e-5


def test_gaussian_box_matches_scipy():
    rng = stream("gauss")
    y = rng.integers(-5, 6, size=50).astype(float)
    mu = rng.standard_normal(50)
    sigma = 0.5 + rng.random(50)
    ours = gaussian_box_prob(y, mu, sigma)
    ref = norm.cdf(y + 0.5, mu, sigma) - norm.cdf(y - 0.5, mu, sigma)
    assert np.allclose(ours, np.maximum(ref, 2.0 ** -16), atol=1e-12)

    # sigma floor applies
    tiny = gaussian_box_prob(np.zeros(1), np.zeros(1), np.array([1e-9]))
    explicit = norm.cdf(0.5, 0, 1e-2) - norm.cdf(-0.5, 0, 1e-2)
    assert tiny[0] == pytest.approx(explicit)


def test_gaussian_likelihood_gradient():
    rng = stream("gauss-grad")
    y = rng.standard_normal((2, 2, 2))
    mu0 = rng.standard_normal((2, 2, 2))
    raw0 = rng.standard_normal((2, 2, 2))

    def build(mu, raw):
        sigma = ConditionalGaussian.sigma_from_raw(raw)
        return ConditionalGaussian.bits(Tensor(y), mu, sigma)

    assert check_gradients(build, [mu0, raw0]) < 1e-5


def test_transform_geometry_64():
    t = CodecTransforms(64, 64, rng=stream("geom"))
    assert t.latent_shape == (48, 2, 2)
    assert t.side_shape == (48, 1, 1)
    x = Tensor(stream("geom-x").standard_normal((8, 64, 64)))
    y = t.g_a(x)
    assert y.shape == (48, 2, 2)
    z = t.h_a(y)
    assert z.shape == (48, 1, 1)
    mu, raw = t.h_s(z)
    assert mu.shape == (48, 2, 2) and raw.shape == (48, 2, 2)
    assert t.g_s(y).shape == (8, 64, 64)


def test_transform_geometry_odd_sizes():
    # 24 -> 12 -> 6 -> 3 -> 2 -> 1; hyper 1 -> 1 -> 1
    t = CodecTransforms(24, 24, rng=stream("geom-odd"), channels=8)
    x = Tensor(stream("geom-odd-x").standard_normal((8, 24, 24)))
    y = t.g_a(x)
    assert y.shape == (8, 1, 1)
    assert t.g_s(y).shape == (8, 24, 24)
    mu, _ = t.h_s(t.h_a(y))
    assert mu.shape == (8, 1, 1)


def test_codec_round_trip_latents_exact():
    rng = stream("codec-rt")
    model = CodecModel(16, 16, rng=rng, channels=6)
    data = _sensor_data(16, 16)
    stream_y, stream_z = encode(data, model)
    packed = decode(stream_y, stream_z, model)
    assert packed.shape == (16, 16, 8)
    # decode determinism: byte-identical second pass
    stream_y2, stream_z2 = encode(data, model)
    assert stream_y == stream_y2 and stream_z == stream_z2
    assert np.array_equal(decode(stream_y, stream_z, model), packed)


def test_codec_random_latents_round_trip_and_entropy_bound():
    rng = stream("codec-random")
    model = CodecModel(16, 16, rng=rng, channels=6)
    # nudge the factorized model away from its init
    model.factorized.loc.data[:] = rng.standard_normal(6) * 0.5
    model.factorized.log_scale.data[:] = rng.uniform(-0.5, 0.5, 6)
    for trial in range(25):
        data = _sensor_data(16, 16, key=f"rt-{trial}")
        data.packed[...] += 0.02 * rng.standard_normal(data.packed.shape)
        data.packed[...] = np.abs(data.packed)
        stream_y, stream_z = encode(data, model)
        measured = 8 * (len(stream_y) + len(stream_z))
        assert measured <= ideal_bits(data, model) * 1.01 + 64
        decode(stream_y, stream_z, model)


def test_container_round_trip_and_corruption():
    rng = stream("container")
    model = CodecModel(16, 16, rng=rng, channels=6)
    data = _sensor_data(16, 16, key="container")
    stream_y, stream_z = encode(data, model)
    blob = write_container(stream_y, stream_z, 16, 16)
    ry, rz, h, w = read_container(blob)
    assert (ry, rz, h, w) == (stream_y, stream_z, 16, 16)

    corrupted = bytearray(blob)
    corrupted[-1] ^= 0xFF
    with pytest.raises(ValueError, match="checksum"):
        read_container(bytes(corrupted))
    with pytest.raises(ValueError, match="truncated"):
        read_container(blob[:-3])
    with pytest.raises(ValueError, match="magic"):
        read_container(b"XXXX" + blob[4:])


def test_relaxed_forward_differentiable():
    rng = stream("relaxed")
    model = CodecModel(8, 8, rng=rng, channels=4)
    data = _sensor_data(8, 8, key="relaxed")
    target = data.packed.copy()
    w0 = model.transforms.ga_embed.w.data.copy()

    def build(w):
        model.transforms.ga_embed.w = w
        i_tilde, bits_y, bits_z = relaxed_forward(data, model, stream("relaxed-noise"))
        return rd_loss(target, i_tilde, bits_y, bits_z, beta=1e-4)

    assert check_gradients(build, [w0]) < 1e-5


def test_rd_loss_arithmetic():
    assert rd_loss(np.ones((1, 1, 1)), np.zeros((1, 1, 1)), 500.0, 500.0, 0.0) == 1.0
    v = np.zeros((10, 10, 10))
    vh = v + 0.1  # mse 0.01
    assert rd_loss(v, vh, 600.0, 400.0, 1e-5) == pytest.approx(0.02)
    with pytest.raises(ValueError, match="beta"):
        rd_loss(v, vh, 1.0, 1.0, -0.1)


def test_quantizer_consistency_relaxed_vs_rounded():
    # expected bits under uniform-noise relaxation tracks the rounded bits
    model = FactorizedEntropy(4)
    model.log_scale.data[:] = [0.0, 0.3, -0.2, 0.5]
    rng = stream("consistency")
    scale = np.exp(model.log_scale.data)[:, None, None]
    z = rng.logistic(0.0, 1.0, size=(4, 40, 40)) * scale
    rounded_bits = model.bits(Tensor(np.rint(z))).item()
    relaxed = [model.bits(Tensor(z + rng.uniform(-0.5, 0.5, z.shape))).item()
               for _ in range(8)]
    assert np.mean(relaxed) == pytest.approx(rounded_bits, rel=0.05)
