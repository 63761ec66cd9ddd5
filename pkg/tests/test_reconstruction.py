import numpy as np
import pytest

import varisense.autodiff as af
from varisense.autodiff import Adam, Tensor
from varisense.reconstruction import (
    ReconPipeline,
    export_clip_pgm,
    initial_reconstruction,
    initial_reconstruction_masked,
    initial_reconstruction_op,
    mse_loss,
    psnr,
    refine,
)
from varisense.rng import stream
from varisense.sensor import (
    RATIO_COUNTS,
    CodedAperture,
    NoiseConfig,
    RatioMap,
    capture,
    measurement_matrix,
)
from varisense.video import SceneSpec, synthesize

from gradcheck import check_gradients

NOISELESS = NoiseConfig(enabled=False)


def test_constant_pixel_recovered_exactly():
    for m in (1, 2, 4, 8):
        s = np.full((2, 2, 16), 0.73)
        rmap = RatioMap.uniform(2, 2, m)
        v0 = initial_reconstruction(capture(s, rmap, noise=NOISELESS), rmap)
        assert np.allclose(v0, 0.73)


def test_window_mean_replication_at_highest_ratio():
    rng = stream("winmean")
    s = rng.random((1, 1, 16))
    rmap = RatioMap.uniform(1, 1, 8)
    data = capture(s, rmap, noise=NOISELESS)
    v0 = initial_reconstruction(data, rmap)
    meas = data.vector(0, 0)
    for k in range(8):
        # frames (2k, 2k+1) both equal 16*m_k/2 = 8*m_k
        assert v0[0, 0, 2 * k] == pytest.approx(8 * meas[k])
        assert v0[0, 0, 2 * k + 1] == pytest.approx(8 * meas[k])


def test_zero_ratio_pixels_reconstruct_to_zero():
    rng = stream("zero")
    s = rng.random((2, 2, 16))
    rmap = RatioMap(np.array([[0, 8], [1, 0]]), 16)
    v0 = initial_reconstruction(capture(s, rmap, noise=NOISELESS), rmap)
    assert np.all(v0[0, 0] == 0.0)
    assert np.all(v0[1, 1] == 0.0)


def test_masked_all_ones_equals_unmasked():
    rng = stream("mask-ones")
    s = rng.random((3, 3, 16))
    rmap = RatioMap(rng.choice((1, 2, 4, 8), size=(3, 3)), 16)
    data = capture(s, rmap, noise=NOISELESS)
    ones = CodedAperture(np.ones((3, 3, 16)))
    data_masked = capture(s, rmap, ones, NOISELESS)
    a = initial_reconstruction(data, rmap)
    b = initial_reconstruction_masked(data_masked, rmap, ones)
    assert np.allclose(a, b)


def test_masked_all_zero_gives_zero():
    rng = stream("mask-zeros")
    s = rng.random((2, 2, 16))
    rmap = RatioMap.uniform(2, 2, 4)
    zeros = CodedAperture(np.zeros((2, 2, 16)))
    data = capture(s, rmap, zeros, NOISELESS)
    v0 = initial_reconstruction_masked(data, rmap, zeros)
    assert np.all(v0 == 0.0)


def _svd_oracle_pixel(s_p, m, frames, b_p):
    """Independent check: Moore-Penrose pseudoinverse of the full scaled
    measurement operator."""
    a = measurement_matrix(m / frames, frames).astype(np.float64)
    op = (a * b_p[None, :]) / frames
    meas = op @ s_p
    return np.linalg.pinv(op) @ meas


def test_masked_recon_matches_svd_pseudoinverse():
    rng = stream("svd-oracle")
    frames = 4
    s = rng.random((1, 1, frames))
    rmap = RatioMap.uniform(1, 1, 2, frames)
    b = (rng.random((1, 1, frames)) < 0.5).astype(np.float64)
    aperture = CodedAperture(b.copy())
    data = capture(s, rmap, aperture, NOISELESS)
    v0 = initial_reconstruction_masked(data, rmap, aperture)
    oracle = _svd_oracle_pixel(s[0, 0], 2, frames, b[0, 0])
    assert np.max(np.abs(v0[0, 0] - oracle)) < 1e-9


def test_recon_matches_oracle_across_geometries():
    # acceptance runs 500 cases; a representative sweep here
    rng = stream("svd-sweep")
    for trial in range(40):
        frames = int(rng.choice((4, 8, 16)))
        counts = [m for m in RATIO_COUNTS if m <= frames]
        m = int(rng.choice(counts))
        masked = bool(rng.random() < 0.5)
        s = rng.random((1, 1, frames))
        rmap = RatioMap.uniform(1, 1, m, frames)
        b = (rng.random((1, 1, frames)) < 0.6).astype(np.float64) if masked \
            else np.ones((1, 1, frames))
        aperture = CodedAperture(b.copy()) if masked else None
        data = capture(s, rmap, aperture, NOISELESS)
        v0 = initial_reconstruction(data, rmap, aperture)
        oracle = _svd_oracle_pixel(s[0, 0], m, frames, b[0, 0])
        assert np.max(np.abs(v0[0, 0] - oracle)) < 1e-9, (frames, m, masked)


def test_projection_property_recapture_reproduces_measurements():
    rng = stream("proj")
    s = rng.random((4, 4, 16))
    rmap = RatioMap(rng.choice(RATIO_COUNTS, size=(4, 4)), 16)
    b = (rng.random((4, 4, 16)) < 0.5).astype(np.float64)
    aperture = CodedAperture(b.copy())
    data = capture(s, rmap, aperture, NOISELESS)
    v0 = initial_reconstruction(data, rmap, aperture)
    recaptured = capture(v0, rmap, aperture, NOISELESS)
    assert np.allclose(recaptured.packed, data.packed, atol=1e-12)


def test_recon_rejects_mismatched_ratio_map():
    rng = stream("mismatch")
    s = rng.random((2, 2, 16))
    rmap = RatioMap.uniform(2, 2, 2)
    data = capture(s, rmap, noise=NOISELESS)
    with pytest.raises(ValueError, match="does not match"):
        initial_reconstruction(data, RatioMap.uniform(2, 2, 4))


def test_initial_reconstruction_op_matches_numpy_path():
    rng = stream("op-vs-np")
    s = rng.random((4, 4, 16))
    rmap = RatioMap(rng.choice(RATIO_COUNTS, size=(4, 4)), 16)
    b = (rng.random((4, 4, 16)) < 0.5).astype(np.float64)
    aperture = CodedAperture(b.copy())
    data = capture(s, rmap, aperture, NOISELESS)
    v0_np = initial_reconstruction(data, rmap, aperture)
    packed_cm = Tensor(data.packed.transpose(2, 0, 1))
    v0_t = initial_reconstruction_op(packed_cm, data.counts, 16, aperture)
    assert np.allclose(v0_t.data, v0_np.transpose(2, 0, 1))


def test_initial_reconstruction_op_gradient():
    rng = stream("op-grad")
    counts = rng.choice((0, 1, 2, 4), size=(2, 2))
    frames = 4
    packed = rng.random((8, 2, 2))

    def build(p):
        v0 = initial_reconstruction_op(p, counts, frames)
        return af.tsum(v0 * v0)

    assert check_gradients(build, [packed]) < 1e-5


def test_untrained_pipeline_is_identity_on_v0():
    rng = stream("refine-id")
    s = rng.random((8, 8, 16))
    rmap = RatioMap.uniform(8, 8, 2)
    data = capture(s, rmap, noise=NOISELESS)
    v0 = initial_reconstruction(data, rmap)
    pipe = ReconPipeline(16, mask_enabled=False, rng=stream("refine-init"))
    out = refine(v0, rmap, pipe)
    assert out.shape == (16, 8, 8)
    assert np.allclose(out.data, v0.transpose(2, 0, 1))


def test_refine_gradient_check():
    rng = stream("refine-grad")
    pipe = ReconPipeline(2, mask_enabled=False, rng=rng, channels=3, depth=3)
    rmap = RatioMap(np.full((3, 3), 2), 2)
    v0 = rng.random((2, 3, 3))
    w0 = pipe.layers[0].w.data.copy()

    def build(w):
        pipe.layers[0].w = w
        out = pipe(Tensor(v0), rmap)
        return af.tsum(out * out)

    assert check_gradients(build, [w0]) < 1e-5


def test_refine_training_beats_initial_reconstruction():
    # static scene at the highest ratio: refinement must learn to denoise
    rng = stream("refine-train")
    clip = synthesize(SceneSpec(kind="static-texture", seed=1), 16, 16, 16)
    rmap = RatioMap.uniform(16, 16, 8)
    pipe = ReconPipeline(16, mask_enabled=False, rng=stream("refine-train-init"),
                         channels=16, depth=4)
    opt = Adam(pipe.params(), lr=2e-3)
    for step in range(40):
        data = capture(clip, rmap, noise=NoiseConfig(), rng=stream("cap", step))
        v0 = initial_reconstruction(data, rmap)
        out = refine(v0, rmap, pipe)
        loss = mse_loss(clip.data, out)
        loss.backward()
        opt.step()
    data = capture(clip, rmap, noise=NoiseConfig(), rng=stream("cap", "eval"))
    v0 = initial_reconstruction(data, rmap)
    out = refine(v0, rmap, pipe)
    assert psnr(clip.data, out.data.transpose(1, 2, 0)) > psnr(clip.data, v0)


def test_mse_and_psnr_values():
    ones = np.ones((2, 2, 2))
    zeros = np.zeros((2, 2, 2))
    assert mse_loss(ones, ones) == 0.0
    assert mse_loss(ones, zeros) == 1.0
    assert mse_loss(np.full((1, 1, 1), 0.5), np.full((1, 1, 1), 0.1)) == pytest.approx(0.16)
    with pytest.raises(ValueError, match="mse_loss"):
        mse_loss(ones, np.zeros((2, 2, 3)))

    base = np.zeros((10, 10, 10))
    off_01 = base + 0.1  # mse 0.01
    assert psnr(base, off_01) == pytest.approx(20.0)
    off_005 = base + 0.05  # mse 0.0025
    assert psnr(base, off_005) == pytest.approx(26.02, abs=0.005)
    assert psnr(base, base) == pytest.approx(120.0)


def test_export_clip_pgm(tmp_path):
    rng = stream("export")
    clip = rng.random((4, 4, 3))
    paths = export_clip_pgm(clip, tmp_path / "out")
    assert len(paths) == 3
    assert all(p.exists() for p in paths)
