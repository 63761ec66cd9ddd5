import numpy as np
import pytest

import varisense.autodiff as af
from varisense.autodiff import Adam, SgdMomentum, Tensor
from varisense.rng import stream

from gradcheck import check_gradients, op_case


def test_softmax_uniform_on_zero_logits():
    p = af.softmax(Tensor(np.zeros(5)), axis=0)
    assert np.allclose(p.data, 0.2)


def test_softmax_normalized_and_open_interval():
    rng = stream("softmax-prop")
    for _ in range(50):
        # logit spread kept within float64 resolution of the (0,1) bound
        x = Tensor(rng.uniform(-15, 15, size=(5, 7)))
        p = af.softmax(x, axis=0).data
        assert np.all(np.abs(p.sum(axis=0) - 1.0) <= 1e-12)
        assert np.all(p > 0.0) and np.all(p < 1.0)


def test_avg_pool_constant_grid():
    x = Tensor(np.full((1, 16, 16), 0.37))
    y = af.avg_pool2d(x, 8)
    assert y.shape == (1, 2, 2)
    assert np.allclose(y.data, 0.37)


def test_avg_pool_preserves_global_mean():
    rng = stream("pool-mean")
    for _ in range(20):
        x = rng.random((3, 8, 8))
        pooled = af.avg_pool2d(Tensor(x), 4).data
        assert pooled.mean() == pytest.approx(x.mean(), abs=1e-14)


def test_conv2d_identity_kernel():
    rng = stream("conv-id")
    x = rng.random((1, 6, 6))
    w = np.zeros((1, 1, 3, 3))
    w[0, 0, 1, 1] = 1.0
    y = af.conv2d(Tensor(x), Tensor(w), stride=1, padding=1)
    assert np.allclose(y.data, x)


def test_elementwise_shape_mismatch_names_both_shapes():
    with pytest.raises(ValueError, match=r"\(2, 3\).*\(4, 5\)"):
        af.add(Tensor(np.zeros((2, 3))), Tensor(np.zeros((4, 5))))
    with pytest.raises(ValueError, match=r"\(2, 3\).*\(4, 2\)"):
        af.matmul(Tensor(np.zeros((2, 3))), Tensor(np.zeros((4, 2))))


def test_backward_sum_of_squares():
    x = Tensor(np.array([1.0, 2.0, 3.0]), requires_grad=True)
    loss = af.tsum(x * x)
    loss.backward()
    assert np.allclose(x.grad, [2.0, 4.0, 6.0])


def test_backward_rejects_non_scalar():
    x = Tensor(np.ones(3), requires_grad=True)
    with pytest.raises(ValueError, match="scalar"):
        (x * x).backward()


def test_backward_accumulates_without_reset():
    x = Tensor(np.array([1.0, 2.0]), requires_grad=True)
    for _ in range(2):
        af.tsum(x * x).backward()
    assert np.allclose(x.grad, [4.0, 8.0])


def test_unused_parameter_gets_no_gradient():
    x = Tensor(np.ones(3), requires_grad=True)
    unused = Tensor(np.ones(3), requires_grad=True)
    af.tsum(x * x).backward()
    assert unused.grad is None


def test_shared_operand_gradient():
    # x used twice through the same op: d(sum(x+x))/dx = 2
    x = Tensor(np.ones(4), requires_grad=True)
    af.tsum(x + x).backward()
    assert np.allclose(x.grad, 2.0)


def test_two_layer_surrogate_matches_finite_differences():
    rng = stream("two-layer-fd")
    w1 = rng.standard_normal((4, 6))
    w2 = rng.standard_normal((6, 1))
    x = rng.standard_normal((3, 4))

    def build(w1t, w2t):
        h = af.relu(af.matmul(Tensor(x), w1t))
        return af.tsum(af.matmul(h, w2t) ** 2.0)

    assert check_gradients(build, [w1, w2]) < 1e-5


def test_every_registered_op_gradchecks():
    # the exhaustive 100-instance sweep lives in the acceptance suite
    rng = stream("opcheck-smoke")
    for name in af.OPS:
        build, inputs = op_case(name, rng)
        worst = check_gradients(build, inputs)
        assert worst < 1e-5, f"{name}: rel err {worst}"


def test_sgd_single_step():
    p = Tensor(np.array([0.0]), requires_grad=True)
    p.grad = np.array([1.0])
    SgdMomentum([p], lr=0.1, momentum=0.0).step()
    assert np.allclose(p.data, [-0.1])
    assert p.grad is None


def test_sgd_momentum_accumulates_velocity():
    p = Tensor(np.array([0.0]), requires_grad=True)
    opt = SgdMomentum([p], lr=0.1, momentum=0.9)
    p.grad = np.array([1.0])
    opt.step()
    p.grad = np.array([1.0])
    opt.step()
    # v1 = 1, v2 = 1.9 -> p = -0.1 - 0.19
    assert np.allclose(p.data, [-0.29])


def test_adam_first_step_matches_hand_computation():
    g = np.array([0.3, -2.0, 0.001])
    p = Tensor(np.zeros(3), requires_grad=True)
    lr, b1, b2, eps = 1e-2, 0.9, 0.999, 1e-8
    opt = Adam([p], lr=lr, beta1=b1, beta2=b2, eps=eps)
    p.grad = g.copy()
    opt.step()
    m_hat = ((1 - b1) * g) / (1 - b1)
    v_hat = ((1 - b2) * g * g) / (1 - b2)
    expected = -lr * m_hat / (np.sqrt(v_hat) + eps)
    assert np.allclose(p.data, expected, rtol=0, atol=1e-15)
    # first-step magnitude is ~lr in each coordinate, sign from g
    assert np.allclose(np.sign(p.data), -np.sign(g))


def test_zero_gradient_leaves_parameters_unchanged():
    for opt_cls in (lambda ps: SgdMomentum(ps, lr=0.1), lambda ps: Adam(ps, lr=0.1)):
        p = Tensor(np.array([1.0, -2.0]), requires_grad=True)
        p.grad = np.zeros(2)
        opt_cls([p]).step()
        assert np.allclose(p.data, [1.0, -2.0])


def test_missing_gradient_rejected():
    p = Tensor(np.zeros(2), requires_grad=True)
    with pytest.raises(ValueError, match="missing gradient"):
        SgdMomentum([p], lr=0.1).step()
    with pytest.raises(ValueError, match="missing gradient"):
        Adam([p], lr=0.1).step()


def test_init_uniform_bounds():
    rng = stream("init")
    vals = af.init_uniform((1000,), fan_in=16, rng=rng)
    bound = (1.0 / 16) ** 0.5
    assert np.all(np.abs(vals) <= bound)
    assert vals.std() > 0.3 * bound  # actually spread out


def test_checkpoint_round_trip(tmp_path):
    rng = stream("ckpt")
    tensors = {
        "net.w": rng.standard_normal((3, 4, 2)),
        "net.b": rng.standard_normal(5),
        "scalar": np.array(3.25),
    }
    path = tmp_path / "model.vcap"
    af.save_checkpoint(path, tensors)
    raw = path.read_bytes()
    assert raw[:4] == b"VCAP"
    assert int.from_bytes(raw[4:6], "little") == 1
    assert int.from_bytes(raw[6:10], "little") == 3
    loaded = af.load_checkpoint(path)
    assert set(loaded) == set(tensors)
    for k in tensors:
        assert np.array_equal(loaded[k], tensors[k])


def test_checkpoint_deterministic_bytes(tmp_path):
    a = {"x": np.arange(6.0).reshape(2, 3), "y": np.ones(2)}
    b = {"y": np.ones(2), "x": np.arange(6.0).reshape(2, 3)}  # insertion order differs
    pa, pb = tmp_path / "a.vcap", tmp_path / "b.vcap"
    af.save_checkpoint(pa, a)
    af.save_checkpoint(pb, b)
    assert pa.read_bytes() == pb.read_bytes()


def test_checkpoint_rejects_bad_magic(tmp_path):
    p = tmp_path / "bad.vcap"
    p.write_bytes(b"NOPE" + b"\x00" * 8)
    with pytest.raises(ValueError, match="magic"):
        af.load_checkpoint(p)
