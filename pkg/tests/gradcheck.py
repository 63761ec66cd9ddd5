"""Central finite-difference oracle for the reverse-mode engine.

The oracle never touches the autodiff machinery: it re-runs the forward
function at perturbed inputs and differences the results.
"""
from __future__ import annotations

import numpy as np

import varisense.autodiff as af
from varisense.autodiff import Tensor


def fd_gradients(fn, inputs: list[np.ndarray], h: float = 1e-5) -> list[np.ndarray]:
    """d fn / d inputs by central differences; fn maps ndarrays -> float."""
    grads = []
    for k, base in enumerate(inputs):
        g = np.zeros_like(base)
        flat = g.reshape(-1)
        for i in range(base.size):
            bumped = [a.copy() for a in inputs]
            bumped[k].reshape(-1)[i] += h
            up = fn(*bumped)
            bumped[k].reshape(-1)[i] -= 2 * h
            down = fn(*bumped)
            flat[i] = (up - down) / (2 * h)
        grads.append(g)
    return grads


def check_gradients(build, inputs: list[np.ndarray], rtol: float = 1e-5,
                    h: float = 1e-5) -> float:
    """Compare reverse-mode gradients of ``build`` against the FD oracle.

    ``build`` maps Tensors to a scalar Tensor. Returns the worst relative
    error seen (with a small absolute floor to avoid 0/0).
    """
    tensors = [Tensor(a.copy(), requires_grad=True) for a in inputs]
    loss = build(*tensors)
    loss.backward()
    analytic = [t.grad if t.grad is not None else np.zeros_like(t.data) for t in tensors]

    def scalar_fn(*arrays):
        consts = [Tensor(a) for a in arrays]
        return build(*consts).item()

    numeric = fd_gradients(scalar_fn, [a.copy() for a in inputs], h=h)
    worst = 0.0
    for a, n in zip(analytic, numeric):
        denom = np.maximum(np.maximum(np.abs(a), np.abs(n)), 1e-4)
        worst = max(worst, float(np.max(np.abs(a - n) / denom)))
    return worst


# ---------------------------------------------------------------------------
# random instances per registered op, for the exhaustive check

def _make_readout(rng):
    """Scalar readout with weights fixed on first use, so repeated forward
    evaluations (the FD oracle) see the same function."""
    cell: dict[str, np.ndarray] = {}

    def read(out):
        if "w" not in cell:
            cell["w"] = rng.standard_normal(out.shape)
        return af.tsum(af.mul(out, Tensor(cell["w"])))

    return read


def _away_from_zero(x, margin=0.05):
    return x + np.sign(x + 1e-12) * margin


def op_case(name: str, rng: np.random.Generator):
    """Return (build, inputs) exercising op ``name`` on random small tensors."""
    _readout = _make_readout(rng)
    if name in ("add", "sub", "mul", "div"):
        op = getattr(af, name)
        a = rng.standard_normal((3, 4))
        b = rng.standard_normal((4,)) if rng.random() < 0.5 else rng.standard_normal((3, 4))
        if name == "div":
            b = np.sign(b) * (0.7 + np.abs(b))
        return lambda x, y: _readout(op(x, y)), [a, b]
    if name == "neg":
        a = rng.standard_normal((2, 5))
        return lambda x: _readout(af.neg(x)), [a]
    if name == "power":
        p = rng.choice([2.0, 3.0, 0.5, -1.0])
        a = 0.5 + rng.random((2, 4))
        return lambda x: _readout(af.power(x, p)), [a]
    if name == "log":
        a = 0.3 + 1.7 * rng.random((3, 3))
        return lambda x: _readout(af.log(x)), [a]
    if name == "exp":
        a = rng.uniform(-1, 1, (3, 3))
        return lambda x: _readout(af.exp(x)), [a]
    if name == "relu":
        a = _away_from_zero(rng.standard_normal((3, 4)))
        return lambda x: _readout(af.relu(x)), [a]
    if name == "erf":
        a = rng.uniform(-2, 2, (3, 4))
        return lambda x: _readout(af.erf(x)), [a]
    if name == "matmul":
        a = rng.standard_normal((3, 4))
        b = rng.standard_normal((4, 2))
        return lambda x, y: _readout(af.matmul(x, y)), [a, b]
    if name == "reshape":
        a = rng.standard_normal((2, 6))
        return lambda x: _readout(af.reshape(x, (3, 4))), [a]
    if name == "concat":
        axis = int(rng.integers(0, 2))
        parts = [rng.standard_normal((2, 3)) for _ in range(3)]
        return (lambda x, y, z: _readout(af.concat([x, y, z], axis=axis)), parts)
    if name == "sum":
        axis = [None, 0, 1][int(rng.integers(0, 3))]
        keep = bool(rng.random() < 0.5)
        a = rng.standard_normal((3, 4))
        return lambda x: _readout(af.tsum(x, axis=axis, keepdims=keep)), [a]
    if name == "mean":
        a = rng.standard_normal((3, 4))
        return lambda x: _readout(af.tmean(x)), [a]
    if name == "softmax":
        axis = int(rng.integers(0, 2))
        a = rng.standard_normal((4, 3))
        return lambda x: _readout(af.softmax(x, axis=axis)), [a]
    if name == "avg_pool2d":
        a = rng.standard_normal((2, 4, 4))
        return lambda x: _readout(af.avg_pool2d(x, 2)), [a]
    if name == "conv2d":
        stride = int(rng.integers(1, 3))
        padding = int(rng.integers(0, 2))
        x = rng.standard_normal((2, 5, 5))
        w = rng.standard_normal((3, 2, 3, 3))
        b = rng.standard_normal(3)
        return (lambda xx, ww, bb: _readout(
            af.conv2d(xx, ww, bb, stride=stride, padding=padding)), [x, w, b])
    if name == "conv2d_transpose":
        stride = int(rng.integers(1, 3))
        padding = int(rng.integers(0, 2))
        opad = int(rng.integers(0, stride))
        x = rng.standard_normal((2, 3, 3))
        w = rng.standard_normal((2, 3, 3, 3))
        b = rng.standard_normal(3)
        return (lambda xx, ww, bb: _readout(
            af.conv2d_transpose(xx, ww, bb, stride=stride, padding=padding,
                                output_padding=opad)), [x, w, b])
    if name == "gather_flat":
        x = rng.standard_normal((4, 5))
        idx = rng.integers(0, 20, size=7)  # duplicates exercise scatter-add
        return lambda xx: _readout(af.gather_flat(xx, idx)), [x]
    if name == "scatter_flat":
        x = rng.standard_normal(6)
        idx = rng.choice(12, size=6, replace=False)
        return lambda xx: _readout(af.scatter_flat(xx, idx, (12,))), [x]
    raise KeyError(name)
