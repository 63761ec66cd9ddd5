"""Dense float64 tensors with reverse-mode differentiation.

Graphs are recorded eagerly by the op functions in this module and live only
for the training step that built them; parameters are the ``requires_grad``
leaves. Everything is 64-bit: the simulator runs at desk scale, where
determinism and finite-difference fidelity matter more than speed.
"""
from __future__ import annotations

import math

import numpy as np

__all__ = [
    "Tensor",
    "OPS",
    "add", "sub", "mul", "div", "neg", "power", "log", "exp", "relu", "erf",
    "matmul", "reshape", "concat", "tsum", "tmean", "softmax", "log_softmax",
    "avg_pool2d", "conv2d", "conv2d_transpose", "gather_flat", "scatter_flat",
    "init_uniform",
]


class Tensor:
    """A dense real tensor, optionally carrying a gradient.

    ``grad`` accumulates across repeated ``backward`` calls until an
    optimizer step (or ``zero_grad``) clears it.
    """

    __slots__ = ("data", "grad", "requires_grad", "_parents", "_vjp")

    def __init__(self, data, requires_grad: bool = False, _parents=(), _vjp=None):
        self.data = np.asarray(data, dtype=np.float64)
        self.grad: np.ndarray | None = None
        self.requires_grad = bool(requires_grad) or any(p.requires_grad for p in _parents)
        self._parents = _parents
        self._vjp = _vjp

    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    @property
    def size(self) -> int:
        return self.data.size

    def item(self) -> float:
        return float(self.data)

    def zero_grad(self) -> None:
        self.grad = None

    def detach(self) -> "Tensor":
        return Tensor(self.data.copy())

    def backward(self) -> None:
        """Populate ``grad`` on every reachable parameter with d(self)/d(param).

        Only scalar losses are accepted; repeated calls accumulate.
        """
        if self.data.size != 1:
            raise ValueError(f"backward requires a scalar loss, got shape {self.shape}")
        order = _toposort(self)
        flows: dict[int, np.ndarray] = {id(self): np.ones_like(self.data)}
        for node in order:
            g = flows.pop(id(node), None)
            if g is None:
                continue
            if not node._parents:
                if node.requires_grad:
                    if node.grad is None:
                        node.grad = np.zeros_like(node.data)
                    node.grad += g
                continue
            for parent, pg in zip(node._parents, node._vjp(g)):
                if pg is None or not parent.requires_grad:
                    continue
                acc = flows.get(id(parent))
                if acc is None:
                    # own the buffer: vjps may hand back views or shared arrays
                    flows[id(parent)] = np.array(pg)
                else:
                    acc += pg

    # Operator sugar; scalars are promoted to constant tensors.
    def __add__(self, other):
        return add(self, _wrap(other))

    def __radd__(self, other):
        return add(_wrap(other), self)

    def __sub__(self, other):
        return sub(self, _wrap(other))

    def __rsub__(self, other):
        return sub(_wrap(other), self)

    def __mul__(self, other):
        return mul(self, _wrap(other))

    def __rmul__(self, other):
        return mul(_wrap(other), self)

    def __truediv__(self, other):
        return div(self, _wrap(other))

    def __rtruediv__(self, other):
        return div(_wrap(other), self)

    def __neg__(self):
        return neg(self)

    def __pow__(self, p):
        return power(self, p)

    def __matmul__(self, other):
        return matmul(self, other)

    def reshape(self, *shape):
        return reshape(self, shape[0] if len(shape) == 1 and isinstance(shape[0], (tuple, list)) else shape)

    def sum(self, axis=None, keepdims=False):
        return tsum(self, axis=axis, keepdims=keepdims)

    def mean(self):
        return tmean(self)

    def __repr__(self) -> str:
        return f"Tensor(shape={self.shape}, requires_grad={self.requires_grad})"


def _wrap(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(np.asarray(x, dtype=np.float64))


def _toposort(root: Tensor) -> list[Tensor]:
    """Reverse topological order, iterative (training graphs can be deep)."""
    order: list[Tensor] = []
    seen: set[int] = set()
    stack: list[tuple[Tensor, bool]] = [(root, False)]
    while stack:
        node, expanded = stack.pop()
        if expanded:
            order.append(node)
            continue
        if id(node) in seen:
            continue
        seen.add(id(node))
        stack.append((node, True))
        for p in node._parents:
            if id(p) not in seen:
                stack.append((p, False))
    return order[::-1]


def _unbroadcast(g: np.ndarray, shape: tuple[int, ...]) -> np.ndarray:
    if g.shape == shape:
        return g
    extra = g.ndim - len(shape)
    if extra:
        g = g.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, s in enumerate(shape) if s == 1 and g.shape[i] != 1)
    if axes:
        g = g.sum(axis=axes, keepdims=True)
    return g.reshape(shape)


def _check_broadcast(a: Tensor, b: Tensor, op: str) -> None:
    try:
        np.broadcast_shapes(a.shape, b.shape)
    except ValueError:
        raise ValueError(f"{op}: shapes {a.shape} and {b.shape} do not broadcast") from None


# ---------------------------------------------------------------------------
# elementwise

def add(a: Tensor, b: Tensor) -> Tensor:
    _check_broadcast(a, b, "add")
    return Tensor(a.data + b.data, _parents=(a, b),
                  _vjp=lambda g: (_unbroadcast(g, a.shape), _unbroadcast(g, b.shape)))


def sub(a: Tensor, b: Tensor) -> Tensor:
    _check_broadcast(a, b, "sub")
    return Tensor(a.data - b.data, _parents=(a, b),
                  _vjp=lambda g: (_unbroadcast(g, a.shape), _unbroadcast(-g, b.shape)))


def mul(a: Tensor, b: Tensor) -> Tensor:
    _check_broadcast(a, b, "mul")
    return Tensor(a.data * b.data, _parents=(a, b),
                  _vjp=lambda g: (_unbroadcast(g * b.data, a.shape),
                                  _unbroadcast(g * a.data, b.shape)))


def div(a: Tensor, b: Tensor) -> Tensor:
    _check_broadcast(a, b, "div")
    return Tensor(a.data / b.data, _parents=(a, b),
                  _vjp=lambda g: (_unbroadcast(g / b.data, a.shape),
                                  _unbroadcast(-g * a.data / (b.data * b.data), b.shape)))


def neg(a: Tensor) -> Tensor:
    return Tensor(-a.data, _parents=(a,), _vjp=lambda g: (-g,))


def power(a: Tensor, p: float) -> Tensor:
    p = float(p)
    return Tensor(a.data ** p, _parents=(a,),
                  _vjp=lambda g: (g * p * a.data ** (p - 1.0),))


def log(a: Tensor) -> Tensor:
    return Tensor(np.log(a.data), _parents=(a,), _vjp=lambda g: (g / a.data,))


def exp(a: Tensor) -> Tensor:
    out = np.exp(a.data)
    return Tensor(out, _parents=(a,), _vjp=lambda g: (g * out,))


def relu(a: Tensor) -> Tensor:
    mask = a.data > 0.0
    return Tensor(np.where(mask, a.data, 0.0), _parents=(a,), _vjp=lambda g: (g * mask,))


def erf(a: Tensor) -> Tensor:
    from scipy.special import erf as _erf

    coef = 2.0 / math.sqrt(math.pi)
    return Tensor(_erf(a.data), _parents=(a,),
                  _vjp=lambda g: (g * coef * np.exp(-a.data * a.data),))


# ---------------------------------------------------------------------------
# linear algebra / structure

def matmul(a: Tensor, b: Tensor) -> Tensor:
    if a.data.ndim != 2 or b.data.ndim != 2 or a.shape[1] != b.shape[0]:
        raise ValueError(f"matmul: incompatible shapes {a.shape} and {b.shape}")
    return Tensor(a.data @ b.data, _parents=(a, b),
                  _vjp=lambda g: (g @ b.data.T, a.data.T @ g))


def reshape(a: Tensor, shape) -> Tensor:
    shape = tuple(int(s) for s in shape)
    return Tensor(a.data.reshape(shape), _parents=(a,),
                  _vjp=lambda g: (g.reshape(a.shape),))


def concat(parts: list[Tensor], axis: int = 0) -> Tensor:
    sizes = [p.shape[axis] for p in parts]
    splits = np.cumsum(sizes)[:-1]

    def vjp(g):
        return tuple(np.split(g, splits, axis=axis))

    return Tensor(np.concatenate([p.data for p in parts], axis=axis),
                  _parents=tuple(parts), _vjp=vjp)


def tsum(a: Tensor, axis=None, keepdims: bool = False) -> Tensor:
    def vjp(g):
        if axis is None:
            return (np.broadcast_to(g, a.shape).copy(),)
        gg = g if keepdims else np.expand_dims(g, axis)
        return (np.broadcast_to(gg, a.shape).copy(),)

    return Tensor(a.data.sum(axis=axis, keepdims=keepdims), _parents=(a,), _vjp=vjp)


def tmean(a: Tensor) -> Tensor:
    n = a.data.size
    return Tensor(a.data.mean(), _parents=(a,),
                  _vjp=lambda g: (np.broadcast_to(g / n, a.shape).copy(),))


def softmax(a: Tensor, axis: int = 0) -> Tensor:
    shifted = a.data - a.data.max(axis=axis, keepdims=True)
    e = np.exp(shifted)
    y = e / e.sum(axis=axis, keepdims=True)

    def vjp(g):
        dot = (g * y).sum(axis=axis, keepdims=True)
        return ((g - dot) * y,)

    return Tensor(y, _parents=(a,), _vjp=vjp)


def log_softmax(a: Tensor, axis: int = 0) -> Tensor:
    """log(softmax(a)) along ``axis``; composed from primitives, exact gradient."""
    m = Tensor(a.data.max(axis=axis, keepdims=True))  # constant shift
    shifted = sub(a, m)
    lse = log(tsum(exp(shifted), axis=axis, keepdims=True))
    return sub(shifted, lse)


# ---------------------------------------------------------------------------
# spatial ops on (C, H, W) arrays

def avg_pool2d(a: Tensor, k: int) -> Tensor:
    c, h, w = a.shape
    if h % k or w % k:
        raise ValueError(f"avg_pool2d: {h}x{w} not divisible by window {k}")
    out = a.data.reshape(c, h // k, k, w // k, k).mean(axis=(2, 4))

    def vjp(g):
        ge = np.repeat(np.repeat(g, k, axis=1), k, axis=2) / (k * k)
        return (ge,)

    return Tensor(out, _parents=(a,), _vjp=vjp)


def _conv_geometry(h: int, w: int, kh: int, kw: int, stride: int, padding: int):
    oh = (h + 2 * padding - kh) // stride + 1
    ow = (w + 2 * padding - kw) // stride + 1
    if oh < 1 or ow < 1:
        raise ValueError(
            f"conv2d: kernel {kh}x{kw} stride {stride} padding {padding} "
            f"does not fit input {h}x{w}")
    return oh, ow


def conv2d(x: Tensor, w: Tensor, b: Tensor | None = None, *,
           stride: int = 1, padding: int = 0) -> Tensor:
    """2-D convolution of a (Cin,H,W) input with a (Cout,Cin,kh,kw) kernel."""
    cin, h, wd = x.shape
    cout, cin2, kh, kw = w.shape
    if cin != cin2:
        raise ValueError(f"conv2d: input channels {x.shape} vs kernel {w.shape}")
    oh, ow = _conv_geometry(h, wd, kh, kw, stride, padding)
    xp = np.pad(x.data, ((0, 0), (padding, padding), (padding, padding)))
    out = np.zeros((cout, oh, ow))
    for di in range(kh):
        for dj in range(kw):
            xs = xp[:, di:di + stride * (oh - 1) + 1:stride,
                    dj:dj + stride * (ow - 1) + 1:stride]
            out += np.tensordot(w.data[:, :, di, dj], xs, axes=(1, 0))
    if b is not None:
        if b.shape != (cout,):
            raise ValueError(f"conv2d: bias {b.shape} vs {cout} output channels")
        out += b.data[:, None, None]

    parents = (x, w) if b is None else (x, w, b)

    def vjp(g):
        gx = gw = None
        if w.requires_grad:
            gw = np.zeros_like(w.data)
        if x.requires_grad:
            gxp = np.zeros_like(xp)
        for di in range(kh):
            for dj in range(kw):
                if w.requires_grad:
                    xs = xp[:, di:di + stride * (oh - 1) + 1:stride,
                            dj:dj + stride * (ow - 1) + 1:stride]
                    gw[:, :, di, dj] = np.tensordot(g, xs, axes=((1, 2), (1, 2)))
                if x.requires_grad:
                    gxp[:, di:di + stride * (oh - 1) + 1:stride,
                        dj:dj + stride * (ow - 1) + 1:stride] += \
                        np.tensordot(w.data[:, :, di, dj], g, axes=(0, 0))
        if x.requires_grad:
            gx = gxp[:, padding:padding + h, padding:padding + wd]
        if b is None:
            return gx, gw
        return gx, gw, g.sum(axis=(1, 2))

    return Tensor(out, _parents=parents, _vjp=vjp)


def conv2d_transpose(x: Tensor, w: Tensor, b: Tensor | None = None, *,
                     stride: int = 1, padding: int = 0,
                     output_padding: int = 0) -> Tensor:
    """Transposed 2-D convolution (adjoint of ``conv2d`` in its spatial map).

    Input (Cin,H,W), kernel (Cin,Cout,kh,kw); output spatial size is
    ``(H-1)*stride - 2*padding + kh + output_padding``.
    """
    cin, h, wd = x.shape
    cin2, cout, kh, kw = w.shape
    if cin != cin2:
        raise ValueError(f"conv2d_transpose: input channels {x.shape} vs kernel {w.shape}")
    if output_padding >= stride and not (stride == 1 and output_padding == 0):
        raise ValueError(f"conv2d_transpose: output_padding {output_padding} >= stride {stride}")
    oh = (h - 1) * stride - 2 * padding + kh + output_padding
    ow = (wd - 1) * stride - 2 * padding + kw + output_padding
    if oh < 1 or ow < 1:
        raise ValueError(f"conv2d_transpose: output {oh}x{ow} collapses for input {h}x{wd}")

    ph, pw = oh + 2 * padding, ow + 2 * padding
    out_pad = np.zeros((cout, ph, pw))
    for di in range(kh):
        for dj in range(kw):
            out_pad[:, di:di + stride * (h - 1) + 1:stride,
                    dj:dj + stride * (wd - 1) + 1:stride] += \
                np.tensordot(w.data[:, :, di, dj], x.data, axes=(0, 0))
    out = out_pad[:, padding:padding + oh, padding:padding + ow]
    if b is not None:
        if b.shape != (cout,):
            raise ValueError(f"conv2d_transpose: bias {b.shape} vs {cout} output channels")
        out = out + b.data[:, None, None]

    parents = (x, w) if b is None else (x, w, b)

    def vjp(g):
        gp = np.pad(g, ((0, 0), (padding, padding), (padding, padding)))
        gx = np.zeros_like(x.data) if x.requires_grad else None
        gw = np.zeros_like(w.data) if w.requires_grad else None
        for di in range(kh):
            for dj in range(kw):
                gs = gp[:, di:di + stride * (h - 1) + 1:stride,
                        dj:dj + stride * (wd - 1) + 1:stride]
                if gx is not None:
                    gx += np.tensordot(w.data[:, :, di, dj], gs, axes=(1, 0))
                if gw is not None:
                    gw[:, :, di, dj] = np.tensordot(x.data, gs, axes=((1, 2), (1, 2)))
        if b is None:
            return gx, gw
        return gx, gw, g.sum(axis=(1, 2))

    return Tensor(out, _parents=parents, _vjp=vjp)


# ---------------------------------------------------------------------------
# index ops (fixed integer index maps; used by packing/masking layers)

def gather_flat(x: Tensor, idx: np.ndarray) -> Tensor:
    """out.flat[i] = x.flat[idx.flat[i]]; output takes the shape of ``idx``."""
    idx = np.asarray(idx, dtype=np.intp)
    flat = x.data.reshape(-1)
    out = flat[idx.reshape(-1)].reshape(idx.shape)

    def vjp(g):
        gx = np.zeros(x.data.size)
        np.add.at(gx, idx.reshape(-1), g.reshape(-1))
        return (gx.reshape(x.shape),)

    return Tensor(out, _parents=(x,), _vjp=vjp)


def scatter_flat(x: Tensor, idx: np.ndarray, shape) -> Tensor:
    """Place x.flat[i] at flat position idx[i] of a zero tensor of ``shape``.

    Indices must be unique (each output slot written at most once).
    """
    idx = np.asarray(idx, dtype=np.intp)
    if idx.size != x.data.size:
        raise ValueError(f"scatter_flat: {idx.size} indices for {x.data.size} values")
    shape = tuple(int(s) for s in shape)
    out = np.zeros(int(np.prod(shape)))
    out[idx.reshape(-1)] = x.data.reshape(-1)

    def vjp(g):
        return (g.reshape(-1)[idx.reshape(-1)].reshape(x.shape),)

    return Tensor(out.reshape(shape), _parents=(x,), _vjp=vjp)


def init_uniform(shape, fan_in: int, rng: np.random.Generator) -> np.ndarray:
    """Uniform init in [-sqrt(1/fan_in), +sqrt(1/fan_in)]."""
    bound = math.sqrt(1.0 / fan_in)
    return rng.uniform(-bound, bound, size=shape)


# Registry used by the gradient-check harness: name -> callable. Every
# differentiable op defined above must appear here.
OPS = {
    "add": add,
    "sub": sub,
    "mul": mul,
    "div": div,
    "neg": neg,
    "power": power,
    "log": log,
    "exp": exp,
    "relu": relu,
    "erf": erf,
    "matmul": matmul,
    "reshape": reshape,
    "concat": concat,
    "sum": tsum,
    "mean": tmean,
    "softmax": softmax,
    "avg_pool2d": avg_pool2d,
    "conv2d": conv2d,
    "conv2d_transpose": conv2d_transpose,
    "gather_flat": gather_flat,
    "scatter_flat": scatter_flat,
}
