from .tensor import (
    OPS,
    Tensor,
    add,
    avg_pool2d,
    concat,
    conv2d,
    conv2d_transpose,
    div,
    erf,
    exp,
    gather_flat,
    init_uniform,
    log,
    log_softmax,
    matmul,
    mul,
    neg,
    power,
    relu,
    reshape,
    scatter_flat,
    softmax,
    sub,
    tmean,
    tsum,
)
from .optim import Adam, SgdMomentum
from .checkpoint import load_checkpoint, save_checkpoint
from .layers import (
    Conv2d,
    ConvTranspose2d,
    ResBlock,
    collect_params,
    load_named_arrays,
    named_arrays,
    set_trainable,
)

__all__ = [
    "OPS", "Tensor",
    "add", "sub", "mul", "div", "neg", "power", "log", "exp", "relu", "erf",
    "matmul", "reshape", "concat", "tsum", "tmean", "softmax", "log_softmax",
    "avg_pool2d", "conv2d", "conv2d_transpose", "gather_flat", "scatter_flat",
    "init_uniform",
    "Adam", "SgdMomentum",
    "load_checkpoint", "save_checkpoint",
    "Conv2d", "ConvTranspose2d", "ResBlock",
    "collect_params", "set_trainable", "named_arrays", "load_named_arrays",
]
