from .codec import (
    CodecModel,
    decode,
    encode,
    ideal_bits,
    rd_loss,
    read_container,
    relaxed_forward,
    write_container,
)
from .entropy import (
    P_MIN,
    SIGMA_MIN,
    SUPPORT,
    ConditionalGaussian,
    FactorizedEntropy,
    from_symbols,
    gaussian_box_prob,
    to_symbols,
)
from .rangecoder import (
    FREQ_TOTAL,
    RangeDecoder,
    RangeEncoder,
    quantize_cdf,
    range_code,
    range_decode,
)
from .transforms import CodecTransforms

__all__ = [
    "CodecModel", "CodecTransforms",
    "encode", "decode", "relaxed_forward", "ideal_bits", "rd_loss",
    "read_container", "write_container",
    "FactorizedEntropy", "ConditionalGaussian",
    "gaussian_box_prob", "to_symbols", "from_symbols",
    "P_MIN", "SIGMA_MIN", "SUPPORT",
    "RangeEncoder", "RangeDecoder", "range_code", "range_decode",
    "quantize_cdf", "FREQ_TOTAL",
]
