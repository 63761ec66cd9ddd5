"""Byte-oriented range coder over quantized integer frequency tables.

32-bit low/range state with byte renormalization. Carries never propagate
into emitted bytes because the range is trimmed at the 2^16 boundary before
it can straddle one (the classic renormalize-or-trim scheme), so low + range
never exceeds 2^32. Termination picks the value inside the final interval
with the most trailing zero bytes and emits only its nonzero prefix; the
decoder zero-pads at end of stream and lands on exactly that value.
"""
from __future__ import annotations

import numpy as np

PRECISION = 32
TOP = 1 << (PRECISION - 8)
BOTTOM = 1 << (PRECISION - 16)
MASK = (1 << PRECISION) - 1
FREQ_TOTAL = 1 << 16


class RangeEncoder:
    def __init__(self):
        self.low = 0
        self.range = MASK + 1
        self.out = bytearray()
        self._finished = False

    def encode(self, cum_lo: int, cum_hi: int, total: int) -> None:
        if self._finished:
            raise ValueError("encoder already finished")
        if not 0 <= cum_lo < cum_hi <= total:
            raise ValueError(f"empty or invalid symbol interval [{cum_lo},{cum_hi}) of {total}")
        r = self.range // total
        self.low += cum_lo * r
        self.range = (cum_hi - cum_lo) * r if cum_hi < total else self.range - cum_lo * r
        self._normalize()

    def _normalize(self) -> None:
        while True:
            if (self.low ^ (self.low + self.range)) < TOP:
                pass  # top byte settled, flush it
            elif self.range < BOTTOM:
                # straddling a top-byte boundary with a tiny range: trim the
                # range down to the boundary so the byte can be released
                self.range = ((MASK + 1) - self.low) & (BOTTOM - 1)
            else:
                return
            self.out.append((self.low >> (PRECISION - 8)) & 0xFF)
            self.low = (self.low << 8) & MASK
            self.range <<= 8

    def finish(self) -> bytes:
        if not self._finished:
            self._finished = True
            hi = self.low + self.range
            for zero_bytes in range(4, -1, -1):
                step = 1 << (8 * zero_bytes)
                v = ((self.low + step - 1) // step) * step
                if self.low <= v < hi:
                    for k in range(4 - zero_bytes):
                        self.out.append((v >> (PRECISION - 8 * (k + 1))) & 0xFF)
                    break
        return bytes(self.out)


class RangeDecoder:
    def __init__(self, data: bytes):
        self.data = data
        self.pos = 0
        self.low = 0
        self.range = MASK + 1
        self.state = 0
        for _ in range(4):
            self.state = (self.state << 8) | self._next_byte()

    def _next_byte(self) -> int:
        b = self.data[self.pos] if self.pos < len(self.data) else 0
        self.pos += 1
        return b

    def decode(self, cum: np.ndarray, total: int) -> int:
        """Decode one symbol from its cumulative frequency table (len n+1)."""
        r = self.range // total
        offset = min((self.state - self.low) // r, total - 1)
        sym = int(np.searchsorted(cum, offset, side="right")) - 1
        cum_lo, cum_hi = int(cum[sym]), int(cum[sym + 1])
        self.low += cum_lo * r
        self.range = (cum_hi - cum_lo) * r if cum_hi < total else self.range - cum_lo * r
        self._normalize()
        return sym

    def _normalize(self) -> None:
        while True:
            if (self.low ^ (self.low + self.range)) < TOP:
                pass
            elif self.range < BOTTOM:
                self.range = ((MASK + 1) - self.low) & (BOTTOM - 1)
            else:
                return
            self.state = ((self.state << 8) | self._next_byte()) & MASK
            self.low = (self.low << 8) & MASK
            self.range <<= 8


def quantize_cdf(probs: np.ndarray, total: int = FREQ_TOTAL) -> np.ndarray:
    """Integer cumulative frequencies for one or many distributions.

    Largest-remainder rounding with a floor of 1 per symbol, summing exactly
    to ``total``. Input (S,) or (N, S); output has a leading zero column.
    """
    p = np.asarray(probs, dtype=np.float64)
    squeeze = p.ndim == 1
    if squeeze:
        p = p[None, :]
    n, s = p.shape
    if s >= total:
        raise ValueError(f"{s} symbols cannot each get a positive share of {total}")
    p = np.maximum(p, 0.0)
    p = p / p.sum(axis=1, keepdims=True)
    scaled = p * (total - s)
    base = np.floor(scaled).astype(np.int64) + 1
    short = total - base.sum(axis=1)
    # hand the leftover units to the largest remainders
    remainders = scaled - np.floor(scaled)
    order = np.argsort(-remainders, axis=1, kind="stable")
    take = np.arange(s)[None, :] < short[:, None]
    bump = np.zeros_like(base)
    np.put_along_axis(bump, order, take.astype(np.int64), axis=1)
    freqs = base + bump
    cum = np.zeros((n, s + 1), dtype=np.int64)
    np.cumsum(freqs, axis=1, out=cum[:, 1:])
    return cum[0] if squeeze else cum


def range_code(symbols: np.ndarray, cum: np.ndarray) -> bytes:
    """Encode integer symbols; ``cum`` is one shared cumulative table or one
    row per symbol. Symbols outside the table's support are rejected."""
    syms = np.asarray(symbols, dtype=np.int64).reshape(-1)
    shared = cum.ndim == 1
    n_support = (cum.shape[-1] - 1)
    total = int(cum[-1] if shared else cum[0, -1])
    if np.any((syms < 0) | (syms >= n_support)):
        raise ValueError("symbol outside the entropy model's support")
    enc = RangeEncoder()
    for i, sym in enumerate(syms):
        row = cum if shared else cum[i]
        enc.encode(int(row[sym]), int(row[sym + 1]), total)
    return enc.finish()


def range_decode(blob: bytes, cum: np.ndarray, count: int) -> np.ndarray:
    shared = cum.ndim == 1
    total = int(cum[-1] if shared else cum[0, -1])
    dec = RangeDecoder(blob)
    out = np.empty(count, dtype=np.int64)
    for i in range(count):
        row = cum if shared else cum[i]
        out[i] = dec.decode(row, total)
    return out
