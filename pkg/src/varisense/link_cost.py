"""Communication-cost accounting: modulated-symbol counts for bitstreams
under a coding/modulation budget, the Shannon-capacity reference, and the
joint-link total. Costs are real-valued symbols (no ceiling to whole blocks)
since reported curves average over clips."""
from __future__ import annotations

import math
from dataclasses import dataclass

CODE_RATES = (1 / 3, 1 / 2, 2 / 3)
MODULATION_ORDERS = (4, 16, 64)


@dataclass
class LinkBudget:
    code_rate: float = 2 / 3
    modulation_order: int = 16
    snr_db: float = 10.0

    def __post_init__(self):
        if not any(abs(self.code_rate - r) < 1e-12 for r in CODE_RATES):
            raise ValueError(f"code rate {self.code_rate} not in {CODE_RATES}")
        if self.modulation_order not in MODULATION_ORDERS:
            raise ValueError(f"modulation order {self.modulation_order} not in {MODULATION_ORDERS}")

    @property
    def bits_per_symbol(self) -> float:
        return self.code_rate * math.log2(self.modulation_order)


def symbols_for_bits(bits: float, budget: LinkBudget) -> float:
    """l_s = l_b / (r_c * log2(r_m))."""
    if bits < 0:
        raise ValueError("bit count must be nonnegative")
    return bits / budget.bits_per_symbol


def shannon_symbols(bits: float, snr_db: float) -> float:
    """l_s = l_b / log2(1 + snr), the capacity-achieving reference."""
    if bits < 0:
        raise ValueError("bit count must be nonnegative")
    snr = 10.0 ** (snr_db / 10.0)
    return bits / math.log2(1.0 + snr)


def semcom_total_cost(n_z: int, height: int, width: int, budget: LinkBudget) -> float:
    """Joint-link cost: n_z/2 complex symbols for the payload plus the
    error-free 2-bit-per-element rate map sent at the budget's rate."""
    payload_symbols = n_z / 2.0
    side_bits = 2.0 * (height * width / 64.0)
    return payload_symbols + symbols_for_bits(side_bits, budget)
