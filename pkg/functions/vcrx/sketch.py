"""
Secure Sketch Module
Code-offset reconciliation: Alice publishes S = W^n - C, Bob decodes V^n + S
"""

import logging
import math
from dataclasses import dataclass
from typing import Sequence, Tuple

import numpy as np

from .reed_solomon import (
    DecodeResult,
    RsParams,
    SymbolSequence,
    is_failure,
    rs_check,
    rs_decode,
    sample_codeword,
)

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class Sketch:
    """Public helper message S and the code it was built with."""

    offset: Tuple[int, ...]
    rs: RsParams

    def __post_init__(self):
        self.rs.field.check_symbols(self.offset)

    def to_hex(self) -> str:
        width = (self.rs.field.k + 3) // 4
        return "".join(f"{s:0{width}x}" for s in self.offset)


@dataclass(frozen=True)
class KeyPair:
    """Alice's key K (message of C) and Bob's estimate L (or DecodeFailure)."""

    k_alice: Tuple[int, ...]
    l_bob: DecodeResult

    @property
    def failed(self) -> bool:
        return is_failure(self.l_bob)

    @property
    def agree(self) -> bool:
        # A decode failure counts as a mismatch
        return not self.failed and tuple(self.l_bob) == self.k_alice


def _xor(a: Sequence[int], b: Sequence[int]) -> SymbolSequence:
    return [int(x) ^ int(y) for x, y in zip(a, b)]


def make_sketch(w_seq: Sequence[int], codeword: Sequence[int], rs: RsParams) -> Sketch:
    """Offset of Alice's symbols from a codeword; subtraction in GF(2^k) is XOR.

    Raises:
        ValueError: If lengths differ from n or the codeword fails the syndrome check
    """
    if len(w_seq) != rs.n or len(codeword) != rs.n:
        raise ValueError(f"sketch inputs must have length n={rs.n}, got {len(w_seq)} and {len(codeword)}")
    rs.field.check_symbols(w_seq)
    if not rs_check(codeword, rs):
        raise ValueError("codeword fails the syndrome check")
    return Sketch(offset=tuple(_xor(w_seq, codeword)), rs=rs)


def recover(v_seq: Sequence[int], s: Sketch) -> DecodeResult:
    """Bob's side: decode C' = V^n + S and return the message of the decoded codeword."""
    if len(v_seq) != s.rs.n:
        raise ValueError(f"observation length {len(v_seq)} != n={s.rs.n}")
    return rs_decode(_xor(v_seq, s.offset), s.rs)


def generate_keys(w_seq: Sequence[int], v_seq: Sequence[int], rs: RsParams,
                  rng: np.random.Generator) -> Tuple[KeyPair, Sketch]:
    """One full reconciliation round: sample C, publish S, recover at Bob."""
    codeword = sample_codeword(rs, rng)
    sketch = make_sketch(w_seq, codeword, rs)
    l_bob = recover(v_seq, sketch)
    if is_failure(l_bob):
        logger.debug("Bob failed to decode the reconciled word")
    return KeyPair(k_alice=tuple(codeword[: rs.m]), l_bob=l_bob), sketch


def key_rate_bits(rs: RsParams) -> float:
    """Secret key bits per source symbol, (m/n) log2 q."""
    return rs.m / rs.n * math.log2(rs.q)


def leakage_bound_bits(h_w_bits: float, i_wz_bits: float, q: int, n: int) -> float:
    """Upper bound on I(K; Z^n, S): n (log2 q - H(W) + I(W;Z)).

    Negative mutual-information estimates are clamped to zero first.

    Raises:
        ValueError: If the entropy is negative or exceeds log2 q
    """
    log_q = math.log2(q)
    if h_w_bits > log_q + 1e-12 or h_w_bits < 0:
        raise ValueError(f"entropy {h_w_bits} bits outside [0, {log_q}]")
    return max(n * (log_q - h_w_bits + max(i_wz_bits, 0.0)), 0.0)
