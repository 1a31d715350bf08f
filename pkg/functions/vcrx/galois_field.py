"""
Galois Field Module
Arithmetic over GF(2^k), k in 4..7, using log/antilog tables
"""

import logging
from dataclasses import dataclass, field
from functools import lru_cache
from typing import List, Sequence, Tuple

logger = logging.getLogger(__name__)

# Conventional primitive polynomials, bit i = coefficient of x^i
PRIMITIVE_POLYS = {
    4: 0b10011,      # x^4 + x + 1
    5: 0b100101,     # x^5 + x^2 + 1
    6: 0b1000011,    # x^6 + x + 1
    7: 0b10001001,   # x^7 + x^3 + 1
}
SUPPORTED_BITS = tuple(sorted(PRIMITIVE_POLYS))


def _has_binary_root(poly: int) -> bool:
    """True if the polynomial vanishes at x=0 or x=1 over GF(2)."""
    at_zero = poly & 1
    at_one = bin(poly).count("1") % 2
    return at_zero == 0 or at_one == 0


@dataclass(frozen=True)
class Field:
    """GF(2^k) with tables built from a primitive reduction polynomial.

    antilog has length q so that antilog[q-1] wraps to 1; log[0] is unused.
    """

    k: int
    primitive_poly: int
    q: int = field(init=False)
    log: Tuple[int, ...] = field(init=False, repr=False)
    antilog: Tuple[int, ...] = field(init=False, repr=False)

    def __post_init__(self):
        if self.k not in SUPPORTED_BITS:
            raise ValueError(f"unsupported field width k={self.k}, expected one of {SUPPORTED_BITS}")
        q = 1 << self.k
        if self.primitive_poly >> self.k != 1:
            raise ValueError(f"reduction polynomial {self.primitive_poly:#x} is not of degree {self.k}")
        if _has_binary_root(self.primitive_poly):
            raise ValueError(f"reduction polynomial {self.primitive_poly:#x} has a root in GF(2)")

        antilog = [0] * q
        log = [0] * q
        value = 1
        for i in range(q - 1):
            antilog[i] = value
            if i > 0 and value == 1:
                raise ValueError(f"polynomial {self.primitive_poly:#x} is not primitive (alpha has order {i})")
            log[value] = i
            value <<= 1
            if value & q:
                value ^= self.primitive_poly
        antilog[q - 1] = antilog[0]
        if len(set(antilog[: q - 1])) != q - 1:
            raise ValueError(f"polynomial {self.primitive_poly:#x} is not primitive")

        object.__setattr__(self, "q", q)
        object.__setattr__(self, "log", tuple(log))
        object.__setattr__(self, "antilog", tuple(antilog))

    def alpha_pow(self, power: int) -> int:
        """alpha^power for any integer power."""
        return self.antilog[power % (self.q - 1)]

    def check_symbols(self, symbols: Sequence[int]) -> None:
        """Raise ValueError if any symbol falls outside [0, q)."""
        for s in symbols:
            if not 0 <= int(s) < self.q:
                raise ValueError(f"symbol {s} outside GF({self.q})")


@lru_cache(maxsize=None)
def get_field(k: int) -> Field:
    """Return the shared GF(2^k) instance for a supported width."""
    if k not in PRIMITIVE_POLYS:
        raise ValueError(f"unsupported field width k={k}, expected one of {SUPPORTED_BITS}")
    logger.debug(f"Building GF(2^{k}) tables with polynomial {PRIMITIVE_POLYS[k]:#x}")
    return Field(k=k, primitive_poly=PRIMITIVE_POLYS[k])


def field_for_order(q: int) -> Field:
    """Return GF(q) for q a supported power of two."""
    k = q.bit_length() - 1
    if q <= 0 or (1 << k) != q:
        raise ValueError(f"field order {q} is not a power of two")
    return get_field(k)


################### element arithmetic ###################

def gf_add(a: int, b: int) -> int:
    return a ^ b


def gf_mul(a: int, b: int, f: Field) -> int:
    """Product of two field elements."""
    if a == 0 or b == 0:
        return 0
    return f.antilog[(f.log[a] + f.log[b]) % (f.q - 1)]


def gf_div(a: int, b: int, f: Field) -> int:
    if b == 0:
        raise ZeroDivisionError("division by zero in GF(2^k)")
    if a == 0:
        return 0
    return f.antilog[(f.log[a] - f.log[b]) % (f.q - 1)]


def gf_inv(a: int, f: Field) -> int:
    """Multiplicative inverse; zero has none."""
    if a == 0:
        raise ZeroDivisionError("zero has no inverse in GF(2^k)")
    return f.antilog[(f.q - 1 - f.log[a]) % (f.q - 1)]


def gf_pow(a: int, power: int, f: Field) -> int:
    if a == 0:
        return 1 if power == 0 else 0
    return f.antilog[(f.log[a] * power) % (f.q - 1)]


def gf_mul_noLUT(a: int, b: int, f: Field) -> int:
    """Carry-less shift-and-reduce product, independent of the tables."""
    result = 0
    while b:
        if b & 1:
            result ^= a
        b >>= 1
        a <<= 1
        if a & f.q:
            a ^= f.primitive_poly
    return result


################### polynomials ###################
# Polynomials are lists of coefficients, highest degree first.

def gf_poly_scale(p: Sequence[int], x: int, f: Field) -> List[int]:
    return [gf_mul(c, x, f) for c in p]


def gf_poly_add(p: Sequence[int], q: Sequence[int]) -> List[int]:
    size = max(len(p), len(q))
    out = [0] * size
    for i, c in enumerate(p):
        out[i + size - len(p)] = c
    for i, c in enumerate(q):
        out[i + size - len(q)] ^= c
    return out


def gf_poly_mul(p: Sequence[int], q: Sequence[int], f: Field) -> List[int]:
    out = [0] * (len(p) + len(q) - 1)
    for j, qc in enumerate(q):
        if qc == 0:
            continue
        for i, pc in enumerate(p):
            out[i + j] ^= gf_mul(pc, qc, f)
    return out


def gf_poly_eval(p: Sequence[int], x: int, f: Field) -> int:
    """Horner evaluation."""
    y = p[0] if p else 0
    for c in p[1:]:
        y = gf_mul(y, x, f) ^ c
    return y


def gf_poly_div(dividend: Sequence[int], divisor: Sequence[int], f: Field) -> Tuple[List[int], List[int]]:
    """Synthetic division; divisor must be monic-normalizable (leading coeff != 0)."""
    if not divisor or divisor[0] == 0:
        raise ZeroDivisionError("divisor has zero leading coefficient")
    out = list(dividend)
    lead = divisor[0]
    for i in range(len(dividend) - (len(divisor) - 1)):
        coef = gf_div(out[i], lead, f)
        out[i] = coef
        if coef != 0:
            for j in range(1, len(divisor)):
                out[i + j] ^= gf_mul(divisor[j], coef, f)
    separator = len(out) - (len(divisor) - 1)
    return out[:separator], out[separator:]
