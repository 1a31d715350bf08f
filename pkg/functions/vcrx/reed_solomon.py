"""
Reed-Solomon Module
Narrow-sense RS(q-1, m) over GF(2^k): systematic encoding and bounded-distance
syndrome decoding (Berlekamp-Massey, Chien search, Forney)
"""

import logging
from dataclasses import dataclass, field
from typing import List, Sequence, Tuple, Union

import numpy as np

from .galois_field import (
    Field,
    field_for_order,
    gf_div,
    gf_mul,
    gf_poly_div,
    gf_poly_eval,
    gf_poly_mul,
)

logger = logging.getLogger(__name__)

SymbolSequence = List[int]

# First consecutive root of the generator polynomial (alpha^1 .. alpha^(n-m))
FCR = 1


class _DecodeFailureType:
    """Sentinel returned when the received word is beyond the decoding radius."""

    _instance = None

    def __new__(cls):
        if cls._instance is None:
            cls._instance = super().__new__(cls)
        return cls._instance

    def __bool__(self):
        return False

    def __repr__(self):
        return "DecodeFailure"


DecodeFailure = _DecodeFailureType()
DecodeResult = Union[SymbolSequence, _DecodeFailureType]


def is_failure(result) -> bool:
    return result is DecodeFailure


@dataclass(frozen=True)
class RsParams:
    """RS(n = q-1, m) with correction radius t = floor((n-m)/2)."""

    field: Field
    m: int
    n: int = field(init=False)
    t: int = field(init=False)
    generator: Tuple[int, ...] = field(init=False, repr=False)

    def __post_init__(self):
        n = self.field.q - 1
        if not 1 <= self.m <= n:
            raise ValueError(f"message length m={self.m} outside [1, {n}]")
        object.__setattr__(self, "n", n)
        object.__setattr__(self, "t", (n - self.m) // 2)
        object.__setattr__(self, "generator", tuple(rs_generator_poly(n - self.m, self.field)))

    @classmethod
    def for_alphabet(cls, q: int, m: int) -> "RsParams":
        return cls(field=field_for_order(q), m=m)

    @property
    def q(self) -> int:
        return self.field.q

    @property
    def nsym(self) -> int:
        return self.n - self.m


def rs_generator_poly(nsym: int, f: Field) -> List[int]:
    """g(x) = prod_{i=1..nsym} (x - alpha^i), highest degree first."""
    g = [1]
    for i in range(nsym):
        g = gf_poly_mul(g, [1, f.alpha_pow(i + FCR)], f)
    return g


def _check_length(symbols: Sequence[int], expected: int, what: str) -> None:
    if len(symbols) != expected:
        raise ValueError(f"{what} length {len(symbols)} != {expected}")


def rs_encode(msg: Sequence[int], p: RsParams) -> SymbolSequence:
    """Systematic encoding: codeword = msg followed by n-m parity symbols."""
    _check_length(msg, p.m, "message")
    p.field.check_symbols(msg)
    msg = [int(s) for s in msg]
    if p.nsym == 0:
        return msg
    _, remainder = gf_poly_div(msg + [0] * p.nsym, list(p.generator), p.field)
    return msg + remainder


def rs_syndromes(word: Sequence[int], p: RsParams) -> List[int]:
    """S_j = word(alpha^(FCR+j)), j = 0..n-m-1."""
    return [gf_poly_eval(word, p.field.alpha_pow(j + FCR), p.field) for j in range(p.nsym)]


def rs_check(word: Sequence[int], p: RsParams) -> bool:
    """True if every syndrome vanishes."""
    return not any(rs_syndromes(word, p))


################### decoding ###################
# Locator and evaluator polynomials below are lowest degree first.

def _poly_eval_low(poly: Sequence[int], x: int, f: Field) -> int:
    y = 0
    for c in reversed(poly):
        y = gf_mul(y, x, f) ^ c
    return y


def rs_find_error_locator(synd: Sequence[int], f: Field) -> List[int]:
    """Berlekamp-Massey: shortest LFSR Lambda(x) generating the syndromes."""
    locator = [1]
    prev = [1]
    length = 0
    shift = 1
    prev_disc = 1
    for step, s in enumerate(synd):
        disc = s
        for i in range(1, length + 1):
            if i < len(locator):
                disc ^= gf_mul(locator[i], synd[step - i], f)
        if disc == 0:
            shift += 1
            continue
        coef = gf_div(disc, prev_disc, f)
        correction = [0] * shift + [gf_mul(coef, c, f) for c in prev]
        updated = locator + [0] * (len(correction) - len(locator))
        for i, c in enumerate(correction):
            updated[i] ^= c
        if 2 * length <= step:
            prev = locator
            length = step + 1 - length
            prev_disc = disc
            shift = 1
        else:
            shift += 1
        locator = updated
    while len(locator) > 1 and locator[-1] == 0:
        locator.pop()
    if len(locator) - 1 != length:
        # Degree short of the LFSR length: the pattern is not a valid error locator
        return locator + [0] * (length + 1 - len(locator))
    return locator


def rs_find_errors(locator: Sequence[int], p: RsParams) -> List[int]:
    """Chien search: degrees d in [0, n) with Lambda(alpha^-d) = 0."""
    f = p.field
    return [d for d in range(p.n) if _poly_eval_low(locator, f.alpha_pow(-d), f) == 0]


def rs_find_error_evaluator(synd: Sequence[int], locator: Sequence[int], p: RsParams) -> List[int]:
    """Omega(x) = S(x) Lambda(x) mod x^(n-m)."""
    f = p.field
    out = [0] * p.nsym
    for i, s in enumerate(synd):
        if s == 0:
            continue
        for j, c in enumerate(locator):
            if i + j < p.nsym:
                out[i + j] ^= gf_mul(s, c, f)
    return out


def rs_correct_errata(word: Sequence[int], synd: Sequence[int], locator: Sequence[int],
                      degrees: Sequence[int], p: RsParams) -> SymbolSequence:
    """Forney: e_k = X_k^(1-FCR) Omega(X_k^-1) / Lambda'(X_k^-1)."""
    f = p.field
    evaluator = rs_find_error_evaluator(synd, locator, p)
    # Formal derivative in characteristic 2 keeps odd-degree terms only
    derivative = [locator[i] if i % 2 == 1 else 0 for i in range(1, len(locator))]
    corrected = list(word)
    for d in degrees:
        x_inv = f.alpha_pow(-d)
        denom = _poly_eval_low(derivative, x_inv, f)
        if denom == 0:
            raise ZeroDivisionError("locator derivative vanished at an error position")
        magnitude = gf_div(_poly_eval_low(evaluator, x_inv, f), denom, f)
        magnitude = gf_mul(magnitude, f.alpha_pow(d * (1 - FCR)), f)
        corrected[p.n - 1 - d] ^= magnitude
    return corrected


def rs_correct(received: Sequence[int], p: RsParams) -> DecodeResult:
    """Return the nearest codeword within radius t, or DecodeFailure."""
    synd = rs_syndromes(received, p)
    if not any(synd):
        return list(received)
    locator = rs_find_error_locator(synd, p.field)
    n_errors = len(locator) - 1
    if n_errors > p.t or locator[-1] == 0:
        logger.debug(f"Locator degree {n_errors} exceeds radius t={p.t}")
        return DecodeFailure
    degrees = rs_find_errors(locator, p)
    if len(degrees) != n_errors:
        logger.debug(f"Chien search found {len(degrees)} roots for locator of degree {n_errors}")
        return DecodeFailure
    try:
        corrected = rs_correct_errata(received, synd, locator, degrees, p)
    except ZeroDivisionError:
        return DecodeFailure
    if not rs_check(corrected, p):
        return DecodeFailure
    return corrected


def rs_decode(received: Sequence[int], p: RsParams) -> DecodeResult:
    """Bounded-distance decoding to the message of the nearest codeword.

    Args:
        received (Sequence[int]): Length-n word over GF(q)
        p (RsParams): Code parameters

    Returns:
        The length-m message, or DecodeFailure when no codeword lies within t.
        Beyond t the result may also be a wrong message (miscorrection).

    Raises:
        ValueError: If the word length or a symbol is invalid
    """
    _check_length(received, p.n, "received word")
    p.field.check_symbols(received)
    codeword = rs_correct([int(s) for s in received], p)
    if is_failure(codeword):
        return DecodeFailure
    return codeword[: p.m]


def sample_codeword(p: RsParams, rng: np.random.Generator) -> SymbolSequence:
    """Encode a uniformly drawn message, giving a uniform codeword."""
    msg = rng.integers(0, p.q, size=p.m).tolist()
    return rs_encode(msg, p)


def inject_errors(word: Sequence[int], n_errors: int, q: int, rng: np.random.Generator) -> SymbolSequence:
    """Replace n_errors distinct positions with different random symbols."""
    if not 0 <= n_errors <= len(word):
        raise ValueError(f"cannot inject {n_errors} errors into a word of length {len(word)}")
    out = [int(s) for s in word]
    for pos in rng.choice(len(word), size=n_errors, replace=False):
        out[pos] ^= int(rng.integers(1, q))
    return out
