"""
Evaluation Module
Held-out metrics for trained quantizers and the end-to-end key experiment
"""

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import Dict, Iterator, List, Optional, Sequence, Tuple

import numpy as np
from scipy import stats

from .errors import FileFormatError, MissingModelError
from .netcore import Mlp
from .reed_solomon import RsParams
from .sketch import generate_keys, key_rate_bits, leakage_bound_bits
from .sources import SampleBatch, batch_rng
from .vpq import InputScalers, mi_all_pairs, mi_vlb, quantize, quantize_probs

logger = logging.getLogger(__name__)

KEY_CSV_COLUMNS = ("m", "key_rate_bits", "key_mismatch_rate", "decode_failure_rate", "leakage_bound_bits",
                   "trials", "key_mismatch_se", "predicted_mismatch_rate")
SKETCH_CSV_COLUMNS = ("m", "trial", "sketch_hex")


@dataclass
class MetricsRecord:
    h_w_bits: float
    h_v_bits: float
    agree_rate: float
    n_test: int
    agree_se: float = 0.0
    chi2_statistic: Optional[float] = None
    chi2_p_value: Optional[float] = None
    i_vlb_bits: Optional[float] = None
    i_vub_bits: Optional[float] = None

    def __post_init__(self):
        if not 0.0 <= self.agree_rate <= 1.0:
            raise ValueError(f"agreement rate {self.agree_rate} outside [0, 1]")

    @property
    def symbol_mismatch_rate(self) -> float:
        return 1.0 - self.agree_rate

    def to_dict(self) -> Dict[str, object]:
        out = asdict(self)
        out["symbol_mismatch_rate"] = self.symbol_mismatch_rate
        return {k: v for k, v in out.items() if v is not None}


@dataclass(frozen=True)
class KeyExperimentRow:
    m: int
    key_rate_bits: float
    key_mismatch_rate: float
    decode_failure_rate: float
    leakage_bound_bits: float
    trials: int
    key_mismatch_se: float
    predicted_mismatch_rate: float
    sketches: Tuple[str, ...] = field(default=(), repr=False)

    def as_tuple(self) -> Tuple:
        return tuple(getattr(self, name) for name in KEY_CSV_COLUMNS)


def _require_rows(data, what: str) -> None:
    if len(data) == 0:
        raise ValueError(f"{what}: empty dataset")


def entropy_bits(p: np.ndarray) -> float:
    p = np.asarray(p, dtype=np.float64)
    nz = p[p > 0]
    return float(-(nz * np.log2(nz)).sum())


def empirical_entropy_bits(encoder: Mlp, observations: np.ndarray, chunk: int = 8192) -> float:
    """Entropy of the encoder's output distribution averaged over the whole dataset."""
    _require_rows(observations, "empirical_entropy_bits")
    probs = encoder.predict_proba(observations, chunk=chunk)
    return entropy_bits(probs.mean(axis=0))


def agreement_rate(enc_a: Mlp, enc_b: Mlp, data: SampleBatch, chunk: int = 8192) -> float:
    """Fraction of rows where both parties quantize to the same symbol."""
    _require_rows(data, "agreement_rate")
    w = quantize(enc_a, data.x, chunk=chunk)
    v = quantize(enc_b, data.y, chunk=chunk)
    return float(np.mean(w == v))


def mi_bounds_on_test(encoder: Mlp, predictor: Optional[Mlp], data: SampleBatch,
                      chunk: int = 8192) -> Tuple[float, float]:
    """(I_VLB, I_VUB) in bits over the full test set.

    The all-pairs term factorizes, so the whole set is one batch.

    Raises:
        MissingModelError: If no predictor was trained
        FileFormatError: If the dataset has no eavesdropper columns
    """
    if predictor is None:
        raise MissingModelError("mutual information bounds need a trained predictor")
    _require_rows(data, "mi_bounds_on_test")
    if not data.has_eve:
        raise FileFormatError("dataset carries no eavesdropper observations; it was generated without Eve")
    pw = encoder.predict_proba(data.x, chunk=chunk)
    pz = predictor.predict_proba(data.z, chunk=chunk)
    vlb = mi_vlb(pw, pz).item()
    vub = vlb - mi_all_pairs(pw, pz).item()
    return vlb, vub


def chi_square_uniformity(symbols: Sequence[int], q: int) -> Tuple[float, float]:
    """Pearson chi-square of symbol counts against the uniform law on q cells.

    Raises:
        ValueError: If fewer than 5q symbols are given
    """
    symbols = np.asarray(symbols, dtype=np.int64)
    if len(symbols) < 5 * q:
        raise ValueError(f"chi-square test needs at least {5 * q} symbols, got {len(symbols)}")
    counts = np.bincount(symbols, minlength=q)
    if len(counts) > q:
        raise ValueError(f"symbol {int(symbols.max())} outside alphabet of size {q}")
    result = stats.chisquare(counts)
    return float(result.statistic), float(result.pvalue)


def binomial_tail(n: int, t: int, p: float) -> float:
    """Pr{Bin(n, p) > t}: block error rate of a radius-t decoder under i.i.d. symbol errors."""
    return float(stats.binom.sf(t, n, p))


def compute_metrics(enc_x: Mlp, enc_y: Mlp, data: SampleBatch, q: int, predictor: Optional[Mlp] = None,
                    with_mi: bool = False, chunk: int = 8192) -> MetricsRecord:
    """Test-set entropy, agreement, uniformity and optionally MI bounds."""
    _require_rows(data, "compute_metrics")
    pw = enc_x.predict_proba(data.x, chunk=chunk)
    pv = enc_y.predict_proba(data.y, chunk=chunk)
    w, v = quantize_probs(pw), quantize_probs(pv)
    agree = float(np.mean(w == v))
    record = MetricsRecord(h_w_bits=entropy_bits(pw.mean(axis=0)), h_v_bits=entropy_bits(pv.mean(axis=0)),
                           agree_rate=agree, n_test=len(data),
                           agree_se=math.sqrt(agree * (1 - agree) / len(data)))
    if len(w) >= 5 * q:
        record.chi2_statistic, record.chi2_p_value = chi_square_uniformity(w, q)
    if with_mi:
        record.i_vlb_bits, record.i_vub_bits = mi_bounds_on_test(enc_x, predictor, data, chunk=chunk)
    logger.info({"message": "Computed test metrics", **record.to_dict()})
    return record


def _run_trials(w_blocks: np.ndarray, v_blocks: np.ndarray, rs: RsParams, seed: int, stream: int,
                workers: int) -> List[Tuple[bool, bool, str]]:
    def trial(index: int) -> Tuple[bool, bool, str]:
        keys, sketch = generate_keys(w_blocks[index].tolist(), v_blocks[index].tolist(), rs,
                                     batch_rng(seed, stream, rs.m, index))
        return keys.agree, keys.failed, sketch.to_hex()

    indices = range(len(w_blocks))
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(trial, indices))
    return [trial(i) for i in indices]


def key_experiment(enc_a: Mlp, enc_b: Mlp, source, rs_list: Sequence[int], trials: int, q: int, seed: int,
                   h_w_bits: float, i_vub_bits: Optional[float] = None, stream: int = 0, workers: int = 1,
                   chunk: int = 8192, scalers: Optional[InputScalers] = None) -> List[KeyExperimentRow]:
    """Code-offset key agreement over `trials` blocks of n = q - 1 fresh pairs per m.

    `source` should be a simulator so that no pair is shared between trials.
    Its draws pass through `scalers` before quantization. Decode failures
    count as mismatches and are never raised. The leakage bound uses the
    supplied entropy and I_VUB estimates (I_VUB 0 when no eavesdropper is
    modeled).
    """
    if trials < 1:
        raise ValueError("trials must be positive")
    rows = []
    for m in rs_list:
        rs = RsParams.for_alphabet(q, int(m))
        data = source.sample(trials * rs.n, batch_rng(seed, stream, rs.m))
        if scalers is not None:
            data = scalers.apply(data)
        w_blocks = quantize(enc_a, data.x, chunk=chunk).reshape(trials, rs.n)
        v_blocks = quantize(enc_b, data.y, chunk=chunk).reshape(trials, rs.n)
        p_symbol = float(np.mean(w_blocks != v_blocks))

        outcomes = _run_trials(w_blocks, v_blocks, rs, seed, stream, workers)
        mismatches = sum(1 for agree, _, _ in outcomes if not agree)
        failures = sum(1 for _, failed, _ in outcomes if failed)
        rate = mismatches / trials
        row = KeyExperimentRow(
            m=rs.m,
            key_rate_bits=key_rate_bits(rs),
            key_mismatch_rate=rate,
            decode_failure_rate=failures / trials,
            leakage_bound_bits=leakage_bound_bits(h_w_bits, i_vub_bits or 0.0, q, rs.n),
            trials=trials,
            key_mismatch_se=math.sqrt(rate * (1 - rate) / trials),
            predicted_mismatch_rate=binomial_tail(rs.n, rs.t, p_symbol),
            sketches=tuple(s for _, _, s in outcomes),
        )
        logger.info({"message": "Key experiment", "m": rs.m, "t": rs.t, "symbol_mismatch": p_symbol,
                     "key_mismatch_rate": rate, "decode_failures": failures})
        rows.append(row)
    return rows


def sketch_rows(rows: Sequence[KeyExperimentRow]) -> Iterator[Tuple[int, int, str]]:
    """(m, trial, sketch hex) for every published sketch."""
    for row in rows:
        for trial, sketch_hex in enumerate(row.sketches):
            yield row.m, trial, sketch_hex
