"""
VPQ Module
Variational probabilistic quantization: mismatch, uniformity and leakage
objectives, and the adversarial encoder/predictor training loop
"""

import logging
import math
from collections import deque
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Iterator, List, Optional, Sequence, Tuple, Union

import numpy as np
from tqdm import tqdm

from .errors import GraphStateError, NonFiniteError, TrainingAborted
from .netcore import Mlp, MlpSpec, Parameter, Tensor, make_optimizer
from .sources import SampleBatch, Standardizer, batch_rng

logger = logging.getLogger(__name__)

LAMBDA2_MAX = 1e4
HISTORY_COLUMNS = ("step", "l_mr", "l_ent", "i_vlb_bits", "i_vub_bits", "lambda2")

ProbInput = Union[Tensor, np.ndarray]


def _as_tensor(p: ProbInput) -> Tensor:
    return p if isinstance(p, Tensor) else Tensor(p)


def _check_pair(a: Tensor, b: Tensor, what: str) -> None:
    if a.shape != b.shape or len(a.shape) != 2:
        raise ValueError(f"{what}: probability batches must share a B x q shape, got {a.shape} and {b.shape}")


################### objectives ###################

def loss_mismatch(pw: ProbInput, pv: ProbInput) -> Tensor:
    """L_MR = -(1/B) sum_i <p(.|x_i), p(.|y_i)>, in [-1, 0]."""
    pw, pv = _as_tensor(pw), _as_tensor(pv)
    _check_pair(pw, pv, "loss_mismatch")
    return -((pw * pv).sum(axis=1).mean())


@dataclass
class EmaMarginals:
    """Running output marginals of the two encoders.

    p_w and q_v carry the current batch's graph; the previous estimate enters
    as a constant.
    """

    p_w: Tensor
    q_v: Tensor
    alpha: float

    def __post_init__(self):
        if not 0.0 <= self.alpha < 1.0:
            raise ValueError(f"EMA factor {self.alpha} outside [0, 1)")

    @classmethod
    def uniform(cls, q: int, alpha: float) -> "EmaMarginals":
        return cls(p_w=Tensor(np.full(q, 1.0 / q)), q_v=Tensor(np.full(q, 1.0 / q)), alpha=alpha)

    def detached(self) -> "EmaMarginals":
        return EmaMarginals(p_w=self.p_w.detach(), q_v=self.q_v.detach(), alpha=self.alpha)


def ema_update(m: EmaMarginals, pw_batch: ProbInput, pv_batch: ProbInput) -> EmaMarginals:
    """p_t = alpha p_{t-1} + (1 - alpha) mean_i p(.|x_i); same for q_t."""
    pw_batch, pv_batch = _as_tensor(pw_batch), _as_tensor(pv_batch)
    _check_pair(pw_batch, pv_batch, "ema_update")
    a = m.alpha
    p_w = Tensor(a * m.p_w.data) + pw_batch.mean(axis=0) * (1.0 - a)
    q_v = Tensor(a * m.q_v.data) + pv_batch.mean(axis=0) * (1.0 - a)
    return EmaMarginals(p_w=p_w, q_v=q_v, alpha=a)


def _entropy_bits(p: Tensor) -> Tensor:
    return -((p * p.log2()).sum())


def loss_entropy(m: EmaMarginals) -> Tensor:
    """L_ENT = -(H(p_w) + H(q_v)) / (2 (1 - alpha)), bits.

    The 1/(1 - alpha) factor restores the gradient scale the EMA shrinks.
    """
    return (_entropy_bits(m.p_w) + _entropy_bits(m.q_v)) * (-0.5 / (1.0 - m.alpha))


def mi_vlb(pw: ProbInput, pz: ProbInput) -> Tensor:
    """I_VLB = (1/B) sum_i sum_w p(w|x_i) log2 p_psi(w|z_i), without the H(W) term."""
    pw, pz = _as_tensor(pw), _as_tensor(pz)
    _check_pair(pw, pz, "mi_vlb")
    return (pw * pz.log2()).sum(axis=1).mean()


def mi_all_pairs(pw: ProbInput, pz: ProbInput) -> Tensor:
    """(1/B^2) sum_ij sum_w p(w|x_i) log2 p_psi(w|z_j)."""
    pw, pz = _as_tensor(pw), _as_tensor(pz)
    _check_pair(pw, pz, "mi_all_pairs")
    # the double sum factorizes over i and j
    return (pw.mean(axis=0) * pz.log2().mean(axis=0)).sum()


def mi_vub(pw: ProbInput, pz: ProbInput) -> Tensor:
    """I_VUB = I_VLB - all-pairs cross term, bits."""
    return mi_vlb(pw, pz) - mi_all_pairs(pw, pz)


def adaptive_lambda2(grad_ab_norm: float, grad_vub_norm: float, delta: float) -> float:
    """||grad L_AB|| / (||grad I_VUB|| + delta) at the last layer, clamped to [0, LAMBDA2_MAX]."""
    if grad_ab_norm < 0 or grad_vub_norm < 0:
        raise ValueError("gradient norms must be nonnegative")
    return float(min(max(grad_ab_norm / (grad_vub_norm + delta), 0.0), LAMBDA2_MAX))


################### configuration and history ###################

@dataclass(frozen=True)
class VpqConfig:
    q: int = 16
    lambda1: float = 1.0
    lambda2: Union[str, float] = "adaptive"
    delta: float = 1e-7
    alpha: float = 0.6
    steps_max: int = 20000
    steps_predictor_only: int = 2000
    batch_size: int = 512
    shared_encoder: bool = True
    lr: float = 1e-4
    weight_decay: float = 0.0
    optimizer: str = "adam"
    encoder_hidden: Tuple[int, ...] = (256, 256, 256)
    predictor_hidden: Tuple[int, ...] = (512, 512, 512, 512)
    use_batchnorm: bool = True
    log_every: int = 500

    def __post_init__(self):
        object.__setattr__(self, "encoder_hidden", tuple(self.encoder_hidden))
        object.__setattr__(self, "predictor_hidden", tuple(self.predictor_hidden))
        if self.q < 2:
            raise ValueError(f"alphabet size q={self.q} must be at least 2")
        if self.lambda1 <= 0:
            raise ValueError("lambda1 must be positive")
        if self.delta <= 0:
            raise ValueError("delta must be positive")
        if self.lambda2 != "adaptive" and (isinstance(self.lambda2, str) or self.lambda2 < 0):
            raise ValueError(f"lambda2 must be 'adaptive' or a nonnegative number, got {self.lambda2!r}")
        if not 0 <= self.steps_predictor_only <= self.steps_max:
            raise ValueError("steps_predictor_only must lie in [0, steps_max]")
        if self.optimizer not in ("adam", "adamw"):
            raise ValueError(f"unknown optimizer {self.optimizer!r}")
        if self.batch_size < 2:
            raise ValueError("batch norm needs batches of at least 2 rows")

    @property
    def adaptive(self) -> bool:
        return self.lambda2 == "adaptive"


@dataclass(frozen=True)
class HistoryRecord:
    step: int
    l_mr: float
    l_ent: float
    i_vlb_bits: Optional[float]
    i_vub_bits: Optional[float]
    lambda2: float


@dataclass
class TrainHistory:
    """Per-step training records; the MI columns are None when no Eve is modeled."""

    records: List[HistoryRecord] = field(default_factory=list)

    def append(self, record: HistoryRecord) -> None:
        for name in HISTORY_COLUMNS[1:]:
            value = getattr(record, name)
            if value is not None and not math.isfinite(value):
                raise ValueError(f"non-finite {name} at step {record.step}")
        self.records.append(record)

    def __len__(self) -> int:
        return len(self.records)

    @property
    def last(self) -> Optional[HistoryRecord]:
        return self.records[-1] if self.records else None

    def rows(self) -> Iterator[Tuple]:
        for r in self.records:
            yield tuple(getattr(r, name) for name in HISTORY_COLUMNS)


@dataclass
class InputScalers:
    """Standardizers for x, y and z fit on the training split."""

    x: Standardizer
    y: Standardizer
    z: Optional[Standardizer] = None

    @classmethod
    def fit(cls, data: SampleBatch) -> "InputScalers":
        return cls(x=Standardizer.fit(data.x), y=Standardizer.fit(data.y),
                   z=Standardizer.fit(data.z) if data.has_eve else None)

    @classmethod
    def identity(cls, dims: Tuple[int, int, int]) -> "InputScalers":
        return cls(x=Standardizer.identity(dims[0]), y=Standardizer.identity(dims[1]),
                   z=Standardizer.identity(dims[2]) if dims[2] else None)

    def apply(self, data: SampleBatch) -> SampleBatch:
        z = self.z.apply(data.z) if self.z is not None and data.has_eve else data.z
        return SampleBatch(x=self.x.apply(data.x), y=self.y.apply(data.y), z=z)

    def arrays(self) -> List[np.ndarray]:
        out = [self.x.mean, self.x.std, self.y.mean, self.y.std]
        if self.z is not None:
            out += [self.z.mean, self.z.std]
        return out


@dataclass
class TrainedModels:
    encoder_x: Mlp
    encoder_y: Mlp
    predictor: Optional[Mlp]
    history: TrainHistory
    scalers: InputScalers

    @property
    def shared_encoder(self) -> bool:
        return self.encoder_x is self.encoder_y


################### training ###################

def _unique_params(*models: Optional[Mlp]) -> List[Parameter]:
    seen, params = set(), []
    for model in models:
        if model is None:
            continue
        for p in model.parameters():
            if id(p) not in seen:
                seen.add(id(p))
                params.append(p)
    return params


def _grad_norm(grads: Sequence[np.ndarray]) -> float:
    return math.sqrt(sum(float((g ** 2).sum()) for g in grads))


def _iter_batches(source, batch_size: int, seed: int, steps: int, scalers: InputScalers,
                  workers: int) -> Iterator[Tuple[int, SampleBatch]]:
    """Batches keyed by step index; with workers > 1 a bounded window is drawn ahead in order."""

    def draw(step: int) -> SampleBatch:
        return scalers.apply(source.sample(batch_size, batch_rng(seed, step)))

    if workers <= 1:
        for step in range(steps):
            yield step, draw(step)
        return
    with ThreadPoolExecutor(max_workers=workers) as pool:
        pending = deque()
        submitted = 0
        for step in range(steps):
            while submitted < steps and len(pending) < 2 * workers:
                pending.append(pool.submit(draw, submitted))
                submitted += 1
            yield step, pending.popleft().result()


def build_models(cfg: VpqConfig, dims: Tuple[int, int, int], with_predictor: bool,
                 rng: np.random.Generator) -> Tuple[Mlp, Mlp, Optional[Mlp]]:
    """Encoders then predictor, initialized in that order from `rng`."""
    dx, dy, dz = dims
    enc_x = Mlp(MlpSpec(dx, cfg.encoder_hidden, cfg.q, cfg.use_batchnorm), rng)
    if cfg.shared_encoder:
        if dx != dy:
            raise ValueError(f"a shared encoder needs equal x/y widths, got {dx} and {dy}")
        enc_y = enc_x
    else:
        enc_y = Mlp(MlpSpec(dy, cfg.encoder_hidden, cfg.q, cfg.use_batchnorm), rng)
    predictor = None
    if with_predictor:
        predictor = Mlp(MlpSpec(dz, cfg.predictor_hidden, cfg.q, cfg.use_batchnorm), rng)
    return enc_x, enc_y, predictor


def train_vpq(cfg: VpqConfig, source, rng: np.random.Generator, scalers: Optional[InputScalers] = None,
              progress: bool = False, workers: int = 1) -> TrainedModels:
    """Alternating predictor / encoder training.

    Each step draws one batch; with Eve present the predictor first ascends
    I_VLB, then the encoders descend L_AB + lambda2 I_VUB on the same batch.
    The last `steps_predictor_only` steps refit the predictor against frozen
    eval-mode encoders. Without Eve, no predictor is built and every step
    trains the encoders.

    Args:
        cfg (VpqConfig): Hyperparameters
        source: Object with `dims` (dx, dy, dz) and `sample(batch, rng)`
        rng (np.random.Generator): Drives parameter init and the batch stream seed
        scalers (InputScalers): Input standardization, identity if omitted
        progress (bool): Show a tqdm bar
        workers (int): Batch generation threads

    Returns:
        TrainedModels

    Raises:
        TrainingAborted: When a loss or activation becomes non-finite
    """
    dims = tuple(source.dims)
    with_eve = dims[2] > 0
    enc_x, enc_y, predictor = build_models(cfg, dims, with_eve, rng)
    batch_seed = int(rng.integers(0, 2 ** 63))
    scalers = scalers or InputScalers.identity(dims)

    enc_params = _unique_params(enc_x, enc_y)
    enc_opt = make_optimizer(enc_params, cfg.optimizer, cfg.lr, cfg.weight_decay)
    pred_opt = make_optimizer(predictor.parameters(), cfg.optimizer, cfg.lr, cfg.weight_decay) if predictor else None
    last_layers = [enc_x.last_layer] if enc_x is enc_y else [enc_x.last_layer, enc_y.last_layer]
    last_index = [next(i for i, p in enumerate(enc_params) if p is w) for w in last_layers]

    encoder_steps = cfg.steps_max - (cfg.steps_predictor_only if with_eve else 0)
    marginals = EmaMarginals.uniform(cfg.q, cfg.alpha)
    lambda2 = 0.0 if cfg.adaptive else float(cfg.lambda2)
    history = TrainHistory()

    logger.info({"message": "Starting VPQ training", "q": cfg.q, "dims": list(dims), "steps": cfg.steps_max,
                 "encoder_steps": encoder_steps, "shared_encoder": cfg.shared_encoder, "eve": with_eve})
    batches = _iter_batches(source, cfg.batch_size, batch_seed, cfg.steps_max, scalers, workers)
    for step, batch in tqdm(batches, total=cfg.steps_max, disable=not progress, desc="vpq"):
        try:
            frozen = step >= encoder_steps
            enc_x.train(not frozen)
            enc_y.train(not frozen)
            pw = enc_x(batch.x)
            pv = enc_y(batch.y)
            l_mr = loss_mismatch(pw, pv)
            marginals = ema_update(marginals, pw, pv)
            l_ent = loss_entropy(marginals)
            l_ab = l_ent + l_mr * cfg.lambda1

            i_vlb = i_vub = None
            if predictor is not None:
                # predictor ascends I_VLB against the current encoder output
                target = Tensor(pw.data)
                predictor.train()
                pred_opt.zero_grad()
                vlb = mi_vlb(target, predictor(batch.z))
                (-vlb).backward()
                pred_opt.step()
                i_vlb = vlb.item()

                pz = Tensor(predictor(batch.z, update_stats=False).data)
                vub = mi_vub(pw, pz)
                i_vub = vub.item()

            if not frozen:
                enc_opt.zero_grad()
                if predictor is None or (not cfg.adaptive and lambda2 == 0.0):
                    l_ab.backward()
                elif cfg.adaptive:
                    l_ab.backward()
                    g_ab = [p.grad.copy() for p in enc_params]
                    enc_opt.zero_grad()
                    vub.backward()
                    g_vub = [p.grad.copy() for p in enc_params]
                    lambda2 = adaptive_lambda2(_grad_norm([g_ab[i] for i in last_index]),
                                               _grad_norm([g_vub[i] for i in last_index]),
                                               cfg.delta)
                    for p, ga, gv in zip(enc_params, g_ab, g_vub):
                        p.grad = ga + lambda2 * gv
                else:
                    (l_ab + vub * lambda2).backward()
                enc_opt.step()
            marginals = marginals.detached()

            record = HistoryRecord(step=step, l_mr=l_mr.item(), l_ent=l_ent.item(), i_vlb_bits=i_vlb,
                                   i_vub_bits=i_vub, lambda2=lambda2)
            history.append(record)
        except (NonFiniteError, GraphStateError, ValueError) as e:
            logger.error(f"Training aborted at step {step}: {e}")
            raise TrainingAborted(step, str(e)) from e

        if cfg.log_every and (step + 1) % cfg.log_every == 0:
            logger.info({"message": "VPQ progress", "step": step + 1, "l_mr": record.l_mr, "l_ent": record.l_ent,
                         "i_vlb_bits": i_vlb, "i_vub_bits": i_vub, "lambda2": lambda2})

    for model in (enc_x, enc_y, predictor):
        if model is not None:
            model.eval()
    logger.info({"message": "VPQ training finished", "steps": len(history)})
    return TrainedModels(encoder_x=enc_x, encoder_y=enc_y, predictor=predictor, history=history, scalers=scalers)


################### quantization ###################

def quantize_probs(probs: np.ndarray) -> np.ndarray:
    """Row-wise argmax; ties resolve to the lowest symbol."""
    return np.argmax(np.asarray(probs), axis=1).astype(np.int64)


def quantize(encoder: Mlp, observations: np.ndarray, chunk: int = 8192) -> np.ndarray:
    """Hard symbols from an eval-mode encoder."""
    return quantize_probs(encoder.predict_proba(observations, chunk=chunk))
