"""
Netcore Module
Minimal deterministic neural engine: numpy tensors with reverse-mode gradients,
dense / batch-norm / ReLU / softmax layers, Adam and AdamW, and model files
"""

import json
import logging
import math
from dataclasses import asdict, dataclass, field
from typing import Callable, Dict, List, Optional, Sequence, Tuple, Union

import numpy as np

from .errors import FileFormatError, GraphStateError, NonFiniteError

logger = logging.getLogger(__name__)

LOG_CLAMP = 1e-12
BN_MOMENTUM = 0.1
BN_EPS = 1e-5
MODEL_MAGIC = "VCRXMODEL"
MODEL_VERSION = 1

ArrayLike = Union[np.ndarray, float, int]


def _check_finite(data: np.ndarray, op: str) -> np.ndarray:
    if not np.all(np.isfinite(data)):
        raise NonFiniteError(f"non-finite value produced by {op}")
    return data


def _unbroadcast(grad: np.ndarray, shape: Tuple[int, ...]) -> np.ndarray:
    """Sum a broadcast gradient back down to the operand's shape."""
    while grad.ndim > len(shape):
        grad = grad.sum(axis=0)
    for axis, size in enumerate(shape):
        if size == 1 and grad.shape[axis] != 1:
            grad = grad.sum(axis=axis, keepdims=True)
    return grad


class Tensor:
    """Dense float64 array with a gradient buffer and the closure that feeds its parents."""

    def __init__(self, data: ArrayLike, _children: Tuple["Tensor", ...] = (), _op: str = "",
                 requires_grad: bool = False):
        self.data = np.array(data, dtype=np.float64)
        self.grad = np.zeros_like(self.data)
        self.requires_grad = requires_grad or any(c.requires_grad for c in _children)
        self._backward: Callable[[], None] = lambda: None
        self._prev = _children
        self._op = _op

    @property
    def shape(self) -> Tuple[int, ...]:
        return self.data.shape

    def item(self) -> float:
        return float(self.data)

    def detach(self) -> "Tensor":
        return Tensor(self.data.copy())

    def zero_grad(self) -> None:
        self.grad = np.zeros_like(self.data)

    def __repr__(self):
        return f"Tensor(shape={self.shape}, op={self._op or 'leaf'})"

    def _make(self, data: np.ndarray, children: Tuple["Tensor", ...], op: str) -> "Tensor":
        return Tensor(_check_finite(data, op), children, op)

    ################### elementwise ###################

    def __add__(self, other) -> "Tensor":
        other = other if isinstance(other, Tensor) else Tensor(other)
        out = self._make(self.data + other.data, (self, other), "+")

        def _backward():
            self.grad = self.grad + _unbroadcast(out.grad, self.shape)
            other.grad = other.grad + _unbroadcast(out.grad, other.shape)
        out._backward = _backward
        return out

    __radd__ = __add__

    def __neg__(self) -> "Tensor":
        return self * -1.0

    def __sub__(self, other) -> "Tensor":
        return self + (-other if isinstance(other, Tensor) else Tensor(-np.asarray(other, dtype=np.float64)))

    def __rsub__(self, other) -> "Tensor":
        return (-self) + other

    def __mul__(self, other) -> "Tensor":
        other = other if isinstance(other, Tensor) else Tensor(other)
        out = self._make(self.data * other.data, (self, other), "*")

        def _backward():
            self.grad = self.grad + _unbroadcast(out.grad * other.data, self.shape)
            other.grad = other.grad + _unbroadcast(out.grad * self.data, other.shape)
        out._backward = _backward
        return out

    __rmul__ = __mul__

    def __truediv__(self, other) -> "Tensor":
        if isinstance(other, Tensor):
            return self * other.reciprocal()
        return self * (1.0 / np.asarray(other, dtype=np.float64))

    def reciprocal(self) -> "Tensor":
        out = self._make(1.0 / self.data, (self,), "1/x")

        def _backward():
            self.grad = self.grad - out.grad / (self.data ** 2)
        out._backward = _backward
        return out

    def __matmul__(self, other: "Tensor") -> "Tensor":
        out = self._make(self.data @ other.data, (self, other), "@")

        def _backward():
            self.grad = self.grad + out.grad @ other.data.T
            other.grad = other.grad + self.data.T @ out.grad
        out._backward = _backward
        return out

    def relu(self) -> "Tensor":
        out = self._make(np.maximum(self.data, 0.0), (self,), "relu")

        def _backward():
            self.grad = self.grad + out.grad * (self.data > 0)
        out._backward = _backward
        return out

    def log2(self) -> "Tensor":
        """log2 with inputs clamped at LOG_CLAMP; no gradient through the clamp."""
        clamped = np.maximum(self.data, LOG_CLAMP)
        out = self._make(np.log2(clamped), (self,), "log2")

        def _backward():
            self.grad = self.grad + out.grad * (self.data > LOG_CLAMP) / (clamped * math.log(2.0))
        out._backward = _backward
        return out

    ################### reductions ###################

    def sum(self, axis: Optional[int] = None, keepdims: bool = False) -> "Tensor":
        out = self._make(self.data.sum(axis=axis, keepdims=keepdims), (self,), "sum")

        def _backward():
            g = out.grad
            if axis is not None and not keepdims:
                g = np.expand_dims(g, axis)
            self.grad = self.grad + np.broadcast_to(g, self.shape)
        out._backward = _backward
        return out

    def mean(self, axis: Optional[int] = None, keepdims: bool = False) -> "Tensor":
        count = self.data.size if axis is None else self.shape[axis]
        return self.sum(axis=axis, keepdims=keepdims) * (1.0 / count)

    def softmax(self) -> "Tensor":
        """Row-wise softmax with max subtraction."""
        shifted = self.data - self.data.max(axis=1, keepdims=True)
        e = np.exp(shifted)
        probs = e / e.sum(axis=1, keepdims=True)
        out = self._make(probs, (self,), "softmax")

        def _backward():
            dot = (out.grad * probs).sum(axis=1, keepdims=True)
            self.grad = self.grad + probs * (out.grad - dot)
        out._backward = _backward
        return out

    ################### backprop ###################

    def backward(self) -> None:
        """Accumulate d(self)/d(leaf) into every reachable leaf's grad.

        Topological order follows child declaration order, so reductions run
        in a fixed order from call to call.
        """
        if self.data.size != 1:
            raise GraphStateError("backward needs a scalar output")
        if not self.requires_grad:
            raise GraphStateError("backward called on a value with no recorded parameter graph")
        topo: List[Tensor] = []
        visited = set()

        def build(v: Tensor):
            if id(v) in visited:
                return
            visited.add(id(v))
            for child in v._prev:
                build(child)
            topo.append(v)

        build(self)
        for node in topo:
            if node._prev:
                node.grad = np.zeros_like(node.data)
        self.grad = np.ones_like(self.data)
        for node in reversed(topo):
            node._backward()


class Parameter(Tensor):
    def __init__(self, data: ArrayLike):
        super().__init__(data, requires_grad=True)


################### layers ###################

class Module:
    training = True

    def parameters(self) -> List[Parameter]:
        return []

    def zero_grad(self) -> None:
        for p in self.parameters():
            p.zero_grad()

    def train(self, mode: bool = True) -> "Module":
        self.training = mode
        return self

    def eval(self) -> "Module":
        return self.train(False)


class Linear(Module):
    """y = x W + b with Kaiming-uniform weights and zero bias."""

    def __init__(self, in_dim: int, out_dim: int, rng: np.random.Generator):
        bound = math.sqrt(6.0 / in_dim)
        self.weight = Parameter(rng.uniform(-bound, bound, size=(in_dim, out_dim)))
        self.bias = Parameter(np.zeros((1, out_dim)))

    def __call__(self, x: Tensor) -> Tensor:
        return x @ self.weight + self.bias

    def parameters(self) -> List[Parameter]:
        return [self.weight, self.bias]


class BatchNorm(Module):
    """Batch normalization over rows; running stats with momentum BN_MOMENTUM."""

    def __init__(self, dim: int):
        self.gamma = Parameter(np.ones((1, dim)))
        self.beta = Parameter(np.zeros((1, dim)))
        self.running_mean = np.zeros((1, dim))
        self.running_var = np.ones((1, dim))
        self.tracked = False

    def __call__(self, x: Tensor, update_stats: bool = True) -> Tensor:
        if self.training:
            mean = x.data.mean(axis=0, keepdims=True)
            var = x.data.var(axis=0, keepdims=True)
            if update_stats:
                rows = x.shape[0]
                unbiased = var * rows / max(rows - 1, 1)
                self.running_mean = (1 - BN_MOMENTUM) * self.running_mean + BN_MOMENTUM * mean
                self.running_var = (1 - BN_MOMENTUM) * self.running_var + BN_MOMENTUM * unbiased
                self.tracked = True
            return self._normalize_batch(x, mean, var)
        if not self.tracked:
            raise GraphStateError("batch norm evaluated before any running statistics were recorded")
        x_hat = (x - self.running_mean) * (1.0 / np.sqrt(self.running_var + BN_EPS))
        return x_hat * self.gamma + self.beta

    def _normalize_batch(self, x: Tensor, mean: np.ndarray, var: np.ndarray) -> Tensor:
        inv_std = 1.0 / np.sqrt(var + BN_EPS)
        x_hat = (x.data - mean) * inv_std
        normed = Tensor(x_hat, (x,), "batchnorm")

        def _backward():
            g = normed.grad
            rows = g.shape[0]
            x.grad = x.grad + inv_std / rows * (
                rows * g - g.sum(axis=0, keepdims=True) - x_hat * (g * x_hat).sum(axis=0, keepdims=True)
            )
        normed._backward = _backward
        return normed * self.gamma + self.beta

    def parameters(self) -> List[Parameter]:
        return [self.gamma, self.beta]


@dataclass(frozen=True)
class MlpSpec:
    """Dense classifier ending in a q-way softmax."""

    in_dim: int
    hidden_dims: Tuple[int, ...]
    out_dim: int
    use_batchnorm: bool = True
    activation: str = "relu"

    def __post_init__(self):
        object.__setattr__(self, "hidden_dims", tuple(int(h) for h in self.hidden_dims))
        if not self.hidden_dims:
            raise ValueError("an MLP needs at least one hidden layer")
        if self.activation != "relu":
            raise ValueError(f"unsupported activation {self.activation}")
        if self.in_dim < 1 or self.out_dim < 2:
            raise ValueError(f"invalid dims in={self.in_dim} out={self.out_dim}")

    def to_json(self) -> str:
        return json.dumps(asdict(self), sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "MlpSpec":
        return cls(**json.loads(text))


class Mlp(Module):
    """Linear -> BatchNorm -> ReLU per hidden layer, then Linear -> softmax.

    Parameters are created in declaration order from a single generator, so a
    seed fixes the initialization.
    """

    def __init__(self, spec: MlpSpec, rng: np.random.Generator):
        self.spec = spec
        self.hidden: List[Tuple[Linear, Optional[BatchNorm]]] = []
        width = spec.in_dim
        for h in spec.hidden_dims:
            self.hidden.append((Linear(width, h, rng), BatchNorm(h) if spec.use_batchnorm else None))
            width = h
        self.head = Linear(width, spec.out_dim, rng)

    def train(self, mode: bool = True) -> "Mlp":
        self.training = mode
        for _, bn in self.hidden:
            if bn is not None:
                bn.train(mode)
        return self

    def logits(self, x: Union[Tensor, np.ndarray], update_stats: bool = True) -> Tensor:
        h = x if isinstance(x, Tensor) else Tensor(x)
        if h.shape[-1] != self.spec.in_dim:
            raise ValueError(f"input width {h.shape[-1]} != in_dim {self.spec.in_dim}")
        for linear, bn in self.hidden:
            h = linear(h)
            if bn is not None:
                h = bn(h, update_stats=update_stats)
            h = h.relu()
        return self.head(h)

    def __call__(self, x: Union[Tensor, np.ndarray], update_stats: bool = True) -> Tensor:
        return self.logits(x, update_stats=update_stats).softmax()

    @property
    def last_layer(self) -> Parameter:
        """Weights of the final linear layer before the softmax."""
        return self.head.weight

    def parameters(self) -> List[Parameter]:
        params: List[Parameter] = []
        for linear, bn in self.hidden:
            params += linear.parameters()
            if bn is not None:
                params += bn.parameters()
        return params + self.head.parameters()

    def buffers(self) -> List[np.ndarray]:
        out = []
        for _, bn in self.hidden:
            if bn is not None:
                out += [bn.running_mean, bn.running_var]
        return out

    def layer_names(self) -> List[str]:
        names = []
        for i, (_, bn) in enumerate(self.hidden):
            names.append(f"linear{i}")
            if bn is not None:
                names.append(f"bn{i}")
            names.append(f"relu{i}")
        return names + ["head", "softmax"]

    def predict_proba(self, x: np.ndarray, chunk: int = 8192) -> np.ndarray:
        """Eval-mode probabilities without building a graph that outlives the chunk."""
        was_training = self.training
        self.eval()
        try:
            parts = [self(np.asarray(x[i:i + chunk])).data for i in range(0, len(x), chunk)]
        finally:
            self.train(was_training)
        return np.concatenate(parts, axis=0) if parts else np.zeros((0, self.spec.out_dim))


def forward(spec: MlpSpec, model: Mlp, inputs: np.ndarray, mode: str = "train") -> Tensor:
    """Run `model` (built from `spec`) in train or eval mode and return the probability rows."""
    if model.spec != spec:
        raise ValueError("model was built from a different spec")
    if mode not in ("train", "eval"):
        raise ValueError(f"mode must be 'train' or 'eval', got {mode}")
    model.train(mode == "train")
    return model(inputs)


################### optimizers ###################

@dataclass
class OptState:
    """Adam / AdamW state; weight_decay > 0 with decoupled=True gives AdamW."""

    lr: float = 1e-4
    betas: Tuple[float, float] = (0.9, 0.999)
    eps: float = 1e-8
    weight_decay: float = 0.0
    decoupled: bool = False
    step: int = 0
    m: List[np.ndarray] = field(default_factory=list)
    v: List[np.ndarray] = field(default_factory=list)


class Adam:
    """Adam with bias correction; AdamW applies decoupled weight decay."""

    def __init__(self, params: Sequence[Parameter], lr: float = 1e-4, betas=(0.9, 0.999), eps: float = 1e-8,
                 weight_decay: float = 0.0, decoupled: bool = False):
        self.params = list(params)
        self.state = OptState(lr=lr, betas=tuple(betas), eps=eps, weight_decay=weight_decay, decoupled=decoupled,
                              m=[np.zeros_like(p.data) for p in self.params],
                              v=[np.zeros_like(p.data) for p in self.params])

    def zero_grad(self) -> None:
        for p in self.params:
            p.zero_grad()

    def step(self) -> None:
        adam_step(self.state, self.params)


def AdamW(params: Sequence[Parameter], lr: float = 1e-4, weight_decay: float = 1e-4, **kwargs) -> Adam:
    return Adam(params, lr=lr, weight_decay=weight_decay, decoupled=True, **kwargs)


def adam_step(opt: OptState, params: Sequence[Parameter]) -> None:
    """One bias-corrected Adam update applied in place to `params`."""
    if len(opt.m) != len(params):
        opt.m = [np.zeros_like(p.data) for p in params]
        opt.v = [np.zeros_like(p.data) for p in params]
    opt.step += 1
    b1, b2 = opt.betas
    correction1 = 1 - b1 ** opt.step
    correction2 = 1 - b2 ** opt.step
    for i, p in enumerate(params):
        grad = p.grad
        if opt.weight_decay and not opt.decoupled:
            grad = grad + opt.weight_decay * p.data
        opt.m[i] = b1 * opt.m[i] + (1 - b1) * grad
        opt.v[i] = b2 * opt.v[i] + (1 - b2) * grad * grad
        m_hat = opt.m[i] / correction1
        v_hat = opt.v[i] / correction2
        if opt.weight_decay and opt.decoupled:
            p.data = p.data * (1 - opt.lr * opt.weight_decay)
        p.data = p.data - opt.lr * m_hat / (np.sqrt(v_hat) + opt.eps)


def make_optimizer(params: Sequence[Parameter], name: str, lr: float, weight_decay: float) -> Adam:
    if name == "adam":
        return Adam(params, lr=lr, weight_decay=weight_decay)
    if name == "adamw":
        return AdamW(params, lr=lr, weight_decay=weight_decay)
    raise ValueError(f"unknown optimizer {name}")


################### model files ###################

def save_model(path: str, model: Mlp, meta: Dict[str, str], extra_arrays: Sequence[np.ndarray] = ()) -> None:
    """Text header followed by little-endian f64 parameters, BN buffers and extra arrays."""
    arrays = [p.data for p in model.parameters()] + model.buffers() + list(extra_arrays)
    header = [f"{MODEL_MAGIC} {MODEL_VERSION}", f"spec {model.spec.to_json()}"]
    header += [f"{key} {value}" for key, value in sorted(meta.items())]
    header += [f"layers {','.join(model.layer_names())}",
               f"arrays {','.join('x'.join(str(d) for d in a.shape) for a in arrays)}", "end"]
    with open(path, "wb") as fh:
        fh.write(("\n".join(header) + "\n").encode("utf-8"))
        for a in arrays:
            fh.write(np.ascontiguousarray(a, dtype="<f8").tobytes())
    logger.info(f"Saved model {path} ({len(arrays)} arrays)")


def load_model(path: str) -> Tuple[Mlp, Dict[str, str], List[np.ndarray]]:
    """Inverse of save_model; returns (model in eval mode, header fields, extra arrays).

    Raises:
        FileFormatError: On a bad magic, version or array layout
    """
    with open(path, "rb") as fh:
        raw = fh.read()
    meta: Dict[str, str] = {}
    offset = 0
    first = True
    while True:
        end = raw.find(b"\n", offset)
        if end < 0:
            raise FileFormatError(f"{path}: truncated header")
        line = raw[offset:end].decode("utf-8")
        offset = end + 1
        if first:
            magic, _, version = line.partition(" ")
            if magic != MODEL_MAGIC:
                raise FileFormatError(f"{path}: not a model file")
            if version != str(MODEL_VERSION):
                raise FileFormatError(f"{path}: unsupported model version {version}")
            first = False
            continue
        if line == "end":
            break
        key, _, value = line.partition(" ")
        meta[key] = value

    spec = MlpSpec.from_json(meta["spec"])
    model = Mlp(spec, np.random.default_rng(0))
    shapes = [tuple(int(d) for d in s.split("x")) if s else () for s in meta["arrays"].split(",")]
    params = model.parameters()
    buffers_count = len(model.buffers())
    if len(shapes) < len(params) + buffers_count:
        raise FileFormatError(f"{path}: expected at least {len(params) + buffers_count} arrays, found {len(shapes)}")
    arrays = []
    for shape in shapes:
        count = int(np.prod(shape)) if shape else 1
        nbytes = 8 * count
        if offset + nbytes > len(raw):
            raise FileFormatError(f"{path}: payload shorter than declared arrays")
        arrays.append(np.frombuffer(raw[offset:offset + nbytes], dtype="<f8").astype(np.float64).reshape(shape))
        offset += nbytes
    if offset != len(raw):
        raise FileFormatError(f"{path}: {len(raw) - offset} trailing bytes")

    for p, a in zip(params, arrays):
        if p.data.shape != a.shape:
            raise FileFormatError(f"{path}: parameter shape {a.shape} != {p.data.shape}")
        p.data = a.copy()
    buffers = arrays[len(params):len(params) + buffers_count]
    it = iter(buffers)
    for _, bn in model.hidden:
        if bn is not None:
            bn.running_mean = next(it).copy()
            bn.running_var = next(it).copy()
            bn.tracked = True
    model.eval()
    return model, meta, arrays[len(params) + buffers_count:]
