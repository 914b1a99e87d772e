"""Single-hidden-layer wavelet neural network.

Every hidden node computes ``f((x . w_j - b_j) / a_j)`` where ``f`` is a Morlet
or Gaussian wavelet, ``a_j`` a learned dilation and ``b_j`` a learned
translation. The output is a weighted sum of hidden activations, passed
through a logistic function for classification.

All functions here are pure: they never mutate their arguments.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

EPS_DILATION = 1e-6
EPS_LOG = 1e-12
MORLET_FREQ = 1.75

FORMAT_MAGIC = "SPWNN v1"


class Activation(str, enum.Enum):
    MORLET = "morlet"
    GAUSSIAN = "gaussian"


class Task(str, enum.Enum):
    REGRESSION = "regression"
    CLASSIFICATION = "classification"


class DivergenceError(ArithmeticError):
    """Raised when training produces non-finite gradients or losses."""

    def __init__(self, message: str, epoch: int | None = None):
        super().__init__(message)
        self.epoch = epoch


@dataclass(frozen=True)
class Hyperparams:
    lr: float = 0.45
    momentum: float = 0.999
    batch_size: int = 32
    epochs: int = 100
    nhn: int = 150
    partitions: int = 1
    seed: int = 0

    def __post_init__(self):
        if not self.lr > 0:
            raise ValueError(f"lr must be > 0, got {self.lr}")
        if not 0 <= self.momentum < 1:
            raise ValueError(f"momentum must be in [0, 1), got {self.momentum}")
        for name in ("batch_size", "epochs", "nhn", "partitions"):
            value = getattr(self, name)
            if int(value) != value or value < 1:
                raise ValueError(f"{name} must be a positive integer, got {value}")
        if self.seed < 0:
            raise ValueError(f"seed must be non-negative, got {self.seed}")


def default_hyperparams(task: Task, streaming: bool = False, **overrides) -> Hyperparams:
    """Best-performing settings reported for each task and environment."""
    task = Task(task)
    if task is Task.CLASSIFICATION:
        base = dict(nhn=150, lr=0.2, batch_size=16, epochs=100) if streaming else \
            dict(nhn=150, lr=0.45, batch_size=32, epochs=100)
    else:
        base = dict(nhn=10, lr=0.2, batch_size=512, epochs=100) if streaming else \
            dict(nhn=10, lr=0.45, batch_size=2048, epochs=1000)
    base["momentum"] = 0.999
    base.update({k: v for k, v in overrides.items() if v is not None})
    return Hyperparams(**base)


class _Tensors:
    """Mixin for the four per-parameter arrays shared by models, gradients and momentum."""

    NAMES = ("input_weights", "output_weights", "dilation", "translation")

    def arrays(self) -> tuple[np.ndarray, ...]:
        return tuple(getattr(self, name) for name in self.NAMES)

    def all_finite(self) -> bool:
        return all(np.all(np.isfinite(arr)) for arr in self.arrays())


@dataclass(frozen=True, eq=False)
class GradientSet(_Tensors):
    input_weights: np.ndarray   # (nin, nhn)
    output_weights: np.ndarray  # (nhn,)
    dilation: np.ndarray        # (nhn,)
    translation: np.ndarray     # (nhn,)


@dataclass(frozen=True, eq=False)
class MomentumState(_Tensors):
    input_weights: np.ndarray
    output_weights: np.ndarray
    dilation: np.ndarray
    translation: np.ndarray

    @classmethod
    def zeros_like(cls, model: "WnnModel") -> "MomentumState":
        return cls(*(np.zeros_like(arr) for arr in model.arrays()))


@dataclass(frozen=True, eq=False)
class WnnModel(_Tensors):
    input_weights: np.ndarray   # (nin, nhn)
    output_weights: np.ndarray  # (nhn,)
    dilation: np.ndarray        # (nhn,)
    translation: np.ndarray     # (nhn,)
    activation: Activation
    task: Task

    def __post_init__(self):
        w = np.asarray(self.input_weights, dtype=np.float64)
        if w.ndim != 2 or w.shape[0] < 1 or w.shape[1] < 1:
            raise ValueError(f"input weights must be a non-empty (nin, nhn) matrix, got shape {w.shape}")
        nhn = w.shape[1]
        object.__setattr__(self, "input_weights", w)
        for name in self.NAMES[1:]:
            arr = np.asarray(getattr(self, name), dtype=np.float64)
            if arr.shape != (nhn,):
                raise ValueError(f"{name} must have shape ({nhn},), got {arr.shape}")
            object.__setattr__(self, name, arr)
        object.__setattr__(self, "activation", Activation(self.activation))
        object.__setattr__(self, "task", Task(self.task))
        if not self.all_finite():
            raise ValueError("model parameters must be finite")
        if np.any(np.abs(self.dilation) < EPS_DILATION):
            raise ValueError(f"every |dilation| must be >= {EPS_DILATION}")

    @property
    def nin(self) -> int:
        return self.input_weights.shape[0]

    @property
    def nhn(self) -> int:
        return self.input_weights.shape[1]

    @property
    def non(self) -> int:
        return 1

    def same_layout(self, other: "WnnModel") -> bool:
        return (self.nin, self.nhn, self.activation, self.task) == \
            (other.nin, other.nhn, other.activation, other.task)

    def equals(self, other: "WnnModel") -> bool:
        """Bit-exact equality of configuration and every parameter."""
        return self.same_layout(other) and all(
            np.array_equal(x, y) for x, y in zip(self.arrays(), other.arrays()))


def init_model(nin: int, hp: Hyperparams, activation: Activation, task: Task) -> WnnModel:
    if nin < 1:
        raise ValueError(f"nin must be >= 1, got {nin}")
    rng = np.random.default_rng(hp.seed)
    nhn = hp.nhn
    w = rng.uniform(-1.0, 1.0, size=(nin, nhn))
    W = rng.uniform(-1.0, 1.0, size=nhn)
    b = rng.uniform(-1.0, 1.0, size=nhn)
    a = rng.uniform(0.5, 2.0, size=nhn)
    return WnnModel(w, W, a, b, Activation(activation), Task(task))


def activate(kind: Activation, t):
    t = np.asarray(t, dtype=np.float64)
    if Activation(kind) is Activation.MORLET:
        out = np.cos(MORLET_FREQ * t) * np.exp(-0.5 * t * t)
    else:
        out = np.exp(-t * t)
    return out if out.ndim else float(out)


def activate_deriv(kind: Activation, t):
    t = np.asarray(t, dtype=np.float64)
    if Activation(kind) is Activation.MORLET:
        out = np.exp(-0.5 * t * t) * (-MORLET_FREQ * np.sin(MORLET_FREQ * t) - t * np.cos(MORLET_FREQ * t))
    else:
        out = -2.0 * t * np.exp(-t * t)
    return out if out.ndim else float(out)


def sigmoid(z):
    z = np.asarray(z, dtype=np.float64)
    # split by sign so exp never overflows
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def _check_batch(model: WnnModel, xs) -> np.ndarray:
    xs = np.asarray(xs, dtype=np.float64)
    if xs.ndim != 2 or xs.shape[1] != model.nin:
        raise ValueError(f"expected input of shape (n, {model.nin}), got {xs.shape}")
    return xs


def forward_batch(model: WnnModel, xs) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Row-wise forward pass. Returns (outputs, hidden activations, wavelet arguments)."""
    xs = _check_batch(model, xs)
    t_args = (xs @ model.input_weights - model.translation) / model.dilation
    hidden = activate(model.activation, t_args)
    raw = hidden @ model.output_weights
    if model.task is Task.CLASSIFICATION:
        return sigmoid(raw), hidden, t_args
    return raw, hidden, t_args


def forward(model: WnnModel, x) -> tuple[float, np.ndarray, np.ndarray]:
    x = np.asarray(x, dtype=np.float64)
    if x.shape != (model.nin,):
        raise ValueError(f"expected input vector of length {model.nin}, got shape {x.shape}")
    v, hidden, t_args = forward_batch(model, x[None, :])
    return float(v[0]), hidden[0], t_args[0]


def loss(task: Task, predictions, targets) -> float:
    """Mean squared error for regression, mean binary cross-entropy for classification."""
    v = np.asarray(predictions, dtype=np.float64).ravel()
    y = np.asarray(targets, dtype=np.float64).ravel()
    if v.shape != y.shape:
        raise ValueError(f"length mismatch: {v.size} predictions vs {y.size} targets")
    if v.size == 0:
        raise ValueError("loss of an empty batch is undefined")
    if Task(task) is Task.REGRESSION:
        with np.errstate(over="ignore"):
            r = y - v
            return float(np.mean(r * r))
    v = np.clip(v, EPS_LOG, 1.0 - EPS_LOG)
    return float(-np.mean(y * np.log(v) + (1.0 - y) * np.log(1.0 - v)))


def backward(model: WnnModel, batch_x, batch_y) -> GradientSet:
    """Batch-averaged analytic gradients of ``loss`` w.r.t. every parameter."""
    xs = _check_batch(model, batch_x)
    ys = np.asarray(batch_y, dtype=np.float64).ravel()
    n = xs.shape[0]
    if n < 1 or ys.shape != (n,):
        raise ValueError(f"need n >= 1 rows with matching targets, got {xs.shape} and {ys.shape}")
    # overflow surfaces as non-finite gradients, which apply_update reports
    with np.errstate(over="ignore", invalid="ignore"):
        v, hidden, t_args = forward_batch(model, xs)
        if model.task is Task.REGRESSION:
            delta = -2.0 * (ys - v) / n
        else:
            delta = (v - ys) / n

        d_out = delta @ hidden
        # g[k, j] = delta_k * W_j * f'(t_kj) / a_j  (sensitivity of loss to the wavelet input)
        g = np.outer(delta, model.output_weights) * activate_deriv(model.activation, t_args) / model.dilation
        d_in = xs.T @ g
        d_trans = -g.sum(axis=0)
        d_dil = -(g * t_args).sum(axis=0)
    return GradientSet(d_in, d_out, d_dil, d_trans)


def clamp_dilation(a: np.ndarray) -> np.ndarray:
    small = np.abs(a) < EPS_DILATION
    if not np.any(small):
        return a
    a = a.copy()
    a[small] = np.where(a[small] < 0, -EPS_DILATION, EPS_DILATION)
    return a


def apply_update(model: WnnModel, grads: GradientSet, mom: MomentumState,
                 hp: Hyperparams) -> tuple[WnnModel, MomentumState]:
    """One momentum step: ``delta = -lr * grad + momentum * prev_delta``; ``theta += delta``."""
    if not grads.all_finite():
        raise DivergenceError("non-finite gradient; reduce the learning rate")
    deltas = []
    params = []
    for theta, g, prev in zip(model.arrays(), grads.arrays(), mom.arrays()):
        if g.shape != theta.shape or prev.shape != theta.shape:
            raise ValueError(f"shape mismatch: param {theta.shape}, grad {g.shape}, momentum {prev.shape}")
        d = -hp.lr * g + hp.momentum * prev
        deltas.append(d)
        params.append(theta + d)
    params[2] = clamp_dilation(params[2])
    if not all(np.all(np.isfinite(p)) for p in params):
        raise DivergenceError("parameters became non-finite; reduce the learning rate")
    new_model = replace(model, input_weights=params[0], output_weights=params[1],
                        dilation=params[2], translation=params[3])
    return new_model, MomentumState(*deltas)


# -- persistence -------------------------------------------------------------

def _fmt_row(values) -> str:
    return " ".join("%.17g" % v for v in values)


def dumps_model(model: WnnModel) -> str:
    lines = [FORMAT_MAGIC,
             f"{model.activation.value} {model.task.value} {model.nin} {model.nhn}",
             "w"]
    lines.extend(_fmt_row(row) for row in model.input_weights)
    for header, arr in (("W", model.output_weights), ("a", model.dilation), ("b", model.translation)):
        lines.append(header)
        lines.append(_fmt_row(arr))
    return "\n".join(lines) + "\n"


def loads_model(text: str) -> WnnModel:
    lines = [ln.strip() for ln in text.splitlines() if ln.strip()]
    if not lines or lines[0] != FORMAT_MAGIC:
        raise ValueError(f"not a model file: expected first line {FORMAT_MAGIC!r}")
    try:
        act, task, nin, nhn = lines[1].split()
        nin, nhn = int(nin), int(nhn)
    except (IndexError, ValueError) as exc:
        raise ValueError(f"malformed model header line: {lines[1:2]}") from exc
    expected = 2 + (1 + nin) + 3 * 2
    if len(lines) != expected:
        raise ValueError(f"model file has {len(lines)} non-empty lines, expected {expected}")

    def section(idx: int, header: str, rows: int) -> np.ndarray:
        if lines[idx] != header:
            raise ValueError(f"expected section {header!r} at line {idx + 1}, got {lines[idx]!r}")
        data = np.array([[float(tok) for tok in ln.split()] for ln in lines[idx + 1: idx + 1 + rows]])
        if data.shape != (rows, nhn):
            raise ValueError(f"section {header!r} has shape {data.shape}, expected ({rows}, {nhn})")
        return data

    w = section(2, "w", nin)
    pos = 3 + nin
    W = section(pos, "W", 1)[0]
    a = section(pos + 2, "a", 1)[0]
    b = section(pos + 4, "b", 1)[0]
    return WnnModel(w, W, a, b, Activation(act), Task(task))


def save_model(model: WnnModel, path) -> None:
    Path(path).write_text(dumps_model(model))


def load_model(path) -> WnnModel:
    return loads_model(Path(path).read_text())
