"""Single-layer LSTM with a scalar output head, trained by BPTT and Adam.

The cell follows the standard gate algebra

    f = sig(W_f [h, x] + b_f)          i = sig(W_i [h, x] + b_i)
    c~ = tanh(W_C [h, x] + b_C)        C' = f * C + i * c~
    o = sig(W_o [h, x] + b_o)          h' = o * tanh(C')

with elementwise products throughout; the prediction after the final step is
``W_y h + b_y``.  Gradients are exact analytic backpropagation through time
of the batch mean-squared error; ``tests`` verify them against central finite
differences.  Everything is plain float64 numpy and deterministic for a
fixed seed.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import FitError

__all__ = [
    "LstmParams",
    "LstmState",
    "GradientSet",
    "TrainConfig",
    "AdamState",
    "Tape",
    "EpochRecord",
    "init_params",
    "cell_step",
    "forward_sequence",
    "forward_batch",
    "loss_mse",
    "backward_bptt",
    "adam_step",
    "train_early_stopping",
    "predict_lstm",
]

PARAM_FIELDS = ("W_f", "W_i", "W_C", "W_o", "b_f", "b_i", "b_C", "b_o", "W_y", "b_y")


def _sigmoid(x: np.ndarray) -> np.ndarray:
    # both branches saturate gracefully; exp never sees a large positive arg
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


@dataclass
class LstmParams:
    """Gate weights over the concatenated ``[h, x]`` input, biases, and output head."""

    W_f: np.ndarray
    W_i: np.ndarray
    W_C: np.ndarray
    W_o: np.ndarray
    b_f: np.ndarray
    b_i: np.ndarray
    b_C: np.ndarray
    b_o: np.ndarray
    W_y: np.ndarray
    b_y: np.ndarray

    @property
    def hidden(self) -> int:
        return self.W_f.shape[0]

    @property
    def input_dim(self) -> int:
        return self.W_f.shape[1] - self.W_f.shape[0]

    def arrays(self) -> dict[str, np.ndarray]:
        return {name: getattr(self, name) for name in PARAM_FIELDS}

    def copy(self) -> "LstmParams":
        return LstmParams(**{name: getattr(self, name).copy() for name in PARAM_FIELDS})

    def check_shapes(self) -> None:
        h, d = self.hidden, self.input_dim
        if d < 1 or h < 1:
            raise FitError(f"inconsistent shapes: hidden={h}, input_dim={d}")
        for name in ("W_f", "W_i", "W_C", "W_o"):
            if getattr(self, name).shape != (h, h + d):
                raise FitError(f"{name} must have shape {(h, h + d)}")
        for name in ("b_f", "b_i", "b_C", "b_o"):
            if getattr(self, name).shape != (h,):
                raise FitError(f"{name} must have shape {(h,)}")
        if self.W_y.shape != (1, h) or self.b_y.shape != (1,):
            raise FitError("output head must be W_y (1, hidden) and b_y (1,)")


@dataclass(frozen=True)
class LstmState:
    """Hidden and cell vectors after a step; h stays inside (-1, 1)."""

    h: np.ndarray
    C: np.ndarray


@dataclass
class GradientSet:
    """Loss gradient for every parameter field, shape-matched."""

    W_f: np.ndarray
    W_i: np.ndarray
    W_C: np.ndarray
    W_o: np.ndarray
    b_f: np.ndarray
    b_i: np.ndarray
    b_C: np.ndarray
    b_o: np.ndarray
    W_y: np.ndarray
    b_y: np.ndarray

    def arrays(self) -> dict[str, np.ndarray]:
        return {name: getattr(self, name) for name in PARAM_FIELDS}

    def global_norm(self) -> float:
        return math.sqrt(sum(float((g * g).sum()) for g in self.arrays().values()))

    def scaled(self, factor: float) -> "GradientSet":
        return GradientSet(**{k: v * factor for k, v in self.arrays().items()})


@dataclass(frozen=True)
class TrainConfig:
    learning_rate: float = 0.001
    batch_size: int = 16
    max_epochs: int = 50
    patience: int = 5
    adam_beta1: float = 0.9
    adam_beta2: float = 0.999
    adam_eps: float = 1e-8
    seed: int = 0
    clip_norm: float | None = None

    def __post_init__(self) -> None:
        if self.learning_rate <= 0 or self.batch_size < 1 or self.max_epochs < 1:
            raise FitError("learning rate, batch size, and max epochs must be positive")
        if not (0 < self.patience <= self.max_epochs):
            raise FitError(f"patience must lie in [1, max_epochs], got {self.patience}")
        if not (0 < self.adam_beta1 < 1 and 0 < self.adam_beta2 < 1 and self.adam_eps > 0):
            raise FitError("invalid Adam coefficients")
        if self.clip_norm is not None and self.clip_norm <= 0:
            raise FitError(f"clip_norm must be positive when set, got {self.clip_norm}")


@dataclass
class AdamState:
    """First/second moment accumulators, one pair per parameter field."""

    m: dict[str, np.ndarray]
    v: dict[str, np.ndarray]

    @classmethod
    def zeros_like(cls, params: LstmParams) -> "AdamState":
        return cls(
            m={k: np.zeros_like(a) for k, a in params.arrays().items()},
            v={k: np.zeros_like(a) for k, a in params.arrays().items()},
        )


@dataclass(frozen=True)
class _StepCache:
    z: np.ndarray
    f: np.ndarray
    i: np.ndarray
    cbar: np.ndarray
    C_prev: np.ndarray
    C: np.ndarray
    o: np.ndarray
    tanh_C: np.ndarray
    h: np.ndarray


@dataclass(frozen=True)
class Tape:
    """Per-step activations cached by the forward pass for exact BPTT."""

    inputs: np.ndarray
    steps: tuple[_StepCache, ...]
    predictions: np.ndarray


def init_params(hidden: int, input_dim: int, seed: int) -> LstmParams:
    """Uniform fan-scaled weights, zero biases except a forget bias of one.

    Each matrix draws from ``U(-b, b)`` with ``b = sqrt(6 / (fan_in +
    fan_out))``; the forget bias starts at one so early training does not
    erase the cell state.  Deterministic for a fixed seed.
    """
    if hidden < 1 or input_dim < 1:
        raise FitError(f"hidden and input_dim must be positive, got {hidden}, {input_dim}")
    rng = np.random.default_rng(seed)

    def draw(rows: int, cols: int) -> np.ndarray:
        bound = math.sqrt(6.0 / (rows + cols))
        return rng.uniform(-bound, bound, size=(rows, cols))

    gate_cols = hidden + input_dim
    return LstmParams(
        W_f=draw(hidden, gate_cols),
        W_i=draw(hidden, gate_cols),
        W_C=draw(hidden, gate_cols),
        W_o=draw(hidden, gate_cols),
        b_f=np.ones(hidden),
        b_i=np.zeros(hidden),
        b_C=np.zeros(hidden),
        b_o=np.zeros(hidden),
        W_y=draw(1, hidden),
        b_y=np.zeros(1),
    )


def cell_step(params: LstmParams, x_t: np.ndarray, prev: LstmState) -> LstmState:
    """One LSTM cell update for a single (unbatched) input vector."""
    x_t = np.asarray(x_t, dtype=float).reshape(-1)
    if x_t.shape[0] != params.input_dim:
        raise FitError(f"input has dim {x_t.shape[0]}, parameters expect {params.input_dim}")
    if prev.h.shape != (params.hidden,) or prev.C.shape != (params.hidden,):
        raise FitError("state vectors do not match the hidden size")
    z = np.concatenate([prev.h, x_t])
    f = _sigmoid(params.W_f @ z + params.b_f)
    i = _sigmoid(params.W_i @ z + params.b_i)
    cbar = np.tanh(params.W_C @ z + params.b_C)
    C = f * prev.C + i * cbar
    o = _sigmoid(params.W_o @ z + params.b_o)
    h = o * np.tanh(C)
    return LstmState(h=h, C=C)


def forward_batch(params: LstmParams, inputs: np.ndarray) -> tuple[np.ndarray, Tape]:
    """Run a batch of sequences from a zero state and apply the output head.

    ``inputs`` has shape (batch, steps) for scalar steps or (batch, steps,
    input_dim).  Returns the per-sequence predictions and the activation tape
    needed by :func:`backward_bptt`.
    """
    X = np.asarray(inputs, dtype=float)
    if X.ndim == 2:
        X = X[:, :, None]
    if X.ndim != 3 or X.shape[1] < 1:
        raise FitError(f"inputs must be (batch, steps[, dim]) with steps >= 1, got {X.shape}")
    if X.shape[2] != params.input_dim:
        raise FitError(f"input dim {X.shape[2]} does not match parameters ({params.input_dim})")
    batch, steps, _ = X.shape
    hidden = params.hidden
    h = np.zeros((batch, hidden))
    C = np.zeros((batch, hidden))
    caches: list[_StepCache] = []
    for t in range(steps):
        z = np.concatenate([h, X[:, t, :]], axis=1)
        f = _sigmoid(z @ params.W_f.T + params.b_f)
        i = _sigmoid(z @ params.W_i.T + params.b_i)
        cbar = np.tanh(z @ params.W_C.T + params.b_C)
        C_new = f * C + i * cbar
        o = _sigmoid(z @ params.W_o.T + params.b_o)
        tanh_C = np.tanh(C_new)
        h = o * tanh_C
        caches.append(_StepCache(z, f, i, cbar, C, C_new, o, tanh_C, h))
        C = C_new
    predictions = h @ params.W_y[0] + params.b_y[0]
    return predictions, Tape(inputs=X, steps=tuple(caches), predictions=predictions)


def forward_sequence(params: LstmParams, inputs: np.ndarray) -> tuple[float, Tape]:
    """Single-sequence forward pass; returns the scalar prediction and its tape."""
    arr = np.asarray(inputs, dtype=float)
    if arr.ndim == 1:
        arr = arr[None, :]
    elif arr.ndim == 2:
        arr = arr[None, :, :]
    else:
        raise FitError(f"a single sequence must be 1- or 2-dimensional, got shape {arr.shape}")
    preds, tape = forward_batch(params, arr)
    return float(preds[0]), tape


def loss_mse(predictions, targets) -> float:
    predictions = np.asarray(predictions, dtype=float)
    targets = np.asarray(targets, dtype=float)
    if predictions.shape != targets.shape or predictions.size == 0:
        raise FitError(
            f"predictions and targets must share a non-empty shape, "
            f"got {predictions.shape} and {targets.shape}"
        )
    diff = predictions - targets
    return float((diff * diff).mean())


def backward_bptt(params: LstmParams, targets: np.ndarray, tape: Tape) -> GradientSet:
    """Exact gradient of the batch MSE with respect to every parameter.

    The tape must come from :func:`forward_batch`/:func:`forward_sequence` on
    the same batch the targets belong to.
    """
    targets = np.asarray(targets, dtype=float).reshape(-1)
    if targets.shape[0] != tape.predictions.shape[0]:
        raise FitError(
            f"tape batch size {tape.predictions.shape[0]} does not match "
            f"{targets.shape[0]} targets"
        )
    batch = targets.shape[0]
    hidden = params.hidden
    grads = {name: np.zeros_like(arr) for name, arr in params.arrays().items()}

    dpred = 2.0 * (tape.predictions - targets) / batch
    last = tape.steps[-1]
    grads["W_y"][0] = dpred @ last.h
    grads["b_y"][0] = dpred.sum()
    dh = dpred[:, None] * params.W_y
    dC = np.zeros((batch, hidden))
    for step in reversed(tape.steps):
        do = dh * step.tanh_C
        dC = dC + dh * step.o * (1.0 - step.tanh_C**2)
        df = dC * step.C_prev
        di = dC * step.cbar
        dcbar = dC * step.i
        da_f = df * step.f * (1.0 - step.f)
        da_i = di * step.i * (1.0 - step.i)
        da_c = dcbar * (1.0 - step.cbar**2)
        da_o = do * step.o * (1.0 - step.o)
        grads["W_f"] += da_f.T @ step.z
        grads["W_i"] += da_i.T @ step.z
        grads["W_C"] += da_c.T @ step.z
        grads["W_o"] += da_o.T @ step.z
        grads["b_f"] += da_f.sum(axis=0)
        grads["b_i"] += da_i.sum(axis=0)
        grads["b_C"] += da_c.sum(axis=0)
        grads["b_o"] += da_o.sum(axis=0)
        dz = da_f @ params.W_f + da_i @ params.W_i + da_c @ params.W_C + da_o @ params.W_o
        dh = dz[:, :hidden]
        dC = dC * step.f
    return GradientSet(**grads)


def adam_step(
    params: LstmParams,
    grads: GradientSet,
    moments: AdamState,
    t: int,
    cfg: TrainConfig,
) -> tuple[LstmParams, AdamState]:
    """One bias-corrected Adam update; returns fresh params and moments."""
    if t < 1:
        raise FitError(f"Adam step counter must be >= 1, got {t}")
    new_params: dict[str, np.ndarray] = {}
    new_m: dict[str, np.ndarray] = {}
    new_v: dict[str, np.ndarray] = {}
    b1, b2 = cfg.adam_beta1, cfg.adam_beta2
    for name, theta in params.arrays().items():
        g = getattr(grads, name)
        if g.shape != theta.shape:
            raise FitError(f"gradient for {name} has shape {g.shape}, expected {theta.shape}")
        m = b1 * moments.m[name] + (1.0 - b1) * g
        v = b2 * moments.v[name] + (1.0 - b2) * g * g
        m_hat = m / (1.0 - b1**t)
        v_hat = v / (1.0 - b2**t)
        new_params[name] = theta - cfg.learning_rate * m_hat / (np.sqrt(v_hat) + cfg.adam_eps)
        new_m[name] = m
        new_v[name] = v
    return LstmParams(**new_params), AdamState(m=new_m, v=new_v)


@dataclass(frozen=True)
class EpochRecord:
    epoch: int
    train_mse: float
    val_mae: float
    best_val_mae: float


def _validation_mae(params: LstmParams, val_inputs: np.ndarray, val_targets: np.ndarray) -> float:
    preds, _ = forward_batch(params, val_inputs)
    return float(np.abs(preds - np.asarray(val_targets, dtype=float)).mean())


def train_early_stopping(
    train_inputs: np.ndarray,
    train_targets: np.ndarray,
    val_inputs: np.ndarray,
    val_targets: np.ndarray,
    cfg: TrainConfig,
    hidden: int = 50,
    init: LstmParams | None = None,
) -> tuple[LstmParams, list[EpochRecord]]:
    """Mini-batch Adam training with patience-based early stopping.

    Each epoch visits the training samples in a shuffled order keyed by
    ``(cfg.seed, epoch)``; the trailing partial batch is trained on rather
    than dropped.  After each epoch the mean absolute error on the validation
    split is measured, and once it has failed to improve for ``cfg.patience``
    consecutive epochs training stops and the parameters from the
    best-validation epoch are returned along with the per-epoch history.
    """
    train_inputs = np.asarray(train_inputs, dtype=float)
    train_targets = np.asarray(train_targets, dtype=float).reshape(-1)
    val_inputs = np.asarray(val_inputs, dtype=float)
    val_targets = np.asarray(val_targets, dtype=float).reshape(-1)
    if len(train_targets) == 0 or len(val_targets) == 0:
        raise FitError("both the training and validation splits must be non-empty")
    input_dim = 1 if train_inputs.ndim == 2 else train_inputs.shape[2]

    params = init.copy() if init is not None else init_params(hidden, input_dim, cfg.seed)
    params.check_shapes()
    moments = AdamState.zeros_like(params)
    step = 0
    n = len(train_targets)

    best_params = params.copy()
    best_mae = math.inf
    epochs_since_improvement = 0
    history: list[EpochRecord] = []

    for epoch in range(1, cfg.max_epochs + 1):
        order = np.random.default_rng([cfg.seed, epoch]).permutation(n)
        epoch_sse = 0.0
        for start in range(0, n, cfg.batch_size):
            batch_idx = order[start:start + cfg.batch_size]
            preds, tape = forward_batch(params, train_inputs[batch_idx])
            grads = backward_bptt(params, train_targets[batch_idx], tape)
            if cfg.clip_norm is not None:
                norm = grads.global_norm()
                if norm > cfg.clip_norm:
                    grads = grads.scaled(cfg.clip_norm / norm)
            step += 1
            params, moments = adam_step(params, grads, moments, step, cfg)
            epoch_sse += float(((preds - train_targets[batch_idx]) ** 2).sum())
        val_mae = _validation_mae(params, val_inputs, val_targets)
        if val_mae < best_mae:
            best_mae = val_mae
            best_params = params.copy()
            epochs_since_improvement = 0
        else:
            epochs_since_improvement += 1
        history.append(EpochRecord(epoch, epoch_sse / n, val_mae, best_mae))
        if epochs_since_improvement >= cfg.patience:
            break
    return best_params, history


def predict_lstm(params: LstmParams, window: np.ndarray) -> float:
    """Forward pass of one window with the tape discarded."""
    prediction, _ = forward_sequence(params, window)
    return prediction
