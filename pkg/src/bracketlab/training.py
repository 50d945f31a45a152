"""Training harness for the single-cell linear recurrent classifier.

Two heads over the final activation h_T (h0 = 0 always):

  binary:  P(diff > 0) = sigmoid(v*h + c), binary cross-entropy
  ternary: softmax(v_i*h + c_i) over (pos, zero, neg), categorical
           cross-entropy; the head biases are always trainable

Bias mode "off" pins the cell bias w_b to 0 (and the binary head bias with
it); "on" trains both. Gradients are exact analytic BPTT through the unrolled
recurrence:

  dL/ds_t  = g_t           (s_t is the per-token input contribution)
  dL/du   += g_t * h_{t-1}
  g_{t-1}  = g_t * u

with g_T seeded by the head. Losses are computed in logit space
(softplus / log-sum-exp), never by logging exponentiated probabilities.

Everything is deterministic given (config.seed, run_index): seeds derive
through numpy SeedSequence spawning in a fixed order (init, shuffling, one
eval stream per eval length).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from . import brackets
from .brackets import BracketSeq, LengthCapExceeded, enumerate_all
from .lrn import DEFAULT_INDICATOR_TOL, LrnParams, indicators

SCHEMA_VERSION = 1

BINARY = "binary"
TERNARY = "ternary"
TASKS = (BINARY, TERNARY)

BIAS_ON = "on"
BIAS_OFF = "off"
BIAS_MODES = (BIAS_ON, BIAS_OFF)

#: ternary class order; argmax ties break toward the lowest index
TERNARY_CLASS_ORDER = (brackets.POS, brackets.ZERO, brackets.NEG)

TRAIN_LENGTH_CAP = 12
INIT_HALF_RANGE = 0.5
DIVERGENCE_LIMIT = 1e6
MINIBATCHES_PER_EPOCH = 8

#: per-task step sizes: the 3-way softmax head (biases always trainable)
#: takes larger effective steps than the single sigmoid unit, so the stable
#: rate differs; measured over 8 seeds x 10 runs per length, these leave no
#: diverged runs and the binary length-4/8 configs separate in every run
DEFAULT_LEARNING_RATES = {BINARY: 0.1, TERNARY: 0.05}


#: RunRecord.status values; divergence is recorded, never raised
STATUS_OK = "ok"
STATUS_DIVERGED = "diverged"


def default_batch_size(dataset_size: int) -> int:
    """Eight minibatches per epoch regardless of dataset size.

    A fixed batch cap starves the tiny short-length datasets (one update per
    epoch) within the fixed 100-epoch budget; a fixed minibatch count gives
    every train length the same update schedule.
    """
    return max(1, math.ceil(dataset_size / MINIBATCHES_PER_EPOCH))


@dataclass(frozen=True)
class BinaryHead:
    v: float
    c: float


@dataclass(frozen=True)
class TernaryHead:
    v: tuple[float, float, float]
    c: tuple[float, float, float]


@dataclass(frozen=True)
class Model:
    cell: LrnParams
    head: BinaryHead | TernaryHead
    bias_mode: str

    def __post_init__(self):
        if self.bias_mode not in BIAS_MODES:
            raise ValueError(f"bias_mode must be one of {BIAS_MODES}")
        if self.bias_mode == BIAS_OFF and self.cell.w_b != 0.0:
            raise ValueError("bias mode 'off' requires w_b == 0")

    @property
    def task(self) -> str:
        return BINARY if isinstance(self.head, BinaryHead) else TERNARY


@dataclass(frozen=True)
class Grads:
    """Gradient of the mean batch loss, one slot per trainable scalar.

    Frozen coordinates (w_b and the binary head bias in mode 'off') carry 0.
    """

    w_open: float
    w_close: float
    u: float
    w_b: float
    v: np.ndarray  # shape () for binary, (3,) for ternary
    c: np.ndarray


@dataclass(frozen=True)
class TrainConfig:
    task: str = BINARY
    bias_mode: str = BIAS_OFF
    train_length: int = 8
    epochs: int = 100
    n_runs: int = 10
    seed: int = 0
    learning_rate: float | None = None  # None -> DEFAULT_LEARNING_RATES[task]
    batch_size: int | None = None  # None -> default_batch_size(dataset size)
    eval_lengths: tuple[int, ...] = (20, 50)
    eval_samples: int = 500

    def __post_init__(self):
        if self.task not in TASKS:
            raise ValueError(f"task must be one of {TASKS}, got {self.task!r}")
        if self.bias_mode not in BIAS_MODES:
            raise ValueError(f"bias must be one of {BIAS_MODES}, got {self.bias_mode!r}")
        if self.train_length < 1:
            raise ValueError("train_length must be >= 1")
        if self.epochs < 1:
            raise ValueError("epochs must be >= 1")
        if self.n_runs < 1:
            raise ValueError("n_runs must be >= 1")
        if self.batch_size is not None and self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")
        if any(length < 1 for length in self.eval_lengths):
            raise ValueError("eval lengths must be >= 1")
        object.__setattr__(self, "eval_lengths", tuple(self.eval_lengths))
        if self.learning_rate is None:
            object.__setattr__(self, "learning_rate", DEFAULT_LEARNING_RATES[self.task])
        if self.learning_rate <= 0:
            raise ValueError("learning_rate must be positive")

    def to_dict(self) -> dict:
        return {
            "task": self.task,
            "bias_mode": self.bias_mode,
            "train_length": self.train_length,
            "epochs": self.epochs,
            "n_runs": self.n_runs,
            "seed": self.seed,
            "learning_rate": self.learning_rate,
            "batch_size": self.batch_size,
            "eval_lengths": list(self.eval_lengths),
            "eval_samples": self.eval_samples,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "TrainConfig":
        known = {f: d[f] for f in cls.__dataclass_fields__ if f in d}
        if "eval_lengths" in known:
            known["eval_lengths"] = tuple(known["eval_lengths"])
        return cls(**known)


@dataclass(frozen=True)
class TrainSet:
    """All 2**length sequences of one length with both label encodings."""

    length: int
    seqs: tuple[BracketSeq, ...]
    open_bits: np.ndarray  # (N, L) float64, 1.0 where the token is '('
    diffs: np.ndarray  # (N,) int64
    y_binary: np.ndarray  # (N,) float64 in {0, 1}, 1 = pos
    y_ternary: np.ndarray  # (N,) int64 index into TERNARY_CLASS_ORDER

    def labels_for(self, task: str) -> np.ndarray:
        return self.y_binary if task == BINARY else self.y_ternary

    @property
    def size(self) -> int:
        return len(self.seqs)


def encode_seqs(seqs) -> np.ndarray:
    return np.array(
        [[1.0 if t is brackets.Token.OPEN else 0.0 for t in seq] for seq in seqs],
        dtype=np.float64,
    )


def build_train_set(train_length: int, cap: int = TRAIN_LENGTH_CAP) -> TrainSet:
    if train_length > cap:
        raise LengthCapExceeded(train_length, cap)
    seqs = tuple(enumerate_all(train_length))
    open_bits = encode_seqs(seqs)
    diffs = (2 * open_bits.sum(axis=1) - train_length).astype(np.int64)
    y_binary = (diffs > 0).astype(np.float64)
    y_ternary = np.where(diffs > 0, 0, np.where(diffs == 0, 1, 2)).astype(np.int64)
    return TrainSet(train_length, seqs, open_bits, diffs, y_binary, y_ternary)


def _sigmoid(z):
    return 0.5 * (1.0 + np.tanh(0.5 * z))


def _softmax(z: np.ndarray) -> np.ndarray:
    shifted = z - z.max(axis=-1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=-1, keepdims=True)


def forward_states(cell: LrnParams, open_bits: np.ndarray, h0: float = 0.0) -> np.ndarray:
    """All activations for a batch: H[:, 0] = h0 and H[:, t] = h_t."""
    n, length = open_bits.shape
    s = open_bits * cell.w_open + (1.0 - open_bits) * cell.w_close + cell.w_b
    states = np.empty((n, length + 1), dtype=np.float64)
    states[:, 0] = h0
    for t in range(length):
        states[:, t + 1] = s[:, t] + cell.u * states[:, t]
    return states


def head_forward(model: Model, h_final):
    """Class probabilities from the final activation.

    Binary returns P(pos) with the same shape as h_final; ternary returns
    probabilities over TERNARY_CLASS_ORDER with a trailing axis of 3.
    """
    if isinstance(model.head, BinaryHead):
        return _sigmoid(model.head.v * np.asarray(h_final) + model.head.c)
    v = np.asarray(model.head.v)
    c = np.asarray(model.head.c)
    logits = np.asarray(h_final)[..., None] * v + c
    return _softmax(logits)


def _logits(model: Model, h_final: np.ndarray) -> np.ndarray:
    if isinstance(model.head, BinaryHead):
        return model.head.v * h_final + model.head.c
    return h_final[:, None] * np.asarray(model.head.v) + np.asarray(model.head.c)


def predict(model: Model, h_final: np.ndarray) -> np.ndarray:
    """Binary: 1 iff P(pos) > 0.5 (logit strictly positive). Ternary: argmax
    with lowest-index tie-break."""
    z = _logits(model, h_final)
    if isinstance(model.head, BinaryHead):
        return (z > 0.0).astype(np.int64)
    return np.argmax(z, axis=1)


def loss(model: Model, open_bits: np.ndarray, y: np.ndarray) -> float:
    """Mean cross-entropy in logit space."""
    h = forward_states(model.cell, open_bits)[:, -1]
    z = _logits(model, h)
    if isinstance(model.head, BinaryHead):
        return float(np.mean(np.logaddexp(0.0, z) - y * z))
    zmax = z.max(axis=1)
    lse = zmax + np.log(np.exp(z - zmax[:, None]).sum(axis=1))
    return float(np.mean(lse - z[np.arange(len(y)), y]))


def gradients(model: Model, open_bits: np.ndarray, y: np.ndarray) -> Grads:
    """Exact gradient of the mean batch loss via BPTT."""
    n, length = open_bits.shape
    states = forward_states(model.cell, open_bits)
    h_final = states[:, -1]

    if isinstance(model.head, BinaryHead):
        p = _sigmoid(model.head.v * h_final + model.head.c)
        dz = (p - y) / n  # (N,)
        g_v = np.array(np.dot(dz, h_final))
        g_c = np.array(dz.sum())
        if model.bias_mode == BIAS_OFF:
            g_c = np.array(0.0)
        g_h = dz * model.head.v
    else:
        v = np.asarray(model.head.v)
        z = h_final[:, None] * v + np.asarray(model.head.c)
        p = _softmax(z)
        onehot = np.zeros_like(p)
        onehot[np.arange(n), y] = 1.0
        dz = (p - onehot) / n  # (N, 3)
        g_v = dz.T @ h_final
        g_c = dz.sum(axis=0)
        g_h = dz @ v

    g_open = g_close = g_u = g_b = 0.0
    g = g_h
    for t in range(length, 0, -1):
        col = open_bits[:, t - 1]
        g_open += float(np.dot(g, col))
        g_close += float(np.dot(g, 1.0 - col))
        g_b += float(g.sum())
        g_u += float(np.dot(g, states[:, t - 1]))
        g = g * model.cell.u
    if model.bias_mode == BIAS_OFF:
        g_b = 0.0
    return Grads(w_open=g_open, w_close=g_close, u=g_u, w_b=g_b, v=g_v, c=g_c)


def apply_update(model: Model, grads: Grads, lr: float) -> Model:
    cell = LrnParams(
        w_open=model.cell.w_open - lr * grads.w_open,
        w_close=model.cell.w_close - lr * grads.w_close,
        u=model.cell.u - lr * grads.u,
        w_b=0.0 if model.bias_mode == BIAS_OFF else model.cell.w_b - lr * grads.w_b,
    )
    if isinstance(model.head, BinaryHead):
        head = BinaryHead(
            v=model.head.v - lr * float(grads.v),
            c=0.0 if model.bias_mode == BIAS_OFF else model.head.c - lr * float(grads.c),
        )
    else:
        v = np.asarray(model.head.v) - lr * grads.v
        c = np.asarray(model.head.c) - lr * grads.c
        head = TernaryHead(v=tuple(float(x) for x in v), c=tuple(float(x) for x in c))
    return replace(model, cell=cell, head=head)


def init_model(task: str, bias_mode: str, rng: np.random.Generator) -> Model:
    """Every trainable scalar uniform on [-0.5, 0.5]; frozen slots stay 0.

    Draw order is part of the determinism contract: cell (w_open, w_close, u,
    then w_b if trainable), then head (v then biases).
    """
    def draw():
        return float(rng.uniform(-INIT_HALF_RANGE, INIT_HALF_RANGE))

    w_open, w_close, u = draw(), draw(), draw()
    w_b = draw() if bias_mode == BIAS_ON else 0.0
    cell = LrnParams(w_open=w_open, w_close=w_close, u=u, w_b=w_b)
    if task == BINARY:
        v = draw()
        c = draw() if bias_mode == BIAS_ON else 0.0
        return Model(cell=cell, head=BinaryHead(v=v, c=c), bias_mode=bias_mode)
    v = tuple(draw() for _ in range(3))
    c = tuple(draw() for _ in range(3))
    return Model(cell=cell, head=TernaryHead(v=v, c=c), bias_mode=bias_mode)


def accuracy(model: Model, open_bits: np.ndarray, y: np.ndarray) -> float:
    h = forward_states(model.cell, open_bits)[:, -1]
    return float(np.mean(predict(model, h) == y) * 100.0)


def class_accuracy(model: Model, open_bits: np.ndarray, y: np.ndarray) -> dict[str, float]:
    """Accuracy percent per label class (classes present in y only).

    Kept in run records so imbalanced splits (only 2 of 4 length-2 sequences
    are balanced, say) can be analysed after the fact.
    """
    names = (brackets.NONPOS, brackets.POS) if model.task == BINARY else TERNARY_CLASS_ORDER
    h = forward_states(model.cell, open_bits)[:, -1]
    pred = predict(model, h)
    out = {}
    for idx, name in enumerate(names):
        sel = y == idx
        if sel.any():
            out[name] = float(np.mean(pred[sel] == idx) * 100.0)
    return out


def evaluate(model: Model, task: str, length: int, n_samples: int, rng: np.random.Generator) -> float:
    """Accuracy percent on n_samples uniform i.i.d. sequences of the length."""
    if n_samples < 1:
        raise ValueError("n_samples must be >= 1")
    draws = rng.integers(0, 2, size=(n_samples, length))
    open_bits = (draws == 0).astype(np.float64)
    diffs = 2 * open_bits.sum(axis=1) - length
    if task == BINARY:
        y = (diffs > 0).astype(np.int64)
    else:
        y = np.where(diffs > 0, 0, np.where(diffs == 0, 1, 2)).astype(np.int64)
    h = forward_states(model.cell, open_bits)[:, -1]
    return float(np.mean(predict(model, h) == y) * 100.0)


def head_to_dict(head: BinaryHead | TernaryHead) -> dict:
    if isinstance(head, BinaryHead):
        return {"type": BINARY, "v": head.v, "c": head.c}
    return {"type": TERNARY, "v": list(head.v), "c": list(head.c)}


def head_from_dict(d: dict) -> BinaryHead | TernaryHead:
    if d["type"] == BINARY:
        return BinaryHead(v=float(d["v"]), c=float(d["c"]))
    return TernaryHead(v=tuple(float(x) for x in d["v"]), c=tuple(float(x) for x in d["c"]))


@dataclass
class RunRecord:
    """One training run, append-only once written to a log."""

    run_index: int
    run_seed: list  # SeedSequence entropy: [config seed, run index]
    config: dict
    status: str  # "ok" | "diverged"
    initial_loss: float
    epoch_loss: list[float]
    epoch_accuracy: list[float]
    train_class_accuracy: dict[str, float]
    final_cell: dict
    final_head: dict
    indicators: dict
    eval_accuracy: dict[str, float]
    eval_sampling: str = "uniform-iid"
    diagnostics: str | None = None
    schema_version: int = SCHEMA_VERSION

    def to_dict(self) -> dict:
        return {
            "schema_version": self.schema_version,
            "run_index": self.run_index,
            "run_seed": self.run_seed,
            "config": self.config,
            "status": self.status,
            "initial_loss": self.initial_loss,
            "epoch_loss": self.epoch_loss,
            "epoch_accuracy": self.epoch_accuracy,
            "train_class_accuracy": self.train_class_accuracy,
            "final_cell": self.final_cell,
            "final_head": self.final_head,
            "indicators": self.indicators,
            "eval_accuracy": self.eval_accuracy,
            "eval_sampling": self.eval_sampling,
            "diagnostics": self.diagnostics,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "RunRecord":
        d = dict(d)
        d.pop("schema_version", None)
        return cls(**d, schema_version=SCHEMA_VERSION)

    def final_model(self) -> Model:
        return Model(
            cell=LrnParams.from_dict(self.final_cell),
            head=head_from_dict(self.final_head),
            bias_mode=self.config["bias_mode"],
        )

    @property
    def final_train_accuracy(self) -> float | None:
        return self.epoch_accuracy[-1] if self.epoch_accuracy else None


def run_seed_sequences(config: TrainConfig, run_index: int):
    """Fixed spawn order: (init, shuffle, eval-parent)."""
    root = np.random.SeedSequence((config.seed, run_index))
    return root.spawn(3)


def train_run(config: TrainConfig, run_index: int) -> RunRecord:
    """One seeded run: init, epochs of shuffled minibatch SGD, evaluation.

    A non-finite or exploding epoch loss aborts the run; the record comes back
    with status "diverged" and diagnostics instead of raising.
    """
    init_ss, shuffle_ss, eval_ss = run_seed_sequences(config, run_index)
    model = init_model(config.task, config.bias_mode, np.random.default_rng(init_ss))
    data = build_train_set(config.train_length)
    y = data.labels_for(config.task)
    batch_size = config.batch_size or default_batch_size(data.size)
    shuffle_rng = np.random.default_rng(shuffle_ss)

    initial_loss = loss(model, data.open_bits, y)
    epoch_loss: list[float] = []
    epoch_accuracy: list[float] = []
    status = STATUS_OK
    diagnostics = None

    with np.errstate(over="ignore", invalid="ignore"):
        for epoch in range(config.epochs):
            perm = shuffle_rng.permutation(data.size)
            try:
                for start in range(0, data.size, batch_size):
                    idx = perm[start : start + batch_size]
                    grads = gradients(model, data.open_bits[idx], y[idx])
                    model = apply_update(model, grads, config.learning_rate)
            except ValueError as exc:
                # parameters left the finite range mid-epoch
                status = STATUS_DIVERGED
                diagnostics = f"non-finite update at epoch {epoch}: {exc}"
                break
            cur_loss = loss(model, data.open_bits, y)
            epoch_loss.append(cur_loss)
            epoch_accuracy.append(accuracy(model, data.open_bits, y))
            if not math.isfinite(cur_loss) or cur_loss > DIVERGENCE_LIMIT:
                status = STATUS_DIVERGED
                diagnostics = f"loss {cur_loss} at epoch {epoch}"
                break

    eval_accuracy: dict[str, float] = {}
    train_class_accuracy: dict[str, float] = {}
    if status == STATUS_OK:
        train_class_accuracy = class_accuracy(model, data.open_bits, y)
        for child, length in zip(eval_ss.spawn(len(config.eval_lengths)), config.eval_lengths):
            eval_accuracy[str(length)] = evaluate(
                model, config.task, length, config.eval_samples, np.random.default_rng(child)
            )

    report = indicators(model.cell, DEFAULT_INDICATOR_TOL)
    return RunRecord(
        run_index=run_index,
        run_seed=[config.seed, run_index],
        config=config.to_dict(),
        status=status,
        initial_loss=initial_loss,
        epoch_loss=epoch_loss,
        epoch_accuracy=epoch_accuracy,
        train_class_accuracy=train_class_accuracy,
        final_cell=model.cell.to_dict(),
        final_head=head_to_dict(model.head),
        indicators=report.to_dict(),
        eval_accuracy=eval_accuracy,
        diagnostics=diagnostics,
    )
