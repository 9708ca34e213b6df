"""Fully-connected energy regressor written directly in numpy.

Weights are stored ``(fan_in, fan_out)`` so a batch ``X`` of shape ``(B, fan_in)``
maps to ``X @ W + b``.  Hidden layers use the rectifier and the output is linear.
Initialization follows the common ``U(-1/sqrt(fan_in), 1/sqrt(fan_in))`` rule for
both weights and biases.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from .encoding import MultiHotVector, Vocabulary, encode_batch, inject_noise
from .seeding import child_rng

CHECKPOINT_MAGIC = b"CDMLP1\n"
CHECKPOINT_VERSION = 1


class CheckpointError(ValueError):
    pass


class FingerprintError(CheckpointError):
    """Model and vocabulary disagree about the input layout."""


@dataclass
class MlpModel:
    weights: list
    biases: list
    fingerprint: Optional[str] = None
    vocab: Optional[Vocabulary] = None
    activation: str = "relu"

    @property
    def layer_sizes(self) -> tuple[int, ...]:
        return (self.weights[0].shape[0],) + tuple(w.shape[1] for w in self.weights)

    @property
    def input_size(self) -> int:
        return self.weights[0].shape[0]

    def copy(self) -> "MlpModel":
        return MlpModel(
            [w.copy() for w in self.weights],
            [b.copy() for b in self.biases],
            self.fingerprint,
            self.vocab,
            self.activation,
        )

    def checksum(self) -> str:
        h = hashlib.sha256()
        for w, b in zip(self.weights, self.biases):
            h.update(np.ascontiguousarray(w).tobytes())
            h.update(np.ascontiguousarray(b).tobytes())
        return h.hexdigest()


def init_model(
    layer_sizes: Sequence[int], seed: int = 0, vocab: Optional[Vocabulary] = None
) -> MlpModel:
    sizes = tuple(int(s) for s in layer_sizes)
    if len(sizes) < 3:
        raise ValueError("need an input layer, at least one hidden layer and an output layer")
    if min(sizes) < 1:
        raise ValueError(f"zero-width layer in {sizes}")
    if sizes[-1] != 1:
        raise ValueError("the output layer must have width 1")
    if vocab is not None and sizes[0] != vocab.size:
        raise ValueError(f"input width {sizes[0]} does not match vocabulary size {vocab.size}")
    rng = np.random.default_rng(seed)
    weights, biases = [], []
    for fan_in, fan_out in zip(sizes[:-1], sizes[1:]):
        bound = 1.0 / np.sqrt(fan_in)
        weights.append(rng.uniform(-bound, bound, size=(fan_in, fan_out)))
        biases.append(rng.uniform(-bound, bound, size=fan_out))
    return MlpModel(weights, biases, vocab.fingerprint if vocab else None, vocab)


def _inputs(m: MlpModel, x) -> tuple[np.ndarray, bool]:
    if isinstance(x, MultiHotVector):
        if m.fingerprint is not None and x.fingerprint != m.fingerprint:
            raise FingerprintError("input vector was encoded with a different vocabulary")
        x = x.values
    x = np.asarray(x, dtype=float)
    single = x.ndim == 1
    X = x[None, :] if single else x
    if X.shape[1] != m.input_size:
        raise ValueError(f"input width {X.shape[1]} does not match model input {m.input_size}")
    return X, single


def _forward_trace(m: MlpModel, X: np.ndarray):
    acts = [X]
    pre = []
    h = X
    last = len(m.weights) - 1
    for i, (W, b) in enumerate(zip(m.weights, m.biases)):
        z = h @ W + b
        pre.append(z)
        h = z if i == last else np.maximum(z, 0.0)
        acts.append(h)
    return pre, acts


def forward(m: MlpModel, x):
    """Predicted energy for one vector (float) or a batch (1-D array)."""
    X, single = _inputs(m, x)
    _, acts = _forward_trace(m, X)
    out = acts[-1][:, 0]
    return float(out[0]) if single else out


def _loss(pred: np.ndarray, y: np.ndarray, kind: str) -> tuple[float, np.ndarray]:
    diff = pred - y
    if kind == "l2":
        return float(np.mean(diff**2)), 2.0 * diff / len(diff)
    if kind == "l1":
        return float(np.mean(np.abs(diff))), np.sign(diff) / len(diff)
    raise ValueError(f"unknown loss {kind!r}")


def loss_and_gradients(m: MlpModel, batch, labels, loss_kind: str = "l2"):
    """Return ``(loss, {"weights": [...], "biases": [...]}, input_gradient)``.

    The input gradient has the batch's shape: ``d loss / d x``.
    """
    X, single = _inputs(m, batch)
    y = np.atleast_1d(np.asarray(labels, dtype=float))
    if len(X) == 0:
        raise ValueError("empty batch")
    if len(y) != len(X):
        raise ValueError(f"{len(X)} inputs but {len(y)} labels")
    pre, acts = _forward_trace(m, X)
    loss, dpred = _loss(acts[-1][:, 0], y, loss_kind)
    delta = dpred[:, None]
    gw = [None] * len(m.weights)
    gb = [None] * len(m.weights)
    for i in range(len(m.weights) - 1, -1, -1):
        gw[i] = acts[i].T @ delta
        gb[i] = delta.sum(axis=0)
        delta = delta @ m.weights[i].T
        if i > 0:
            delta = delta * (pre[i - 1] > 0)
    grad_x = delta[0] if single else delta
    return loss, {"weights": gw, "biases": gb}, grad_x


def input_gradients(m: MlpModel, X) -> tuple[np.ndarray, np.ndarray]:
    """Predictions and d prediction / d x for every row of a batch."""
    X, _ = _inputs(m, np.atleast_2d(np.asarray(X, dtype=float)))
    pre, acts = _forward_trace(m, X)
    delta = np.ones((len(X), 1))
    for i in range(len(m.weights) - 1, -1, -1):
        delta = delta @ m.weights[i].T
        if i > 0:
            delta = delta * (pre[i - 1] > 0)
    return acts[-1][:, 0], delta


def input_gradient(m: MlpModel, x) -> tuple[float, np.ndarray]:
    """Prediction and d prediction / d x for a single vector."""
    X, _ = _inputs(m, x)
    pred, grad = input_gradients(m, X)
    return float(pred[0]), grad[0]


# --- optimizers -----------------------------------------------------------------


@dataclass(frozen=True)
class OptimizerConfig:
    kind: str = "adam"  # "adam" or "adamw"
    lr: float = 1e-3
    weight_decay: float = 0.0
    betas: tuple[float, float] = (0.9, 0.999)
    eps: float = 1e-8

    def __post_init__(self):
        if self.kind not in ("adam", "adamw"):
            raise ValueError(f"unknown optimizer {self.kind!r}")
        if self.weight_decay < 0:
            raise ValueError("weight_decay must be >= 0")
        if self.kind == "adam" and self.weight_decay:
            raise ValueError("weight decay needs the adamw optimizer")


@dataclass
class AdamState:
    m: list
    v: list
    step: int = 0

    @classmethod
    def zeros(cls, model: MlpModel) -> "AdamState":
        params = model.weights + model.biases
        return cls([np.zeros_like(p) for p in params], [np.zeros_like(p) for p in params])


def optimizer_step(model: MlpModel, grads: dict, state: AdamState, opt: OptimizerConfig) -> MlpModel:
    """One Adam/AdamW update in place.  AdamW decays weights (never biases) first."""
    params = model.weights + model.biases
    gs = grads["weights"] + grads["biases"]
    if len(state.m) != len(params) or any(a.shape != p.shape for a, p in zip(state.m, params)):
        raise ValueError("optimizer state does not match the model")
    b1, b2 = opt.betas
    state.step += 1
    c1 = 1.0 - b1**state.step
    c2 = 1.0 - b2**state.step
    n_weights = len(model.weights)
    for i, (p, g) in enumerate(zip(params, gs)):
        if opt.kind == "adamw" and opt.weight_decay and i < n_weights:
            p *= 1.0 - opt.lr * opt.weight_decay
        state.m[i] *= b1
        state.m[i] += (1.0 - b1) * g
        state.v[i] *= b2
        state.v[i] += (1.0 - b2) * g * g
        p -= opt.lr * (state.m[i] / c1) / (np.sqrt(state.v[i] / c2) + opt.eps)
    return model


# --- training -------------------------------------------------------------------


@dataclass(frozen=True)
class TrainConfig:
    hidden: tuple[int, ...] = (700, 700, 700)
    loss: str = "l2"
    optimizer: str = "adam"
    lr: float = 1e-5
    weight_decay: float = 0.0
    epochs: int = 2000
    batch_size: int = 64
    split: float = 0.85
    noise: tuple[float, float] = (0.1, 0.95)
    patience: Optional[int] = 200
    noisy_test: bool = True  # score the held-out set on one fixed noisy draw
    select: str = "best"  # "best" test-loss snapshot or "last" epoch
    seed: int = 0

    def __post_init__(self):
        if not 0.0 < self.split < 1.0:
            raise ValueError("split must lie in (0, 1)")
        if self.loss not in ("l1", "l2"):
            raise ValueError(f"unknown loss {self.loss!r}")
        if self.select not in ("best", "last"):
            raise ValueError(f"unknown selection {self.select!r}")
        OptimizerConfig(self.optimizer, self.lr, self.weight_decay)

    def optimizer_config(self) -> OptimizerConfig:
        return OptimizerConfig(self.optimizer, self.lr, self.weight_decay)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["hidden"] = list(self.hidden)
        d["noise"] = list(self.noise)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "TrainConfig":
        d = dict(d)
        d["hidden"] = tuple(d["hidden"])
        d["noise"] = tuple(d["noise"])
        return cls(**d)

    def digest(self) -> str:
        return hashlib.sha256(json.dumps(self.to_dict(), sort_keys=True).encode()).hexdigest()[:16]


@dataclass
class TrainReport:
    train_loss: float
    test_loss: float
    baseline_loss: float
    best_epoch: int
    epochs_run: int
    train_curve: list = field(default_factory=list)
    test_curve: list = field(default_factory=list)

    def to_dict(self) -> dict:
        return asdict(self)


def split_indices(n: int, split: float, seed: int) -> tuple[np.ndarray, np.ndarray]:
    """Shuffle once with ``seed`` and cut into train/test index arrays."""
    if n < 2:
        raise ValueError("need at least two records to split")
    perm = child_rng(seed, 0).permutation(n)
    n_train = min(max(int(round(split * n)), 1), n - 1)
    return perm[:n_train], perm[n_train:]


def evaluate(m: MlpModel, X: np.ndarray, y: np.ndarray, loss_kind: str) -> float:
    return _loss(forward(m, X), y, loss_kind)[0]


def train(records, vocab: Vocabulary, cfg: TrainConfig = TrainConfig()):
    """Fit a regressor to ``(circuit, energy)`` records.

    Training inputs get fresh uniform noise every epoch.  The held-out set is
    scored on a single noisy draw made once up front (``noisy_test``), since the
    model only ever sees noisy inputs, or on clean encodings otherwise.
    Returns ``(model, TrainReport)``.
    """
    if len(records) < 2:
        raise ValueError("dataset needs at least two records")
    circuits = [r.parse(vocab.n_qubits) for r in records]
    X = encode_batch(circuits, vocab)
    y = np.array([r.energy for r in records], dtype=float)
    tr, te = split_indices(len(records), cfg.split, cfg.seed)
    Xtr, ytr, Xte, yte = X[tr], y[tr], X[te], y[te]

    model = init_model((vocab.size,) + tuple(cfg.hidden) + (1,), child_rng(cfg.seed, 1).integers(2**63), vocab)
    opt = cfg.optimizer_config()
    state = AdamState.zeros(model)
    rng = child_rng(cfg.seed, 2)
    lower, upper = cfg.noise
    if cfg.noisy_test:
        Xte = inject_noise(Xte, lower, upper, child_rng(cfg.seed, 3))
    baseline = _loss(np.full(len(yte), ytr.mean()), yte, cfg.loss)[0]

    best = (np.inf, model.copy(), 0, np.nan)
    train_curve, test_curve = [], []
    since_best = 0
    epoch = 0
    for epoch in range(1, cfg.epochs + 1):
        noisy = inject_noise(Xtr, lower, upper, rng)
        order = rng.permutation(len(ytr))
        total = 0.0
        for start in range(0, len(order), cfg.batch_size):
            idx = order[start : start + cfg.batch_size]
            loss, grads, _ = loss_and_gradients(model, noisy[idx], ytr[idx], cfg.loss)
            optimizer_step(model, grads, state, opt)
            total += loss * len(idx)
        train_curve.append(total / len(ytr))
        test_curve.append(evaluate(model, Xte, yte, cfg.loss))
        if test_curve[-1] < best[0]:
            best = (test_curve[-1], model.copy(), epoch, train_curve[-1])
            since_best = 0
        else:
            since_best += 1
            if cfg.patience is not None and since_best >= cfg.patience:
                break

    if cfg.select == "best":
        test_loss, model, best_epoch, train_loss = best
    else:
        test_loss, best_epoch, train_loss = test_curve[-1], epoch, train_curve[-1]
    report = TrainReport(
        train_loss=float(train_loss),
        test_loss=float(test_loss),
        baseline_loss=float(baseline),
        best_epoch=int(best_epoch),
        epochs_run=epoch,
        train_curve=[float(v) for v in train_curve],
        test_curve=[float(v) for v in test_curve],
    )
    model.meta = {"train_config": cfg.to_dict(), "train_config_digest": cfg.digest()}
    return model, report


# --- checkpoints ----------------------------------------------------------------


def save_checkpoint(m: MlpModel, path, train_config: Optional[dict] = None) -> None:
    """Write ``MAGIC, one JSON header line, raw little-endian float64 arrays``.

    The header lists every array (name and shape) in payload order, the full
    vocabulary layout, its fingerprint and a sha256 of the payload.
    """
    arrays = []
    for i, (w, b) in enumerate(zip(m.weights, m.biases)):
        arrays += [(f"W{i}", w), (f"b{i}", b)]
    payload = b"".join(np.ascontiguousarray(a, dtype="<f8").tobytes() for _, a in arrays)
    train_config = train_config if train_config is not None else getattr(m, "meta", {}).get("train_config")
    header = {
        "format": "circuitdream-mlp",
        "schema_version": CHECKPOINT_VERSION,
        "layer_sizes": list(m.layer_sizes),
        "activation": m.activation,
        "arrays": [[name, list(a.shape)] for name, a in arrays],
        "dtype": "<f8",
        "vocab_fingerprint": m.fingerprint,
        "vocabulary": m.vocab.to_dict() if m.vocab is not None else None,
        "train_config": train_config,
        "train_config_digest": (
            hashlib.sha256(json.dumps(train_config, sort_keys=True).encode()).hexdigest()[:16]
            if train_config is not None
            else None
        ),
        "payload_sha256": hashlib.sha256(payload).hexdigest(),
    }
    blob = CHECKPOINT_MAGIC + json.dumps(header, sort_keys=True).encode() + b"\n" + payload
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_bytes(blob)


def read_checkpoint_header(path) -> tuple[dict, bytes]:
    try:
        blob = Path(path).read_bytes()
    except OSError as exc:
        raise CheckpointError(f"cannot read checkpoint {path}: {exc}") from None
    if not blob.startswith(CHECKPOINT_MAGIC):
        raise CheckpointError(f"{path} is not a model checkpoint")
    end = blob.find(b"\n", len(CHECKPOINT_MAGIC))
    if end < 0:
        raise CheckpointError(f"{path}: truncated header")
    try:
        header = json.loads(blob[len(CHECKPOINT_MAGIC) : end])
    except json.JSONDecodeError as exc:
        raise CheckpointError(f"{path}: corrupt header ({exc})") from None
    if header.get("schema_version") != CHECKPOINT_VERSION:
        raise CheckpointError(f"{path}: unsupported checkpoint version {header.get('schema_version')!r}")
    return header, blob[end + 1 :]


def load_checkpoint(path, expected_vocab: Optional[Vocabulary] = None) -> MlpModel:
    header, payload = read_checkpoint_header(path)
    expected = sum(int(np.prod(shape)) for _, shape in header["arrays"]) * 8
    if len(payload) != expected:
        raise CheckpointError(f"{path}: payload has {len(payload)} bytes, expected {expected} (truncated?)")
    if hashlib.sha256(payload).hexdigest() != header["payload_sha256"]:
        raise CheckpointError(f"{path}: payload checksum mismatch")
    flat = np.frombuffer(payload, dtype="<f8")
    arrays, offset = {}, 0
    for name, shape in header["arrays"]:
        size = int(np.prod(shape))
        arrays[name] = flat[offset : offset + size].reshape(shape).astype(float)
        offset += size
    n = len(header["layer_sizes"]) - 1
    vocab = Vocabulary.from_dict(header["vocabulary"]) if header.get("vocabulary") else None
    model = MlpModel(
        [arrays[f"W{i}"] for i in range(n)],
        [arrays[f"b{i}"] for i in range(n)],
        header.get("vocab_fingerprint"),
        vocab,
        header.get("activation", "relu"),
    )
    model.meta = {
        "train_config": header.get("train_config"),
        "train_config_digest": header.get("train_config_digest"),
    }
    if expected_vocab is not None and expected_vocab.fingerprint != model.fingerprint:
        raise FingerprintError(
            f"checkpoint expects vocabulary {model.fingerprint}, got {expected_vocab.fingerprint}"
        )
    return model
