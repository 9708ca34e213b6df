"""Gradient descent on the input of a frozen energy regressor.

A run alternates a continuous phase (``inner_steps`` gradient steps on a noisy
encoding) with a discrete one (decode, then label the circuit with VQE), so
every recorded intermediate is a real circuit with a true energy.  Predicted
energies are always averaged over a fixed bank of noise draws, which makes the
prediction a function of the circuit alone and lets proposals be compared.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from .circuit import Circuit, serialize_circuit
from .datagen import label_circuit
from .encoding import MultiHotVector, decode, encode, encode_array, encode_batch, inject_noise
from .neuralnet import FingerprintError, MlpModel, forward, input_gradient, input_gradients
from .seeding import child_rng, derive_seed
from .hamiltonian import HamiltonianSpec
from .vqe import VqeConfig

TRACE_SCHEMA_VERSION = 1


@dataclass(frozen=True)
class DreamConfig:
    target_energy: float = -8.0
    lr: float = 0.01
    noise: tuple[float, float] = (0.1, 0.9)
    inner_steps: int = 200
    outer_epochs: int = 10
    tolerance: float = 1e-6
    score_draws: int = 8
    accept_only_improving: bool = True
    seed: int = 0

    def __post_init__(self):
        if self.lr <= 0:
            raise ValueError("lr must be > 0")
        if self.outer_epochs < 1:
            raise ValueError("outer_epochs must be >= 1")
        if self.inner_steps < 0:
            raise ValueError("inner_steps must be >= 0")
        if self.score_draws < 1:
            raise ValueError("score_draws must be >= 1")

    def to_dict(self) -> dict:
        d = asdict(self)
        d["noise"] = list(self.noise)
        return d

    def digest(self) -> str:
        return hashlib.sha256(json.dumps(self.to_dict(), sort_keys=True).encode()).hexdigest()[:16]


@dataclass
class DreamEpoch:
    epoch: int
    circuit: str
    predicted: float
    loss: float
    energy: float
    accepted: bool = True


@dataclass
class DreamTrace:
    epochs: list = field(default_factory=list)
    config_digest: str = ""
    model_checksum: str = ""

    @property
    def accepted(self) -> list[DreamEpoch]:
        return [e for e in self.epochs if e.accepted]

    @property
    def current_loss(self) -> float:
        return self.accepted[-1].loss

    @property
    def energies(self) -> list[float]:
        return [e.energy for e in self.epochs]

    @property
    def initial(self) -> DreamEpoch:
        return self.epochs[0]

    @property
    def final(self) -> DreamEpoch:
        """The circuit the run ends on: the last accepted epoch."""
        return self.accepted[-1]

    def to_lines(self) -> list[str]:
        return [
            json.dumps(
                dict(
                    asdict(e),
                    schema_version=TRACE_SCHEMA_VERSION,
                    config_digest=self.config_digest,
                    model_checksum=self.model_checksum,
                ),
                sort_keys=True,
            )
            for e in self.epochs
        ]


def save_trace(trace: DreamTrace, path) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text("".join(line + "\n" for line in trace.to_lines()), encoding="utf-8")


def load_trace(path) -> DreamTrace:
    trace = DreamTrace()
    for lineno, line in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), 1):
        if not line.strip():
            continue
        try:
            d = json.loads(line)
            if d.get("schema_version") != TRACE_SCHEMA_VERSION:
                raise ValueError(f"unsupported schema_version {d.get('schema_version')!r}")
            trace.config_digest = d["config_digest"]
            trace.model_checksum = d["model_checksum"]
            trace.epochs.append(
                DreamEpoch(
                    int(d["epoch"]), d["circuit"], float(d["predicted"]), float(d["loss"]),
                    float(d["energy"]), bool(d["accepted"]),
                )
            )
        except (json.JSONDecodeError, KeyError, TypeError) as exc:
            raise ValueError(f"{path}:{lineno}: malformed trace record ({exc})") from None
    return trace


def dreaming_loss(prediction: float, target: float) -> float:
    return (prediction - target) ** 2


def _values(m: MlpModel, x) -> np.ndarray:
    if isinstance(x, MultiHotVector):
        if m.fingerprint is not None and x.fingerprint != m.fingerprint:
            raise FingerprintError("vector was encoded with a different vocabulary than the model")
        return x.values
    return np.asarray(x, dtype=float)


def dream_step(m: MlpModel, x, cfg: DreamConfig):
    """``x - lr * d(pred - target)^2 / dx``; returns the same type it was given."""
    values = _values(m, x)
    pred, grad = input_gradient(m, values)
    new = values - cfg.lr * 2.0 * (pred - cfg.target_energy) * grad
    return MultiHotVector(new, x.fingerprint) if isinstance(x, MultiHotVector) else new


def _noise_bank(cfg: DreamConfig, size: int) -> np.ndarray:
    """The fixed noise draws used to score circuits, shared by every run under ``cfg``."""
    lower, upper = cfg.noise
    rng = child_rng(derive_seed(cfg.seed, "score"), 0)
    return rng.uniform(lower, upper, size=(cfg.score_draws, size))


def score_circuits(m: MlpModel, circuits, bank: np.ndarray) -> np.ndarray:
    """Mean prediction over the noise bank: a deterministic function of each circuit."""
    X = encode_batch(circuits, m.vocab)
    k = len(bank)
    batch = (X[:, None, :] + bank[None, :, :]).reshape(len(X) * k, -1)
    return forward(m, batch).reshape(len(X), k).mean(axis=1)


def dream_cohort(
    m: MlpModel,
    circuits,
    cfg: DreamConfig,
    h: HamiltonianSpec,
    vqe_cfg: VqeConfig = VqeConfig(),
    label_cache: Optional[dict] = None,
) -> list[DreamTrace]:
    """Dream several circuits in lockstep; equivalent to one :func:`dream_run` each.

    Per epoch every unconverged circuit is encoded with fresh noise (its own
    stream), moved by ``inner_steps`` gradient steps and decoded.  The decoded
    proposal is scored on the fixed noise bank, labeled with VQE and recorded;
    it becomes the current circuit only if its score is strictly better (or
    always, with ``accept_only_improving`` off).
    """
    if m.vocab is None:
        raise FingerprintError("model carries no vocabulary")
    vocab = m.vocab
    cache = {} if label_cache is None else label_cache
    checksum = m.checksum()
    lower, upper = cfg.noise
    bank = _noise_bank(cfg, vocab.size)

    def energy_of(c: Circuit) -> float:
        s = serialize_circuit(c)
        if s not in cache:
            cache[s] = label_circuit(c, h, vqe_cfg).energy
        return cache[s]

    current = list(circuits)
    for c in current:
        encode(c, vocab)  # raises early on circuits the vocabulary cannot hold
    streams = [derive_seed(cfg.seed, serialize_circuit(c)) for c in current]
    scores = score_circuits(m, current, bank)
    traces = []
    for c, score in zip(current, scores):
        t = DreamTrace(config_digest=cfg.digest(), model_checksum=checksum)
        t.epochs.append(
            DreamEpoch(0, serialize_circuit(c), float(score), dreaming_loss(float(score), cfg.target_energy), energy_of(c))
        )
        traces.append(t)

    for epoch in range(1, cfg.outer_epochs + 1):
        active = [i for i, t in enumerate(traces) if t.current_loss >= cfg.tolerance]
        if not active:
            break
        X = np.stack(
            [
                inject_noise(encode_array(current[i], vocab), lower, upper, child_rng(streams[i], epoch))
                for i in active
            ]
        )
        for _ in range(cfg.inner_steps):
            pred, grad = input_gradients(m, X)
            X -= cfg.lr * 2.0 * (pred - cfg.target_energy)[:, None] * grad
        proposals = [decode(x, vocab, cfg.noise) for x in X]
        new_scores = score_circuits(m, proposals, bank)
        for i, c, score in zip(active, proposals, new_scores):
            t = traces[i]
            loss = dreaming_loss(float(score), cfg.target_energy)
            accepted = not cfg.accept_only_improving or loss < t.current_loss
            t.epochs.append(
                DreamEpoch(epoch, serialize_circuit(c), float(score), loss, energy_of(c), accepted)
            )
            if accepted:
                current[i] = c
    if m.checksum() != checksum:  # pragma: no cover - guards against accidental mutation
        raise RuntimeError("model weights changed during dreaming")
    return traces


def dream_run(
    m: MlpModel,
    c0: Circuit,
    cfg: DreamConfig,
    h: HamiltonianSpec,
    vqe_cfg: VqeConfig = VqeConfig(),
    label_cache: Optional[dict] = None,
) -> DreamTrace:
    """Dream a single circuit toward ``cfg.target_energy``; epoch 0 of the trace is ``c0``."""
    return dream_cohort(m, [c0], cfg, h, vqe_cfg, label_cache)[0]
