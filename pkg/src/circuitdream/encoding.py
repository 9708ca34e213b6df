"""Multi-hot circuit encoding.

Layout (slot-major)::

    [slot 0: gate | target | control | param][slot 1: ...] ... [slot max_gates-1]

Each sub-segment is one-hot over its dictionary.  A gate without a parameter
(or with an anonymous ``nop`` parameter) leaves the param sub-segment all zero,
and unused slots are all zero.  The layout is recorded verbatim in
:meth:`Vocabulary.to_dict`, which is what checkpoints embed.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass
from typing import Iterable, Sequence, Union

import numpy as np

from .circuit import (
    NOP,
    Circuit,
    CircuitError,
    GatePool,
    GateSpec,
    _parse_param,
    is_parametrized,
    is_two_qubit,
)


class EncodingError(ValueError):
    pass


@dataclass(frozen=True)
class Vocabulary:
    gate_dict: dict
    target_dict: dict
    control_dict: dict
    param_dict: dict
    max_gates: int
    pool: GatePool

    @property
    def n_qubits(self) -> int:
        return len(self.target_dict)

    @property
    def widths(self) -> tuple[int, int, int, int]:
        return (
            len(self.gate_dict),
            len(self.target_dict),
            len(self.control_dict),
            len(self.param_dict),
        )

    @property
    def segment_width(self) -> int:
        return sum(self.widths)

    @property
    def size(self) -> int:
        return self.max_gates * self.segment_width

    def offsets(self) -> tuple[int, int, int, int]:
        g, t, c, _ = self.widths
        return (0, g, g + t, g + t + c)

    def to_dict(self) -> dict:
        # dict key order is the index order; stored as lists to make that explicit
        return {
            "layout": "slot-major; sub-segments gate|target|control|param; one-hot; "
            "zero param sub-segment for absent or anonymous parameters; zero padding slots",
            "gate": list(self.gate_dict),
            "target": list(self.target_dict),
            "control": list(self.control_dict),
            "param": list(self.param_dict),
            "max_gates": self.max_gates,
            "pool": self.pool.to_dict(),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Vocabulary":
        def index(keys):
            return {k: i for i, k in enumerate(keys)}

        return cls(
            gate_dict=index(d["gate"]),
            target_dict=index(d["target"]),
            control_dict=index(d["control"]),
            param_dict=index(d["param"]),
            max_gates=int(d["max_gates"]),
            pool=GatePool.from_dict(d["pool"]),
        )

    @property
    def fingerprint(self) -> str:
        d = self.to_dict()
        d.pop("layout")
        blob = json.dumps(d, sort_keys=True, separators=(",", ":")).encode()
        return hashlib.sha256(blob).hexdigest()[:16]


@dataclass(frozen=True, eq=False)
class MultiHotVector:
    values: np.ndarray
    fingerprint: str

    def __len__(self) -> int:
        return len(self.values)

    def __eq__(self, other) -> bool:
        if not isinstance(other, MultiHotVector):
            return NotImplemented
        return self.fingerprint == other.fingerprint and np.array_equal(self.values, other.values)


def collect_param_tokens(circuits: Iterable[Circuit]) -> list[str]:
    """Var names and Fixed literals in first-seen order."""
    tokens = {}
    for c in circuits:
        for g in c.gates:
            if g.param is not None:
                tokens.setdefault(g.param.token(), None)
    return list(tokens)


def build_vocabulary(
    pool: GatePool, n_qubits: int, param_tokens: Iterable[str], max_gates: int
) -> Vocabulary:
    if max_gates < 1:
        raise EncodingError("max_gates must be >= 1")
    qubits = list(range(n_qubits))
    params = [NOP] + [t for t in dict.fromkeys(param_tokens) if t != NOP]
    return Vocabulary(
        gate_dict={g: i for i, g in enumerate(list(pool.allowed) + [NOP])},
        target_dict={q: i for i, q in enumerate(qubits)},
        control_dict={q: i for i, q in enumerate(qubits + [NOP])},
        param_dict={p: i for i, p in enumerate(params)},
        max_gates=max_gates,
        pool=pool,
    )


def _check_binding(x: MultiHotVector, v: Vocabulary) -> np.ndarray:
    if isinstance(x, MultiHotVector):
        if x.fingerprint != v.fingerprint:
            raise EncodingError("vector was produced by a different vocabulary")
        values = x.values
    else:
        values = np.asarray(x, dtype=float)
    if values.shape != (v.size,):
        raise EncodingError(f"vector length {values.shape} does not match layout size {v.size}")
    return values


def encode_array(c: Circuit, v: Vocabulary) -> np.ndarray:
    if c.n_qubits != v.n_qubits:
        raise EncodingError(f"circuit has {c.n_qubits} qubits, vocabulary {v.n_qubits}")
    if len(c.gates) > v.max_gates:
        raise EncodingError(f"{len(c.gates)} gates exceed max_gates={v.max_gates}")
    out = np.zeros(v.size)
    og, ot, oc, op = v.offsets()
    width = v.segment_width
    for slot, gate in enumerate(c.gates):
        name = NOP if gate.name == "NOP" else gate.name
        control = NOP if gate.control is None else gate.control
        try:
            cols = [og + v.gate_dict[name], ot + v.target_dict[gate.target], oc + v.control_dict[control]]
            if gate.param is not None:
                cols.append(op + v.param_dict[gate.param.token()])
        except KeyError as exc:
            raise EncodingError(f"token {exc.args[0]!r} of {gate.record()} not in vocabulary") from None
        out[slot * width + np.array(cols)] = 1.0
    return out


def encode(c: Circuit, v: Vocabulary) -> MultiHotVector:
    return MultiHotVector(encode_array(c, v), v.fingerprint)


def encode_batch(circuits: Sequence[Circuit], v: Vocabulary) -> np.ndarray:
    return np.stack([encode_array(c, v) for c in circuits]) if circuits else np.zeros((0, v.size))


def inject_noise(
    x: Union[MultiHotVector, np.ndarray],
    lower: float,
    upper: float,
    rng_seed: Union[int, np.random.Generator, None] = None,
):
    """Add independent U[lower, upper] noise to every entry; the input is not modified."""
    if lower > upper:
        raise EncodingError(f"noise lower bound {lower} exceeds upper bound {upper}")
    if lower < 0:
        raise EncodingError("noise bounds must be non-negative")
    rng = rng_seed if isinstance(rng_seed, np.random.Generator) else np.random.default_rng(rng_seed)
    values = x.values if isinstance(x, MultiHotVector) else np.asarray(x, dtype=float)
    noisy = values + rng.uniform(lower, upper, size=values.shape)
    if isinstance(x, MultiHotVector):
        return MultiHotVector(noisy, x.fingerprint)
    return noisy


def hot_threshold(noise: tuple[float, float] = (0.0, 0.0)) -> float:
    """Midpoint between the cold and hot noise bands.

    For U[l, u] additive noise cold entries lie in [l, u] and hot ones in
    [1 + l, 1 + u]; ``0.5 + (l + u) / 2`` separates them whenever ``u - l < 1``.
    """
    lower, upper = noise
    return 0.5 + 0.5 * (lower + upper)


def _argmax_key(segment: np.ndarray, keys: list):
    # np.argmax returns the first maximum, i.e. ties go to the lowest index
    return keys[int(np.argmax(segment))]


def decode(
    x: Union[MultiHotVector, np.ndarray],
    v: Vocabulary,
    noise: tuple[float, float] = (0.0, 0.0),
) -> Circuit:
    """Map a (possibly noisy or dreamed) vector back to a pool-valid circuit.

    A slot is occupied when its gate sub-segment peaks above :func:`hot_threshold`;
    occupied slots whose gate argmax is ``nop`` are dropped.  Fields a gate does not
    use are ignored, and a two-qubit gate takes the strongest control that is
    distinct from its target and allowed by the pool's connectivity.
    """
    values = _check_binding(x, v)
    tau = hot_threshold(noise)
    og, ot, oc, op = v.offsets()
    wg, wt, wc, wp = v.widths
    gate_keys, target_keys = list(v.gate_dict), list(v.target_dict)
    control_keys, param_keys = list(v.control_dict), list(v.param_dict)
    gates = []
    for seg in values.reshape(v.max_gates, v.segment_width):
        gate_seg = seg[og : og + wg]
        if gate_seg.max() <= tau:
            continue
        name = _argmax_key(gate_seg, gate_keys)
        if name == NOP:
            continue
        target = _argmax_key(seg[ot : ot + wt], target_keys)
        control = None
        if is_two_qubit(name):
            control_seg = seg[oc : oc + wc]
            candidates = [
                i for i, q in enumerate(control_keys) if q != NOP and v.pool.connected(target, q)
            ]
            if not candidates:
                continue
            control = control_keys[max(candidates, key=lambda i: (control_seg[i], -i))]
        param = None
        if is_parametrized(name):
            param_seg = seg[op : op + wp]
            if param_seg.max() > tau:
                param = _parse_param(_argmax_key(param_seg, param_keys))
        gates.append(GateSpec(name, target, control, param))
    if not gates:
        return Circuit.identity(v.n_qubits)
    try:
        return Circuit(v.n_qubits, tuple(gates))
    except CircuitError as exc:  # pragma: no cover - the repairs above make this unreachable
        raise EncodingError(str(exc)) from exc
