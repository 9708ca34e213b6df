"""Training-set construction: random circuits, mean-field prefixes, VQE labels."""

from __future__ import annotations

import json
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Iterable, Optional, Sequence

import numpy as np

from .circuit import (
    BROAD_POOL,
    RY_CNOT_POOL,
    XY_Y_POOL,
    Circuit,
    Fixed,
    GatePool,
    GateSpec,
    Var,
    is_parametrized,
    parse_circuit_string,
    serialize_circuit,
)
from .encoding import Vocabulary, build_vocabulary, collect_param_tokens
from .seeding import child_rng, derive_seed
from .hamiltonian import HamiltonianSpec
from .vqe import VqeConfig, minimize_energy

SCHEMA_VERSION = 1

MF_ANGLES = (
    0.8766386666903253,
    0.587783873106211,
    0.5334355932535123,
    0.5334355932535123,
    0.5877838731062109,
    0.8766386666903251,
)
MEAN_FIELD_ENERGY = -6.902497
GROUND_ENERGY_6 = -7.296230

MF_MODES = (None, "relaxed", "fixed")


class DatasetError(ValueError):
    pass


@dataclass(frozen=True)
class DatasetSpec:
    name: str
    size: int
    pool: GatePool
    n_qubits: int = 6
    moment_range: tuple[int, ...] = (4, 5, 6, 7, 8)
    gate_ratios: tuple[float, float, float] = (0.1, 0.45, 0.45)
    mf_mode: Optional[str] = None
    seed: int = 0

    def __post_init__(self):
        if self.size < 1:
            raise DatasetError("dataset size must be positive")
        if abs(sum(self.gate_ratios) - 1.0) > 1e-9 or min(self.gate_ratios) < 0:
            raise DatasetError(f"gate ratios {self.gate_ratios} must be a distribution")
        if self.mf_mode not in MF_MODES:
            raise DatasetError(f"unknown mean-field mode {self.mf_mode!r}")
        if not self.moment_range:
            raise DatasetError("moment_range is empty")

    def scaled(self, factor: float) -> "DatasetSpec":
        return replace(self, size=max(1, round(self.size * factor)))

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "size": self.size,
            "pool": self.pool.to_dict(),
            "n_qubits": self.n_qubits,
            "moment_range": list(self.moment_range),
            "gate_ratios": list(self.gate_ratios),
            "mf_mode": self.mf_mode,
            "seed": self.seed,
        }


@dataclass
class DatasetRecord:
    circuit: str
    energy: float
    params: dict
    provenance: dict = field(default_factory=dict)

    def to_json(self) -> str:
        return json.dumps(
            {
                "schema_version": SCHEMA_VERSION,
                "circuit": self.circuit,
                "energy": self.energy,
                "params": self.params,
                "provenance": self.provenance,
            },
            sort_keys=True,
        )

    def parse(self, n_qubits: Optional[int] = None) -> Circuit:
        return parse_circuit_string(self.circuit, n_qubits or self.provenance.get("n_qubits", 6))


# --- circuits -----------------------------------------------------------------


def _one_qubit(pool: GatePool, q: int, rng) -> Optional[GateSpec]:
    if not pool.one_qubit:
        return None
    return GateSpec(pool.one_qubit[rng.integers(len(pool.one_qubit))], q)


def _draw_moment(spec: DatasetSpec, rng) -> list[GateSpec]:
    n = spec.n_qubits
    pool = spec.pool
    busy = [False] * n
    gates = []
    for q in range(n):
        if busy[q]:
            continue
        kind = rng.choice(3, p=spec.gate_ratios)
        if kind == 0:
            continue
        gate = None
        if kind == 2 and pool.two_qubit:
            partners = [p for p in range(n) if not busy[p] and pool.connected(q, p)]
            if partners:
                p = partners[rng.integers(len(partners))]
                name = pool.two_qubit[rng.integers(len(pool.two_qubit))]
                # the scanned qubit is the target; the drawn partner is the control
                gate = GateSpec(name, q, p)
                busy[p] = True
        if gate is None:
            gate = _one_qubit(pool, q, rng)
        if gate is not None:
            busy[q] = True
            gates.append(gate)
    return gates


def random_circuit(spec: DatasetSpec, moments: int, rng: np.random.Generator) -> Circuit:
    """Random circuit of exactly ``moments`` layers drawn moment by moment.

    Each moment scans the qubits in order and draws identity, a one-qubit or a
    two-qubit gate for every free qubit.  A moment that would not deepen the circuit
    (all of its gates slide left) gets a one-qubit gate on a deepest qubit, so the
    greedy moment count equals ``moments``.  Parameters are left as ``nop``.  If the
    ratios only allow identities, the result is the all-NOP circuit.
    """
    if moments not in spec.moment_range:
        raise DatasetError(f"{moments} moments outside {spec.moment_range}")
    n = spec.n_qubits
    gates: list[GateSpec] = []
    depth = [0] * n
    active = spec.gate_ratios[0] < 1.0
    for m in range(1, moments + 1):
        layer = _draw_moment(spec, rng)
        if active and not any(max(depth[q] for q in g.qubits) == m - 1 for g in layer):
            deepest = [q for q in range(n) if depth[q] == m - 1]
            used = {q for g in layer for q in g.qubits}
            free = [q for q in deepest if q not in used]
            q = free[rng.integers(len(free))]
            extra = _one_qubit(spec.pool, q, rng)
            if extra is None:
                partners = [p for p in range(n) if p not in used and spec.pool.connected(q, p)]
                if not partners:
                    raise DatasetError("pool cannot deepen the circuit")
                name = spec.pool.two_qubit[rng.integers(len(spec.pool.two_qubit))]
                extra = GateSpec(name, q, partners[rng.integers(len(partners))])
            layer.append(extra)
        for g in layer:
            d = max(depth[q] for q in g.qubits) + 1
            for q in g.qubits:
                depth[q] = d
        gates.extend(layer)
    if not gates:
        return Circuit.identity(n)
    return Circuit(n, tuple(gates))


def mean_field_circuit(mode: str, n_qubits: int = 6) -> Circuit:
    """Product RY layer: free angles ``nop0..nop5`` (relaxed) or the literal optimum (fixed)."""
    if n_qubits != 6:
        raise DatasetError("mean-field angles are only known for 6 qubits")
    if mode == "relaxed":
        params = [Var(f"nop{q}") for q in range(6)]
    elif mode == "fixed":
        params = [Fixed(a) for a in MF_ANGLES]
    else:
        raise DatasetError(f"unknown mean-field mode {mode!r}")
    return Circuit(6, tuple(GateSpec("RY", q, None, p) for q, p in enumerate(params)))


def split_mean_field(c: Circuit) -> tuple[Optional[str], Circuit]:
    """Split a circuit into (mean-field mode of its prefix, remaining suffix)."""
    if c.n_qubits != 6 or not c.gates:
        return None, c
    for mode in ("relaxed", "fixed"):
        mf = mean_field_circuit(mode).gates
        if c.gates[:6] == mf:
            rest = c.gates[6:]
            return mode, Circuit(6, rest) if rest else Circuit.identity(6)
        if c.gates[0] == mf[0]:
            # a truncated prefix cannot be separated from the random part
            raise DatasetError(f"circuit starts with an incomplete {mode} mean-field layer")
    return None, c


def with_mean_field(suffix: Circuit, mode: Optional[str]) -> Circuit:
    if mode is None:
        return suffix
    if suffix.is_identity:
        return mean_field_circuit(mode, suffix.n_qubits)
    return mean_field_circuit(mode, suffix.n_qubits) + suffix


# --- labeling -----------------------------------------------------------------


def label_seed(vqe_cfg: VqeConfig, circuit_string: str) -> int:
    """Labels depend only on (vqe seed, circuit), never on dataset position."""
    return derive_seed(vqe_cfg.seed, circuit_string)


def label_circuit(c: Circuit, h: HamiltonianSpec, vqe_cfg: VqeConfig):
    s = serialize_circuit(c)
    return minimize_energy(c, h, replace(vqe_cfg, seed=label_seed(vqe_cfg, s)))


def _label_job(args):
    s, n, h, vqe_cfg = args
    lab = label_circuit(parse_circuit_string(s, n), h, vqe_cfg)
    return lab.energy, lab.best_params


def label_many(
    circuits: Sequence[Circuit], h: HamiltonianSpec, vqe_cfg: VqeConfig, workers: int = 1
) -> list[tuple[float, dict]]:
    """Label circuits, optionally in a process pool; output order follows the input."""
    jobs = [(serialize_circuit(c), c.n_qubits, h, vqe_cfg) for c in circuits]
    if workers <= 1 or len(jobs) < 2:
        return [_label_job(j) for j in jobs]
    with ProcessPoolExecutor(max_workers=workers) as ex:
        return list(ex.map(_label_job, jobs, chunksize=max(1, len(jobs) // (4 * workers))))


def _records(circuits, labels, provenance) -> list[DatasetRecord]:
    return [
        DatasetRecord(serialize_circuit(c), e, params, dict(provenance, index=i))
        for i, (c, (e, params)) in enumerate(zip(circuits, labels))
    ]


def generate_circuits(spec: DatasetSpec) -> list[Circuit]:
    circuits = []
    for i in range(spec.size):
        moments = spec.moment_range[i % len(spec.moment_range)]
        suffix = random_circuit(spec, moments, child_rng(spec.seed, i))
        circuits.append(with_mean_field(suffix, spec.mf_mode))
    return circuits


def build_dataset(
    spec: DatasetSpec, h: HamiltonianSpec, vqe_cfg: VqeConfig = VqeConfig(), workers: int = 1
) -> list[DatasetRecord]:
    circuits = generate_circuits(spec)
    labels = label_many(circuits, h, vqe_cfg, workers)
    provenance = {"spec": spec.name, "seed": spec.seed, "n_qubits": spec.n_qubits, "pool": spec.pool.to_dict()}
    return _records(circuits, labels, provenance)


def recycle_dataset(
    records: Sequence[DatasetRecord],
    new_mf_mode: Optional[str],
    h: HamiltonianSpec,
    vqe_cfg: VqeConfig = VqeConfig(),
    name: str = "recycled",
    workers: int = 1,
) -> list[DatasetRecord]:
    """Swap the mean-field prefix of every record for ``new_mf_mode`` and relabel."""
    if new_mf_mode not in MF_MODES:
        raise DatasetError(f"unknown mean-field mode {new_mf_mode!r}")
    circuits = []
    for r in records:
        _, suffix = split_mean_field(r.parse(h.n_qubits))
        circuits.append(with_mean_field(suffix, new_mf_mode))
    labels = label_many(circuits, h, vqe_cfg, workers)
    sources = sorted({r.provenance.get("spec", "?") for r in records})
    provenance = {"spec": name, "recycled_from": sources, "n_qubits": h.n_qubits}
    if records and "pool" in records[0].provenance:
        provenance["pool"] = records[0].provenance["pool"]
    return _records(circuits, labels, provenance)


# --- presets --------------------------------------------------------------------

BROAD_SIZE = 5000

DATASET_SPECS = {
    "A_s": DatasetSpec("A_s", BROAD_SIZE, BROAD_POOL, mf_mode=None, seed=101),
    "B_s": DatasetSpec("B_s", BROAD_SIZE, BROAD_POOL, mf_mode="relaxed", seed=102),
    "C_s": DatasetSpec("C_s", BROAD_SIZE, BROAD_POOL, mf_mode="fixed", seed=103),
    "ry_cnot": DatasetSpec(
        "ry_cnot", 3000, RY_CNOT_POOL, moment_range=(4, 5, 6), gate_ratios=(0.2, 0.4, 0.4), seed=201
    ),
    "xy_y": DatasetSpec(
        "xy_y", 2000, XY_Y_POOL, moment_range=(4, 5), gate_ratios=(0.2, 0.4, 0.4), seed=202
    ),
}

# large sets: the small set plus the random parts of another small set under this prefix
LARGE_SOURCES = {
    "A_l": ("A_s", "C_s", None),
    "B_l": ("B_s", "A_s", "relaxed"),
    "C_l": ("C_s", "B_s", "fixed"),
}

PRESET_NAMES = tuple(DATASET_SPECS) + tuple(LARGE_SOURCES)


def targeted_dataset(
    name: str, seed: int, h: HamiltonianSpec, vqe_cfg: VqeConfig = VqeConfig(), scale: float = 1.0,
    workers: int = 1,
) -> list[DatasetRecord]:
    if name not in ("ry_cnot", "xy_y"):
        raise DatasetError(f"unknown targeted dataset {name!r}")
    spec = replace(DATASET_SPECS[name], seed=seed)
    if scale != 1.0:
        spec = spec.scaled(scale)
    return build_dataset(spec, h, vqe_cfg, workers)


def build_preset(
    name: str,
    h: HamiltonianSpec,
    vqe_cfg: VqeConfig = VqeConfig(),
    scale: float = 1.0,
    seed: Optional[int] = None,
    workers: int = 1,
) -> list[DatasetRecord]:
    """Build a named dataset; ``scale`` shrinks every size (0.1 is the desk profile)."""
    if name in DATASET_SPECS:
        spec = DATASET_SPECS[name]
        if seed is not None:
            spec = replace(spec, seed=seed)
        return build_dataset(spec.scaled(scale), h, vqe_cfg, workers)
    if name in LARGE_SOURCES:
        base, donor, mode = LARGE_SOURCES[name]
        small = build_preset(base, h, vqe_cfg, scale, seed, workers)
        donor_records = build_preset(donor, h, vqe_cfg, scale, seed, workers)
        extra = recycle_dataset(donor_records, mode, h, vqe_cfg, name=name, workers=workers)
        return small + extra
    raise DatasetError(f"unknown preset {name!r}; choose from {', '.join(PRESET_NAMES)}")


# --- files ----------------------------------------------------------------------


def save_dataset(records: Iterable[DatasetRecord], path) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for r in records:
            fh.write(r.to_json() + "\n")


def load_dataset(path) -> list[DatasetRecord]:
    records = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            if not line.strip():
                continue
            try:
                d = json.loads(line)
                version = d.get("schema_version")
                if version != SCHEMA_VERSION:
                    raise DatasetError(f"unsupported schema_version {version!r}")
                records.append(DatasetRecord(d["circuit"], float(d["energy"]), d["params"], d["provenance"]))
            except (json.JSONDecodeError, KeyError, TypeError) as exc:
                raise DatasetError(f"{path}:{lineno}: malformed record ({exc})") from None
    return records


def dataset_circuits(records: Sequence[DatasetRecord], n_qubits: Optional[int] = None) -> list[Circuit]:
    return [r.parse(n_qubits) for r in records]


def dataset_vocabulary(
    records: Sequence[DatasetRecord], pool: Optional[GatePool] = None, max_gates: Optional[int] = None
) -> Vocabulary:
    """Vocabulary covering every circuit of a dataset.

    The pool defaults to the one recorded in the first record's provenance and
    ``max_gates`` to the longest circuit.
    """
    if not records:
        raise DatasetError("empty dataset")
    if pool is None:
        if "pool" not in records[0].provenance:
            raise DatasetError("dataset records carry no gate pool; pass one explicitly")
        pool = GatePool.from_dict(records[0].provenance["pool"])
    circuits = dataset_circuits(records)
    longest = max(len(c.gates) for c in circuits)
    if max_gates is not None and max_gates < longest:
        raise DatasetError(f"max_gates {max_gates} is shorter than the longest circuit ({longest})")
    n_qubits = circuits[0].n_qubits
    return build_vocabulary(pool, n_qubits, collect_param_tokens(circuits), max_gates or longest)


def count_parametrized(c: Circuit) -> int:
    return sum(is_parametrized(g.name) for g in c.gates)

