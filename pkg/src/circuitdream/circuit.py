"""Discrete circuit representation and the ``gate=target=control=param`` string format.

A circuit string is a sequence of gate records joined by ``@``; each record has
exactly four ``=``-separated fields.  ``nop`` is the placeholder for a missing
control qubit or parameter::

    CNOT=0=1=nop@RY=2=nop=nop@RY=3=nop=theta@RX=4=nop=0.25

A parametrized gate whose parameter field is ``nop`` carries an anonymous free
parameter that is optimized at VQE time.  A non-numeric token such as ``nop0``
names a (possibly shared) free parameter and a float literal fixes the angle.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from typing import Iterable, Optional, Union

NOP = "nop"

ONE_QUBIT_GATES = ("X", "Y", "Z", "H", "RX", "RY", "RZ")
TWO_QUBIT_GATES = ("CNOT", "CRX", "CRY", "CRZ", "XY")
PARAMETRIZED_GATES = frozenset({"RX", "RY", "RZ", "CRX", "CRY", "CRZ", "XY"})
GATE_NAMES = frozenset(ONE_QUBIT_GATES + TWO_QUBIT_GATES + ("NOP",))

_FLOAT_LITERAL = re.compile(r"^[+-]?(\d+\.?\d*|\.\d+)([eE][+-]?\d+)?$")


class CircuitError(ValueError):
    """Raised for malformed circuit strings or structurally invalid gates."""


@dataclass(frozen=True)
class Var:
    """Named free parameter, bound at VQE time."""

    name: str

    def token(self) -> str:
        return self.name


@dataclass(frozen=True)
class Fixed:
    """Literal rotation angle in radians."""

    value: float

    def token(self) -> str:
        # repr() is the shortest string that round-trips the double exactly
        return repr(float(self.value))


Param = Optional[Union[Var, Fixed]]


def is_two_qubit(name: str) -> bool:
    return name in TWO_QUBIT_GATES


def is_parametrized(name: str) -> bool:
    return name in PARAMETRIZED_GATES


@dataclass(frozen=True)
class GateSpec:
    name: str
    target: int
    control: Optional[int] = None
    param: Param = None

    def __post_init__(self):
        if self.name not in GATE_NAMES:
            raise CircuitError(f"unknown gate {self.name!r}")
        if self.target < 0:
            raise CircuitError(f"negative target qubit in {self}")
        if is_two_qubit(self.name):
            if self.control is None:
                raise CircuitError(f"{self.name} needs a control qubit")
            if self.control == self.target:
                raise CircuitError(f"{self.name}: control equals target ({self.target})")
            if self.control < 0:
                raise CircuitError(f"negative control qubit in {self}")
        elif self.control is not None:
            raise CircuitError(f"one-qubit gate {self.name} cannot have a control")
        if self.param is not None and not is_parametrized(self.name):
            raise CircuitError(f"gate {self.name} takes no parameter")

    @property
    def qubits(self) -> tuple[int, ...]:
        if self.control is None:
            return (self.target,)
        return (self.target, self.control)

    def record(self) -> str:
        control = NOP if self.control is None else str(self.control)
        param = NOP if self.param is None else self.param.token()
        return f"{self.name}={self.target}={control}={param}"


@dataclass(frozen=True)
class Circuit:
    n_qubits: int
    gates: tuple[GateSpec, ...] = field(default_factory=tuple)

    def __post_init__(self):
        object.__setattr__(self, "gates", tuple(self.gates))
        if self.n_qubits < 1:
            raise CircuitError("a circuit needs at least one qubit")
        for gate in self.gates:
            for q in gate.qubits:
                if q >= self.n_qubits:
                    raise CircuitError(
                        f"qubit {q} out of range for {self.n_qubits} qubits in {gate.record()}"
                    )

    def __len__(self) -> int:
        return len(self.gates)

    def __str__(self) -> str:
        return serialize_circuit(self)

    def __add__(self, other: "Circuit") -> "Circuit":
        if other.n_qubits != self.n_qubits:
            raise CircuitError("cannot concatenate circuits of different width")
        return Circuit(self.n_qubits, self.gates + other.gates)

    @classmethod
    def identity(cls, n_qubits: int) -> "Circuit":
        """The canonical empty circuit: one NOP per qubit."""
        return cls(n_qubits, tuple(GateSpec("NOP", q) for q in range(n_qubits)))

    @property
    def is_identity(self) -> bool:
        return all(g.name == "NOP" for g in self.gates)

    def free_parameters(self) -> list[str]:
        """Ordered names of the optimizable parameters.

        Anonymous parameters (``nop`` on a parametrized gate) are keyed ``@<gate index>``;
        ``@`` can never occur in a parsed token so these cannot collide with named ones.
        """
        names: list[str] = []
        seen = set()
        for i, gate in enumerate(self.gates):
            if not is_parametrized(gate.name) or isinstance(gate.param, Fixed):
                continue
            key = gate.param.name if isinstance(gate.param, Var) else f"@{i}"
            if key not in seen:
                seen.add(key)
                names.append(key)
        return names


def _parse_param(token: str) -> Param:
    if token == NOP:
        return None
    if _FLOAT_LITERAL.match(token):
        return Fixed(float(token))
    return Var(token)


def _parse_qubit(token: str, what: str, record: str) -> int:
    try:
        return int(token)
    except ValueError:
        raise CircuitError(f"bad {what} qubit {token!r} in record {record!r}") from None


def parse_circuit_string(s: str, n_qubits: int) -> Circuit:
    s = s.strip()
    if not s:
        raise CircuitError("empty circuit string")
    gates = []
    for record in s.split("@"):
        fields = record.strip().split("=")
        if len(fields) != 4:
            raise CircuitError(f"record {record!r} has {len(fields)} fields, expected 4")
        name, target, control, param = (f.strip() for f in fields)
        if name not in GATE_NAMES:
            raise CircuitError(f"unknown gate {name!r} in record {record!r}")
        gates.append(
            GateSpec(
                name,
                _parse_qubit(target, "target", record),
                None if control == NOP else _parse_qubit(control, "control", record),
                _parse_param(param),
            )
        )
    return Circuit(n_qubits, tuple(gates))


def serialize_circuit(c: Circuit) -> str:
    if not c.gates:
        raise CircuitError("cannot serialize a circuit with no gates; use Circuit.identity")
    return "@".join(g.record() for g in c.gates)


def moment_count(c: Circuit) -> int:
    """Depth under greedy left-alignment, ignoring NOPs."""
    depth = [0] * c.n_qubits
    for gate in c.gates:
        if gate.name == "NOP":
            continue
        layer = max(depth[q] for q in gate.qubits) + 1
        for q in gate.qubits:
            depth[q] = layer
    return max(depth, default=0)


@dataclass(frozen=True)
class GatePool:
    """Allowed gate names (ordered) and two-qubit connectivity.

    ``max_distance=None`` means all-to-all; otherwise a two-qubit gate needs
    ``|target - control| <= max_distance``.  NOP is always permitted.
    """

    allowed: tuple[str, ...]
    max_distance: Optional[int] = None

    def __post_init__(self):
        allowed = tuple(dict.fromkeys(g for g in self.allowed if g != "NOP"))
        unknown = [g for g in allowed if g not in GATE_NAMES]
        if unknown:
            raise CircuitError(f"unknown gates in pool: {unknown}")
        if not allowed:
            raise CircuitError("gate pool is empty")
        if self.max_distance is not None and self.max_distance < 1:
            raise CircuitError("max_distance must be >= 1")
        object.__setattr__(self, "allowed", allowed)

    @property
    def all_to_all(self) -> bool:
        return self.max_distance is None

    @property
    def one_qubit(self) -> tuple[str, ...]:
        return tuple(g for g in self.allowed if not is_two_qubit(g))

    @property
    def two_qubit(self) -> tuple[str, ...]:
        return tuple(g for g in self.allowed if is_two_qubit(g))

    def connected(self, a: int, b: int) -> bool:
        if a == b:
            return False
        return self.max_distance is None or abs(a - b) <= self.max_distance

    def to_dict(self) -> dict:
        return {"allowed": list(self.allowed), "max_distance": self.max_distance}

    @classmethod
    def from_dict(cls, d: dict) -> "GatePool":
        return cls(tuple(d["allowed"]), d.get("max_distance"))


BROAD_POOL = GatePool(("X", "Y", "Z", "H", "RX", "RY", "RZ", "CNOT", "CRX", "CRY", "CRZ"))
RY_CNOT_POOL = GatePool(("RY", "CNOT"), max_distance=1)
XY_Y_POOL = GatePool(("XY", "Y"))


def validate(c: Circuit, pool: GatePool) -> list[str]:
    """Return every pool or connectivity violation in ``c``; empty means valid."""
    violations = []
    allowed = set(pool.allowed) | {"NOP"}
    for i, gate in enumerate(c.gates):
        if gate.name not in allowed:
            violations.append(f"gate {i} {gate.record()}: {gate.name} not in pool")
        if gate.control is not None and not pool.connected(gate.target, gate.control):
            violations.append(
                f"gate {i} {gate.record()}: distance {abs(gate.target - gate.control)} "
                f"exceeds {pool.max_distance}"
            )
    return violations


def concat(circuits: Iterable[Circuit]) -> Circuit:
    circuits = list(circuits)
    out = circuits[0]
    for c in circuits[1:]:
        out = out + c
    return out
