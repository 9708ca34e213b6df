"""Dense statevector simulation.

Conventions:

* qubit ``q`` is bit ``q`` of the basis index (qubit 0 least significant);
* rotations are ``R_P(a) = exp(-i a/2 P)``; controlled rotations apply ``R_P(a)``
  to the target when the control is 1;
* ``XY(a) = exp(-i a/2 (X⊗X + Y⊗Y))`` on the (target, control) pair;
* the Hamiltonian itself lives in :mod:`circuitdream.hamiltonian`.

States are plain complex128 numpy arrays of length ``2**n``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Mapping, Optional

import numpy as np

from . import _kernels as K
from .circuit import Circuit, Fixed, GateSpec, Var, is_parametrized, is_two_qubit
from .hamiltonian import HamiltonianSpec, SimulationError

# --- gates ---------------------------------------------------------------------


def gate_matrix(g: GateSpec, theta: Optional[float] = None) -> np.ndarray:
    """Unitary of a gate: 2x2, or 4x4 in the ``|control target>`` basis (control most significant)."""
    if is_parametrized(g.name) != (theta is not None):
        raise SimulationError(
            f"{g.name} {'needs' if is_parametrized(g.name) else 'takes no'} parameter"
        )
    kind = K.KIND[g.name]
    a = 0.0 if theta is None else float(theta)
    if g.name == "XY":
        u = np.eye(4, dtype=complex)
        u[1, 1] = u[2, 2] = math.cos(a)
        u[1, 2] = u[2, 1] = -1j * math.sin(a)
        return u
    m = K.mat1(kind, a)
    if is_two_qubit(g.name):
        u = np.eye(4, dtype=complex)
        u[2:, 2:] = m
        return u
    return m


@dataclass(frozen=True)
class CompiledCircuit:
    """Array form of a circuit consumed by the compiled kernels."""

    n_qubits: int
    kinds: np.ndarray
    targets: np.ndarray
    controls: np.ndarray
    pslot: np.ndarray
    angle: np.ndarray
    names: tuple[str, ...]

    @property
    def n_params(self) -> int:
        return len(self.names)

    def theta(self, binding: Optional[Mapping[str, float]]) -> np.ndarray:
        binding = binding or {}
        missing = [n for n in self.names if n not in binding]
        if missing:
            raise SimulationError(f"unbound parameters: {missing}")
        return np.array([float(binding[n]) for n in self.names], dtype=float)

    def args(self):
        return (self.n_qubits, self.kinds, self.targets, self.controls, self.pslot, self.angle)


def compile_circuit(c: Circuit) -> CompiledCircuit:
    names = c.free_parameters()
    slot = {n: i for i, n in enumerate(names)}
    kinds, targets, controls, pslot, angle = [], [], [], [], []
    for i, gate in enumerate(c.gates):
        kinds.append(K.KIND[gate.name])
        targets.append(gate.target)
        controls.append(-1 if gate.control is None else gate.control)
        if not is_parametrized(gate.name):
            pslot.append(-1)
            angle.append(0.0)
        elif isinstance(gate.param, Fixed):
            pslot.append(-1)
            angle.append(gate.param.value)
        else:
            key = gate.param.name if isinstance(gate.param, Var) else f"@{i}"
            pslot.append(slot[key])
            angle.append(0.0)
    return CompiledCircuit(
        c.n_qubits,
        np.array(kinds, dtype=np.int64),
        np.array(targets, dtype=np.int64),
        np.array(controls, dtype=np.int64),
        np.array(pslot, dtype=np.int64),
        np.array(angle, dtype=float),
        tuple(names),
    )


def apply_circuit(c: Circuit, binding: Optional[Mapping[str, float]] = None) -> np.ndarray:
    """Run ``c`` on ``|0...0>``; every free parameter must appear in ``binding``."""
    cc = compile_circuit(c)
    return K.simulate(*cc.args(), cc.theta(binding), -1, 0.0)


# --- Hamiltonian ---------------------------------------------------------------


def _check_dim(psi: np.ndarray, n_qubits: int):
    if psi.shape != (1 << n_qubits,):
        raise SimulationError(f"state of shape {psi.shape} does not match {n_qubits} qubits")


def tfim_expectation(psi: np.ndarray, h: HamiltonianSpec) -> float:
    psi = np.asarray(psi, dtype=np.complex128)
    _check_dim(psi, h.n_qubits)
    value = np.vdot(psi, K.apply_tfim(psi, h.diagonal(), h.n_qubits, h.field))
    if abs(value.imag) > 1e-10:
        raise SimulationError(f"expectation has imaginary part {value.imag:.3e}")
    return float(value.real)


def state_fidelity(a: np.ndarray, b: np.ndarray) -> float:
    if a.shape != b.shape:
        raise SimulationError(f"dimension mismatch {a.shape} vs {b.shape}")
    return float(abs(np.vdot(a, b)) ** 2)
