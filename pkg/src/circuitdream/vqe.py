"""Variational energy minimization used to label circuits."""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field
from typing import Mapping, Optional

import numpy as np

from . import _kernels as K
from .circuit import Circuit
from .seeding import child_rng
from .hamiltonian import HamiltonianSpec
from .simulator import compile_circuit

_CP = (math.sqrt(2) + 1) / (4 * math.sqrt(2))
_CM = (math.sqrt(2) - 1) / (4 * math.sqrt(2))

# (coefficient, shift) pairs; dE/da = sum c * E(a + s)
SHIFT_RULES = {
    # generator eigenvalues +-1/2
    "RX": ((0.5, math.pi / 2), (-0.5, -math.pi / 2)),
    "RY": ((0.5, math.pi / 2), (-0.5, -math.pi / 2)),
    "RZ": ((0.5, math.pi / 2), (-0.5, -math.pi / 2)),
}
# controlled rotations: eigenvalues {0, 0, +-1/2}, frequencies {1/2, 1}
for _name in ("CRX", "CRY", "CRZ"):
    SHIFT_RULES[_name] = (
        (_CP, math.pi / 2),
        (-_CP, -math.pi / 2),
        (-_CM, 3 * math.pi / 2),
        (_CM, -3 * math.pi / 2),
    )
# XY: eigenvalues {-1, 0, 0, 1}, frequencies {1, 2}; the controlled rule at double frequency
SHIFT_RULES["XY"] = (
    (2 * _CP, math.pi / 4),
    (-2 * _CP, -math.pi / 4),
    (-2 * _CM, 3 * math.pi / 4),
    (2 * _CM, -3 * math.pi / 4),
)


@dataclass(frozen=True)
class VqeConfig:
    restarts: int = 3
    max_iterations: int = 500
    gradient_tolerance: float = 1e-6
    optimizer: str = "adam"  # or "gd"
    lr: float = 0.05
    seed: int = 0

    def __post_init__(self):
        if self.restarts < 1:
            raise ValueError("restarts must be >= 1")
        if self.optimizer not in ("adam", "gd"):
            raise ValueError(f"unknown optimizer {self.optimizer!r}")

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class EnergyLabel:
    energy: float
    best_params: dict
    restart_energies: list = field(default_factory=list)
    converged: bool = True


def circuit_energy(c: Circuit, h: HamiltonianSpec, binding: Optional[Mapping[str, float]] = None) -> float:
    cc = compile_circuit(c)
    return float(K.energy(*cc.args(), cc.theta(binding), h.diagonal(), h.field, -1, 0.0))


def _check_width(c: Circuit, h: HamiltonianSpec):
    if c.n_qubits != h.n_qubits:
        raise ValueError(f"circuit has {c.n_qubits} qubits, Hamiltonian {h.n_qubits}")


def adjoint_gradient(c: Circuit, h: HamiltonianSpec, binding: Mapping[str, float]) -> dict:
    _check_width(c, h)
    cc = compile_circuit(c)
    _, grad = K.energy_and_grad(*cc.args(), cc.theta(binding), h.diagonal(), h.field)
    return dict(zip(cc.names, grad.tolist()))


def parameter_shift_gradient(c: Circuit, h: HamiltonianSpec, binding: Mapping[str, float]) -> dict:
    """Exact gradient from shifted energy evaluations, one shift rule per gate occurrence.

    A parameter shared by several gates collects one term per occurrence (product rule).
    """
    _check_width(c, h)
    cc = compile_circuit(c)
    theta = cc.theta(binding)
    diag = h.diagonal()
    grad = np.zeros(cc.n_params)
    for k, gate in enumerate(c.gates):
        slot = cc.pslot[k]
        if slot < 0:
            continue
        for coef, shift in SHIFT_RULES[gate.name]:
            grad[slot] += coef * K.energy(*cc.args(), theta, diag, h.field, k, shift)
    return dict(zip(cc.names, grad.tolist()))


def minimize_energy(
    c: Circuit,
    h: HamiltonianSpec,
    cfg: VqeConfig = VqeConfig(),
    initial: Optional[Mapping[str, float]] = None,
) -> EnergyLabel:
    """Best energy over ``cfg.restarts`` independent descents.

    Restart ``r`` starts from angles drawn uniformly in [0, 2pi) by stream ``r`` of
    ``cfg.seed``, so adding restarts never changes the earlier ones.  ``initial``, if
    given, replaces the starting point of restart 0.
    """
    _check_width(c, h)
    cc = compile_circuit(c)
    diag = h.diagonal()
    if cc.n_params == 0:
        e = float(K.energy(*cc.args(), np.zeros(0), diag, h.field, -1, 0.0))
        return EnergyLabel(e, {}, [e], True)
    energies, thetas, converged = [], [], []
    for r in range(cfg.restarts):
        theta0 = child_rng(cfg.seed, r).uniform(0.0, 2 * math.pi, cc.n_params)
        if r == 0 and initial is not None:
            theta0 = cc.theta(initial)
        e, theta, _, ok = K.minimize(
            *cc.args(), theta0, diag, h.field,
            cfg.optimizer == "adam", cfg.lr, cfg.max_iterations, cfg.gradient_tolerance,
        )
        energies.append(float(e))
        thetas.append(theta)
        converged.append(bool(ok))
    best = int(np.argmin(energies))
    return EnergyLabel(
        energy=energies[best],
        best_params=dict(zip(cc.names, thetas[best].tolist())),
        restart_energies=energies,
        converged=converged[best],
    )
