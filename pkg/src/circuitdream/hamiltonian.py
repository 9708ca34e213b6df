"""Transverse-field Ising Hamiltonian and its exact ground energy.

``H = -J (sum_<i,j> Z_i Z_j + g sum_i X_i)`` over nearest neighbours, with qubit
``q`` as bit ``q`` of the basis index.  This module needs only numpy so the
exact oracle stays fast to import.
"""

from __future__ import annotations

import os
from dataclasses import dataclass
from functools import lru_cache
from pathlib import Path
from typing import Optional

import numpy as np

DENSE_CAP = 12


class SimulationError(ValueError):
    pass


@dataclass(frozen=True)
class HamiltonianSpec:
    n_qubits: int
    J: float = 1.0
    g: float = 1.0
    boundary: str = "open"

    def __post_init__(self):
        if self.n_qubits < 1:
            raise SimulationError("n_qubits must be >= 1")
        if self.boundary not in ("open", "periodic"):
            raise SimulationError(f"unknown boundary {self.boundary!r}")

    def bonds(self) -> list[tuple[int, int]]:
        pairs = [(i, i + 1) for i in range(self.n_qubits - 1)]
        # for two sites the wrap-around bond is the same pair, so it is not doubled
        if self.boundary == "periodic" and self.n_qubits > 2:
            pairs.append((self.n_qubits - 1, 0))
        return pairs

    def diagonal(self) -> np.ndarray:
        return _diagonal(self)

    @property
    def field(self) -> float:
        return self.J * self.g


@lru_cache(maxsize=32)
def _diagonal(h: HamiltonianSpec) -> np.ndarray:
    idx = np.arange(1 << h.n_qubits)
    z = 1 - 2 * ((idx[:, None] >> np.arange(h.n_qubits)) & 1)
    zz = sum((z[:, i] * z[:, j] for i, j in h.bonds()), np.zeros(len(idx), dtype=np.int64))
    diag = (-h.J * zz).astype(np.complex128)
    diag.setflags(write=False)
    return diag


def tfim_matrix(h: HamiltonianSpec) -> np.ndarray:
    """Dense ``2**n x 2**n`` Hamiltonian built from Kronecker products."""
    n = h.n_qubits
    x = np.array([[0, 1], [1, 0]], dtype=float)
    z = np.diag([1.0, -1.0])

    def site(op, q):
        # kron order puts qubit n-1 first so qubit 0 is the least significant bit
        mats = [op if k == q else np.eye(2) for k in reversed(range(n))]
        out = mats[0]
        for m in mats[1:]:
            out = np.kron(out, m)
        return out

    dim = 1 << n
    H = np.zeros((dim, dim))
    for i, j in h.bonds():
        H -= h.J * site(z, i) @ site(z, j)
    for i in range(n):
        H -= h.J * h.g * site(x, i)
    return H


class GroundEnergyTable:
    """Tab-separated on-disk cache of exact ground energies.

    One line per Hamiltonian: ``n_qubits<TAB>J<TAB>g<TAB>boundary<TAB>energy`` with
    floats written by ``repr``.  Lines starting with ``#`` are comments.
    """

    HEADER = "# n_qubits\tJ\tg\tboundary\tenergy\n"

    def __init__(self, path):
        self.path = Path(path)
        self._rows: dict[tuple, float] = {}
        if self.path.exists():
            for line in self.path.read_text().splitlines():
                if not line.strip() or line.startswith("#"):
                    continue
                n, J, g, boundary, e = line.split("\t")
                self._rows[(int(n), float(J), float(g), boundary)] = float(e)

    @staticmethod
    def key(h: HamiltonianSpec) -> tuple:
        return (h.n_qubits, float(h.J), float(h.g), h.boundary)

    def get(self, h: HamiltonianSpec) -> Optional[float]:
        return self._rows.get(self.key(h))

    def put(self, h: HamiltonianSpec, energy: float):
        self._rows[self.key(h)] = energy
        self.path.parent.mkdir(parents=True, exist_ok=True)
        lines = [self.HEADER]
        for (n, J, g, b), e in sorted(self._rows.items()):
            lines.append(f"{n}\t{J!r}\t{g!r}\t{b}\t{e!r}\n")
        tmp = self.path.with_suffix(".tmp")
        tmp.write_text("".join(lines))
        os.replace(tmp, self.path)


def exact_ground_energy(
    h: HamiltonianSpec, cap: int = DENSE_CAP, table: Optional[GroundEnergyTable] = None
) -> float:
    """Smallest eigenvalue of the dense Hamiltonian."""
    if h.n_qubits > cap:
        raise SimulationError(f"{h.n_qubits} qubits exceeds the dense diagonalization cap {cap}")
    if table is not None:
        cached = table.get(h)
        if cached is not None:
            return cached
    energy = float(np.linalg.eigvalsh(tfim_matrix(h))[0])
    if table is not None:
        table.put(h, energy)
    return energy
