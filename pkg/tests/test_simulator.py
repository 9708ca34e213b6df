import math

import numpy as np
import pytest
from conftest import random_binding, random_circuit_np
from dense_oracle import circuit_state, gate_unitary, tfim_dense

from circuitdream.circuit import XY_Y_POOL, Circuit, GateSpec, GatePool, parse_circuit_string
from circuitdream.hamiltonian import (
    GroundEnergyTable,
    HamiltonianSpec,
    SimulationError,
    exact_ground_energy,
    tfim_matrix,
)
from circuitdream.simulator import apply_circuit, gate_matrix, state_fidelity, tfim_expectation

ALL_GATES = GatePool(("X", "Y", "Z", "H", "RX", "RY", "RZ", "CNOT", "CRX", "CRY", "CRZ", "XY"))


@pytest.mark.parametrize("seed", range(20))
def test_statevector_matches_matrix_product(seed):
    rng = np.random.default_rng(seed)
    n = int(rng.integers(1, 4))
    c = random_circuit_np(rng, n, int(rng.integers(1, 15)), ALL_GATES)
    b = random_binding(c, rng)
    assert np.allclose(apply_circuit(c, b), circuit_state(c, b), atol=1e-10)


@pytest.mark.parametrize("name", ["X", "Y", "Z", "H", "RX", "RY", "RZ"])
def test_one_qubit_gate_matrix(name):
    theta = 0.7 if name.startswith("R") else None
    g = GateSpec(name, 0)
    assert np.allclose(gate_matrix(g, theta), gate_unitary(name, 0, None, theta, 1))


@pytest.mark.parametrize("name", ["CNOT", "CRX", "CRY", "CRZ", "XY"])
def test_two_qubit_gate_matrix_basis(name):
    # |control target> with control as the most significant bit: control=qubit 1, target=qubit 0
    theta = None if name == "CNOT" else 1.1
    g = GateSpec(name, 0, 1)
    assert np.allclose(gate_matrix(g, theta), gate_unitary(name, 0, 1, theta, 2))


def test_rotation_convention():
    u = gate_matrix(GateSpec("RX", 0), math.pi)
    assert np.allclose(u, -1j * np.array([[0, 1], [1, 0]]))


def test_gate_matrix_param_checks():
    with pytest.raises(SimulationError):
        gate_matrix(GateSpec("RX", 0))
    with pytest.raises(SimulationError):
        gate_matrix(GateSpec("H", 0), 0.1)


def test_unbound_parameter():
    c = parse_circuit_string("RY=0=nop=a", 1)
    with pytest.raises(SimulationError):
        apply_circuit(c, {})


def test_little_endian():
    psi = apply_circuit(parse_circuit_string("X=0=nop=nop", 3))
    assert psi[1] == pytest.approx(1.0)


def test_state_norm_preserved():
    rng = np.random.default_rng(5)
    c = random_circuit_np(rng, 4, 30, ALL_GATES)
    assert np.linalg.norm(apply_circuit(c, random_binding(c, rng))) == pytest.approx(1.0, abs=1e-12)


@pytest.mark.parametrize("n", [1, 2, 3, 4])
@pytest.mark.parametrize("boundary", ["open", "periodic"])
def test_tfim_matrix_matches_oracle(n, boundary):
    h = HamiltonianSpec(n, J=0.8, g=1.3, boundary=boundary)
    assert np.allclose(tfim_matrix(h), tfim_dense(n, 0.8, 1.3, boundary == "periodic"))


@pytest.mark.parametrize("seed", range(5))
def test_expectation_matches_dense(seed):
    rng = np.random.default_rng(seed)
    psi = rng.normal(size=16) + 1j * rng.normal(size=16)
    psi /= np.linalg.norm(psi)
    h = HamiltonianSpec(4, g=0.6, boundary="periodic")
    expected = np.vdot(psi, tfim_dense(4, 1.0, 0.6, True) @ psi).real
    assert tfim_expectation(psi, h) == pytest.approx(expected, abs=1e-12)


def test_zero_state_energy():
    psi = apply_circuit(Circuit.identity(6))
    assert tfim_expectation(psi, HamiltonianSpec(6)) == pytest.approx(-5.0)


def test_expectation_dimension_mismatch():
    with pytest.raises(SimulationError):
        tfim_expectation(np.ones(8) / np.sqrt(8), HamiltonianSpec(2))


def test_exact_ground_energies():
    assert exact_ground_energy(HamiltonianSpec(1)) == pytest.approx(-1.0)
    assert exact_ground_energy(HamiltonianSpec(2)) == pytest.approx(-math.sqrt(5), abs=1e-10)
    assert exact_ground_energy(HamiltonianSpec(6)) == pytest.approx(-7.296230, abs=1e-5)
    with pytest.raises(SimulationError):
        exact_ground_energy(HamiltonianSpec(13))


def test_ground_energy_table_round_trip(tmp_path):
    table = GroundEnergyTable(tmp_path / "ground.tsv")
    h = HamiltonianSpec(3, g=0.5)
    e = exact_ground_energy(h, table=table)
    again = GroundEnergyTable(tmp_path / "ground.tsv")
    assert again.get(h) == e


def test_fidelity():
    a = apply_circuit(Circuit.identity(2))
    b = apply_circuit(parse_circuit_string("X=1=nop=nop", 2))
    assert state_fidelity(a, a) == pytest.approx(1.0)
    assert state_fidelity(a, b) == pytest.approx(0.0)


def test_xy_pool_circuit():
    c = parse_circuit_string("Y=0=nop=nop@XY=0=1=a", 2)
    b = {"a": 0.4}
    assert np.allclose(apply_circuit(c, b), circuit_state(c, b), atol=1e-12)
    assert XY_Y_POOL.two_qubit == ("XY",)
