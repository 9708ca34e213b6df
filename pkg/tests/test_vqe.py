import math

import numpy as np
import pytest
from conftest import random_binding, random_circuit_np

from circuitdream.circuit import Circuit, GatePool, GateSpec, parse_circuit_string
from circuitdream.datagen import MEAN_FIELD_ENERGY, mean_field_circuit
from circuitdream.hamiltonian import HamiltonianSpec
from circuitdream.vqe import (
    VqeConfig,
    adjoint_gradient,
    circuit_energy,
    minimize_energy,
    parameter_shift_gradient,
)

PARAM_POOL = GatePool(("H", "RX", "RY", "RZ", "CNOT", "CRX", "CRY", "CRZ", "XY"))


def finite_difference(c, h, binding, step=1e-5):
    out = {}
    for k in binding:
        up = dict(binding, **{k: binding[k] + step})
        down = dict(binding, **{k: binding[k] - step})
        out[k] = (circuit_energy(c, h, up) - circuit_energy(c, h, down)) / (2 * step)
    return out


def test_single_rotation_closed_form():
    # <Z> after RY(a) is cos(a); H = -(X) for one qubit, <X> = sin(a)
    c = parse_circuit_string("RY=0=nop=a", 1)
    h = HamiltonianSpec(1)
    for a in (0.0, 0.4, 2.0):
        assert circuit_energy(c, h, {"a": a}) == pytest.approx(-math.sin(a))
        assert parameter_shift_gradient(c, h, {"a": a})["a"] == pytest.approx(-math.cos(a))


@pytest.mark.parametrize("name", ["RX", "RY", "RZ", "CRX", "CRY", "CRZ", "XY"])
def test_shift_rule_per_gate(name):
    c = parse_circuit_string(f"H=0=nop=nop@RY=1=nop=0.3@{name}=0=1=a" if name[0] in "CX" else f"H=0=nop=nop@{name}=0=nop=a", 2)
    h = HamiltonianSpec(2, g=0.7)
    for a in np.linspace(0.1, 6.0, 5):
        b = {"a": float(a)}
        assert parameter_shift_gradient(c, h, b)["a"] == pytest.approx(finite_difference(c, h, b)["a"], abs=1e-7)


@pytest.mark.parametrize("seed", range(10))
def test_gradients_agree_on_random_circuits(seed):
    rng = np.random.default_rng(seed)
    c = random_circuit_np(rng, 3, 12, PARAM_POOL)
    if not c.free_parameters():
        pytest.skip("no free parameters drawn")
    h = HamiltonianSpec(3, g=1.2)
    b = random_binding(c, rng)
    fd = finite_difference(c, h, b)
    ps = parameter_shift_gradient(c, h, b)
    adj = adjoint_gradient(c, h, b)
    for k in fd:
        assert ps[k] == pytest.approx(fd[k], abs=1e-6)
        assert adj[k] == pytest.approx(ps[k], abs=1e-10)


def test_no_parameters_single_evaluation():
    label = minimize_energy(Circuit.identity(6), HamiltonianSpec(6))
    assert label.energy == pytest.approx(-5.0)
    assert label.best_params == {}


def test_relaxed_mean_field_reaches_mean_field_energy():
    label = minimize_energy(mean_field_circuit("relaxed"), HamiltonianSpec(6), VqeConfig(restarts=3))
    assert label.energy == pytest.approx(MEAN_FIELD_ENERGY, abs=1e-3)
    assert len(label.restart_energies) == 3
    assert label.energy == min(label.restart_energies)


def test_fixed_mean_field_energy():
    assert circuit_energy(mean_field_circuit("fixed"), HamiltonianSpec(6)) == pytest.approx(MEAN_FIELD_ENERGY, abs=1e-3)


def test_restarts_are_prefix_stable():
    c = parse_circuit_string("RY=0=nop=nop@CRX=1=0=nop@RY=1=nop=nop", 2)
    h = HamiltonianSpec(2)
    two = minimize_energy(c, h, VqeConfig(restarts=2, seed=4))
    three = minimize_energy(c, h, VqeConfig(restarts=3, seed=4))
    assert three.restart_energies[:2] == two.restart_energies


def test_deterministic_and_variational():
    c = parse_circuit_string("RY=0=nop=nop@RY=1=nop=nop@CNOT=1=0=nop@RY=1=nop=nop", 2)
    h = HamiltonianSpec(2)
    a = minimize_energy(c, h, VqeConfig(seed=1))
    assert a == minimize_energy(c, h, VqeConfig(seed=1))
    assert a.energy >= -math.sqrt(5) - 1e-9
    assert circuit_energy(c, h, a.best_params) == pytest.approx(a.energy)


def test_gradient_descent_option():
    c = parse_circuit_string("RY=0=nop=a", 1)
    label = minimize_energy(c, HamiltonianSpec(1), VqeConfig(optimizer="gd", lr=0.2, max_iterations=2000))
    assert label.energy == pytest.approx(-1.0, abs=1e-6)


def test_config_validation():
    with pytest.raises(ValueError):
        VqeConfig(restarts=0)
    with pytest.raises(ValueError):
        VqeConfig(optimizer="lbfgs")


def test_width_mismatch():
    with pytest.raises(ValueError):
        minimize_energy(Circuit(2, (GateSpec("RY", 0),)), HamiltonianSpec(3))
