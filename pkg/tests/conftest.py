import os
import time
from contextlib import contextmanager
from pathlib import Path

import numpy as np
import pytest
from hypothesis import strategies as st

from circuitdream.circuit import (
    BROAD_POOL,
    Circuit,
    Fixed,
    GatePool,
    GateSpec,
    Var,
    is_parametrized,
    is_two_qubit,
)

# --- hypothesis strategies --------------------------------------------------------

VAR_NAMES = ("a", "b", "theta", "phi")


@st.composite
def params(draw):
    kind = draw(st.sampled_from(("none", "var", "fixed")))
    if kind == "none":
        return None
    if kind == "var":
        return Var(draw(st.sampled_from(VAR_NAMES)))
    return Fixed(draw(st.floats(-10, 10, allow_nan=False, allow_infinity=False)))


@st.composite
def gates(draw, pool: GatePool, n_qubits: int):
    names = [g for g in pool.allowed if not is_two_qubit(g) or n_qubits > 1]
    name = draw(st.sampled_from(names))
    target = draw(st.integers(0, n_qubits - 1))
    control = None
    if is_two_qubit(name):
        partners = [q for q in range(n_qubits) if pool.connected(target, q)]
        if not partners:
            name = pool.one_qubit[0]
        else:
            control = draw(st.sampled_from(partners))
    param = draw(params()) if is_parametrized(name) else None
    return GateSpec(name, target, control, param)


@st.composite
def circuits(draw, pool: GatePool = BROAD_POOL, n_qubits=None, max_gates: int = 12):
    n = n_qubits if n_qubits is not None else draw(st.integers(1, 4))
    gs = draw(st.lists(gates(pool, n), min_size=1, max_size=max_gates))
    return Circuit(n, tuple(gs))


def random_circuit_np(rng: np.random.Generator, n: int, n_gates: int, pool: GatePool = BROAD_POOL) -> Circuit:
    """Random pool-valid circuit from a numpy generator; every parameter gets a value later."""
    names = [g for g in pool.allowed if not is_two_qubit(g) or n > 1]
    out = []
    for i in range(n_gates):
        name = names[rng.integers(len(names))]
        target = int(rng.integers(n))
        control = None
        if is_two_qubit(name):
            partners = [q for q in range(n) if pool.connected(target, q)]
            control = int(partners[rng.integers(len(partners))])
        param = None
        if is_parametrized(name):
            r = rng.random()
            param = Var(VAR_NAMES[rng.integers(2)]) if r < 0.3 else Fixed(float(rng.uniform(-3, 3))) if r < 0.5 else None
        out.append(GateSpec(name, target, control, param))
    return Circuit(n, tuple(out))


def random_binding(circuit: Circuit, rng: np.random.Generator) -> dict:
    return {k: float(rng.uniform(0, 2 * np.pi)) for k in circuit.free_parameters()}


# --- acceptance reporting -----------------------------------------------------------

ACCEPTANCE_LINES: dict = {}


def layered_ansatz(n: int, layers: int) -> Circuit:
    """RY+RZ on every qubit then a CNOT ring whose stride changes per layer."""
    gates = []
    for layer in range(layers):
        for q in range(n):
            gates.append(GateSpec("RY", q, None, Var(f"y{layer}_{q}")))
            gates.append(GateSpec("RZ", q, None, Var(f"z{layer}_{q}")))
        stride = 1 + layer % (n - 1)
        for q in range(n):
            gates.append(GateSpec("CNOT", (q + stride) % n, q))
    return Circuit(n, tuple(gates))


def record_criterion(number: int, passed: bool, detail: str) -> None:
    ACCEPTANCE_LINES[number] = f"criterion {number:2d}: {'PASS' if passed else 'FAIL'}  {detail}"


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for k in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(ACCEPTANCE_LINES[k])


# --- shared desk-scale pipeline -----------------------------------------------------


@contextmanager
def working_dir(path: Path):
    old = os.getcwd()
    os.chdir(path)
    try:
        yield
    finally:
        os.chdir(old)


PIPELINE = (
    ["--workers", "1", "gen", "--preset", "B_s", "--scale", "0.1"],
    ["train", "out/gen/dataset.jsonl", "--preset", "B_s", "--desk"],
    ["dream", "out/train/model.ckpt", "--dataset", "out/gen/dataset.jsonl", "--n", "100"],
)


def run_pipeline(root: Path) -> dict:
    """Run gen -> train -> dream through the CLI with relative paths under ``root``."""
    from circuitdream.cli import main

    root.mkdir(parents=True, exist_ok=True)
    env_before = os.environ.get("CIRCUITDREAM_OUT")
    os.environ["CIRCUITDREAM_OUT"] = "out"
    codes, seconds = [], []
    try:
        with working_dir(root):
            for argv in PIPELINE:
                start = time.perf_counter()
                codes.append(main(list(argv)))
                seconds.append(time.perf_counter() - start)
    finally:
        if env_before is None:
            os.environ.pop("CIRCUITDREAM_OUT", None)
        else:
            os.environ["CIRCUITDREAM_OUT"] = env_before
    return {"root": root, "out": root / "out", "codes": codes, "seconds": seconds}


@pytest.fixture(scope="session")
def desk_runs(tmp_path_factory):
    """Two independent runs of the desk-scale B pipeline with the same seeds."""
    base = tmp_path_factory.mktemp("pipeline")
    return run_pipeline(base / "first"), run_pipeline(base / "second")
