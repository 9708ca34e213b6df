"""Compiled statevector kernels.

Qubit ``q`` is bit ``q`` of the basis index (little-endian).  Circuits arrive as
parallel arrays; gate ``k`` uses angle ``theta[pslot[k]]`` when ``pslot[k] >= 0``
and ``angle[k]`` otherwise.
"""

import numpy as np
from numba import njit

NOP, X, Y, Z, H, RX, RY, RZ, CNOT, CRX, CRY, CRZ, XY = range(13)
KIND = {
    "NOP": NOP, "X": X, "Y": Y, "Z": Z, "H": H, "RX": RX, "RY": RY, "RZ": RZ,
    "CNOT": CNOT, "CRX": CRX, "CRY": CRY, "CRZ": CRZ, "XY": XY,
}


@njit(cache=True)
def _base(kind):
    # controlled gates act with their one-qubit counterpart on the target
    if kind == CNOT:
        return X
    if kind == CRX:
        return RX
    if kind == CRY:
        return RY
    if kind == CRZ:
        return RZ
    return kind


@njit(cache=True)
def mat1(kind, theta):
    m = np.zeros((2, 2), dtype=np.complex128)
    k = _base(kind)
    c = np.cos(0.5 * theta)
    s = np.sin(0.5 * theta)
    if k == X:
        m[0, 1] = 1.0
        m[1, 0] = 1.0
    elif k == Y:
        m[0, 1] = -1j
        m[1, 0] = 1j
    elif k == Z:
        m[0, 0] = 1.0
        m[1, 1] = -1.0
    elif k == H:
        r = 1.0 / np.sqrt(2.0)
        m[0, 0] = r
        m[0, 1] = r
        m[1, 0] = r
        m[1, 1] = -r
    elif k == RX:
        m[0, 0] = c
        m[0, 1] = -1j * s
        m[1, 0] = -1j * s
        m[1, 1] = c
    elif k == RY:
        m[0, 0] = c
        m[0, 1] = -s
        m[1, 0] = s
        m[1, 1] = c
    elif k == RZ:
        m[0, 0] = np.exp(-0.5j * theta)
        m[1, 1] = np.exp(0.5j * theta)
    else:
        m[0, 0] = 1.0
        m[1, 1] = 1.0
    return m


@njit(cache=True)
def dmat1(kind, theta):
    m = np.zeros((2, 2), dtype=np.complex128)
    k = _base(kind)
    c = 0.5 * np.cos(0.5 * theta)
    s = 0.5 * np.sin(0.5 * theta)
    if k == RX:
        m[0, 0] = -s
        m[0, 1] = -1j * c
        m[1, 0] = -1j * c
        m[1, 1] = -s
    elif k == RY:
        m[0, 0] = -s
        m[0, 1] = -c
        m[1, 0] = c
        m[1, 1] = -s
    elif k == RZ:
        m[0, 0] = -0.5j * np.exp(-0.5j * theta)
        m[1, 1] = 0.5j * np.exp(0.5j * theta)
    return m


@njit(cache=True)
def _apply_1q(state, t, m):
    stride = 1 << t
    for i in range(state.shape[0]):
        if i & stride:
            continue
        j = i | stride
        a = state[i]
        b = state[j]
        state[i] = m[0, 0] * a + m[0, 1] * b
        state[j] = m[1, 0] * a + m[1, 1] * b


@njit(cache=True)
def _apply_c1q(state, c, t, m, zero_inactive):
    ts = 1 << t
    cs = 1 << c
    for i in range(state.shape[0]):
        if i & ts:
            continue
        j = i | ts
        if i & cs:
            a = state[i]
            b = state[j]
            state[i] = m[0, 0] * a + m[0, 1] * b
            state[j] = m[1, 0] * a + m[1, 1] * b
        elif zero_inactive:
            state[i] = 0.0
            state[j] = 0.0


@njit(cache=True)
def _apply_xy(state, q0, q1, diag, off, zero_inactive):
    # acts on the |01>,|10> subspace of (q0, q1); |00> and |11> are untouched
    s0 = 1 << q0
    s1 = 1 << q1
    for i in range(state.shape[0]):
        if (i & s0) or (i & s1):
            continue
        a_idx = i | s1
        b_idx = i | s0
        a = state[a_idx]
        b = state[b_idx]
        state[a_idx] = diag * a + off * b
        state[b_idx] = off * a + diag * b
        if zero_inactive:
            state[i] = 0.0
            state[i | s0 | s1] = 0.0


@njit(cache=True)
def apply_gate(state, kind, t, c, theta):
    if kind == NOP:
        return
    if kind == XY:
        _apply_xy(state, t, c, np.cos(theta) + 0j, -1j * np.sin(theta), False)
    elif kind >= CNOT:
        _apply_c1q(state, c, t, mat1(kind, theta), False)
    else:
        _apply_1q(state, t, mat1(kind, theta))


@njit(cache=True)
def apply_dgate(state, kind, t, c, theta):
    """Apply dU/dtheta in place (not unitary)."""
    if kind == XY:
        _apply_xy(state, t, c, -np.sin(theta) + 0j, -1j * np.cos(theta), True)
    elif kind >= CNOT:
        _apply_c1q(state, c, t, dmat1(kind, theta), True)
    else:
        _apply_1q(state, t, dmat1(kind, theta))


@njit(cache=True)
def _is_param(kind):
    return kind == RX or kind == RY or kind == RZ or kind == CRX or kind == CRY or kind == CRZ or kind == XY


@njit(cache=True)
def _angle(k, pslot, angle, theta):
    if pslot[k] >= 0:
        return theta[pslot[k]]
    return angle[k]


@njit(cache=True)
def simulate(n, kinds, targets, controls, pslot, angle, theta, shift_gate, shift):
    state = np.zeros(1 << n, dtype=np.complex128)
    state[0] = 1.0
    for k in range(kinds.shape[0]):
        a = _angle(k, pslot, angle, theta)
        if k == shift_gate:
            a += shift
        apply_gate(state, kinds[k], targets[k], controls[k], a)
    return state


@njit(cache=True)
def apply_tfim(state, diag, n, field):
    """H|psi> for H = diag(ZZ part) - field * sum_q X_q, ``field = J * g``."""
    out = diag * state
    for q in range(n):
        s = 1 << q
        for i in range(state.shape[0]):
            out[i] -= field * state[i ^ s]
    return out


@njit(cache=True)
def expectation(state, diag, n, field):
    return np.real(np.vdot(state, apply_tfim(state, diag, n, field)))


@njit(cache=True)
def energy(n, kinds, targets, controls, pslot, angle, theta, diag, field, shift_gate, shift):
    state = simulate(n, kinds, targets, controls, pslot, angle, theta, shift_gate, shift)
    return expectation(state, diag, n, field)


@njit(cache=True)
def energy_and_grad(n, kinds, targets, controls, pslot, angle, theta, diag, field):
    """Energy and its exact gradient by reverse-mode (adjoint) differentiation."""
    psi = simulate(n, kinds, targets, controls, pslot, angle, theta, -1, 0.0)
    lam = apply_tfim(psi, diag, n, field)
    e = np.real(np.vdot(psi, lam))
    grad = np.zeros(theta.shape[0])
    for k in range(kinds.shape[0] - 1, -1, -1):
        kind = kinds[k]
        if kind == NOP:
            continue
        a = _angle(k, pslot, angle, theta)
        inv = -a if _is_param(kind) else a
        apply_gate(psi, kind, targets[k], controls[k], inv)
        if pslot[k] >= 0:
            mu = psi.copy()
            apply_dgate(mu, kind, targets[k], controls[k], a)
            grad[pslot[k]] += 2.0 * np.real(np.vdot(lam, mu))
        apply_gate(lam, kind, targets[k], controls[k], inv)
    return e, grad


@njit(cache=True)
def minimize(n, kinds, targets, controls, pslot, angle, theta0, diag, field,
             use_adam, lr, max_iter, tol):
    """First-order descent from ``theta0``; returns (best energy, best theta, iterations, converged)."""
    theta = theta0.copy()
    m = np.zeros_like(theta)
    v = np.zeros_like(theta)
    b1 = 0.9
    b2 = 0.999
    best_e = np.inf
    best = theta.copy()
    converged = False
    it = 0
    while it < max_iter:
        e, g = energy_and_grad(n, kinds, targets, controls, pslot, angle, theta, diag, field)
        if e < best_e:
            best_e = e
            best[:] = theta
        if np.sqrt(np.sum(g * g)) < tol:
            converged = True
            break
        it += 1
        if use_adam:
            m = b1 * m + (1.0 - b1) * g
            v = b2 * v + (1.0 - b2) * g * g
            mhat = m / (1.0 - b1 ** it)
            vhat = v / (1.0 - b2 ** it)
            theta = theta - lr * mhat / (np.sqrt(vhat) + 1e-8)
        else:
            theta = theta - lr * g
    if not converged:
        e = energy(n, kinds, targets, controls, pslot, angle, theta, diag, field, -1, 0.0)
        if e < best_e:
            best_e = e
            best[:] = theta
    return best_e, best, it, converged
