"""Turning a trained sign-extended loader into the data state.

The ancilla is the least significant qubit.  ``post_select`` applies a
Hadamard to it and keeps the |1> branch (success probability 1/2 for an
exact loader); ``amplitude_amplify`` adds one more qubit and a single
Grover-type round so the data branch is reached with probability 1.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .simulator import (
    AnsatzSpec,
    Hadamard,
    apply_gate,
    init_zero_state,
    inverse_gates,
    n_qubits_of,
    run_gates,
)


class PostSelectionError(ValueError):
    pass


@dataclass
class PostSelectResult:
    data_state: np.ndarray
    success_probability: float


def _hadamard_last(state: np.ndarray) -> np.ndarray:
    n = n_qubits_of(state)
    return apply_gate(np.asarray(state, dtype=complex), Hadamard(n - 1))


def post_select(state, atol: float = 1e-14) -> PostSelectResult:
    state = np.asarray(state, dtype=complex)
    if n_qubits_of(state) < 2:
        raise PostSelectionError("post-selection needs at least one data qubit plus the ancilla")
    branch = _hadamard_last(state)[1::2]
    prob = float(np.vdot(branch, branch).real)
    if prob <= atol:
        raise PostSelectionError("the |1> ancilla branch has zero probability")
    return PostSelectResult(branch / np.sqrt(prob), prob)


def overlap(candidate, target_d) -> float:
    """|<target|phi>| with phi the renormalized post-selected branch of ``candidate``."""
    candidate = np.asarray(candidate, dtype=complex)
    target_d = np.asarray(target_d)
    if candidate.size != 2 * target_d.size:
        raise PostSelectionError(
            f"candidate has {candidate.size} amplitudes, expected {2 * target_d.size}"
        )
    try:
        phi = post_select(candidate).data_state
    except PostSelectionError:
        return 0.0
    return float(min(1.0, abs(np.vdot(target_d, phi))))


def align_sign(state, reference) -> np.ndarray:
    """Flip the global sign so the largest-magnitude entry of ``reference`` agrees."""
    state = np.asarray(state)
    k = int(np.argmax(np.abs(reference)))
    return -state if np.real(state[k] * np.conj(reference[k])) < 0 else state


class AnsatzLoader:
    """Loader backed by a parameterized ansatz; the inverse reverses the gate list."""

    def __init__(self, spec: AnsatzSpec, params):
        self.spec = spec
        self.n_qubits = spec.n_qubits
        self._gates = list(spec.gates(params))

    def apply(self, state: np.ndarray, inverse: bool = False) -> np.ndarray:
        n = n_qubits_of(state)
        return self._run(state, n, inverse)

    def _run(self, state, n, inverse):
        gates = inverse_gates(self._gates) if inverse else self._gates
        if n == self.n_qubits:
            return run_gates(state, gates)
        # act on the leading qubits of a larger register
        extra = n - self.n_qubits
        block = np.asarray(state, dtype=complex).reshape(1 << self.n_qubits, 1 << extra)
        out = np.empty_like(block)
        for col in range(block.shape[1]):
            out[:, col] = run_gates(block[:, col], gates)
        return out.reshape(-1)


class MatrixLoader:
    """Loader given by an explicit unitary matrix."""

    def __init__(self, unitary):
        self.unitary = np.asarray(unitary, dtype=complex)
        self.n_qubits = n_qubits_of(self.unitary[0])

    @classmethod
    def preparing(cls, vector) -> "MatrixLoader":
        """Real Householder reflection sending |0...0> to ``vector`` exactly."""
        v = np.asarray(vector, dtype=float)
        v = v / np.linalg.norm(v)
        e0 = np.zeros_like(v)
        e0[0] = 1.0
        w = e0 - v
        nw = np.linalg.norm(w)
        if nw < 1e-15:
            return cls(np.eye(v.size))
        w /= nw
        return cls(np.eye(v.size) - 2.0 * np.outer(w, w))

    def apply(self, state: np.ndarray, inverse: bool = False) -> np.ndarray:
        U = self.unitary.conj().T if inverse else self.unitary
        n = n_qubits_of(state)
        block = np.asarray(state, dtype=complex).reshape(1 << self.n_qubits, 1 << (n - self.n_qubits))
        return (U @ block).reshape(-1)


def as_loader(loader):
    if isinstance(loader, tuple):
        return AnsatzLoader(*loader)
    return loader


def _apply_A(loader, state: np.ndarray, inverse: bool = False) -> np.ndarray:
    # A = ((I_n (x) H) U) (x) H on n+2 qubits; ancilla pair is the two last qubits
    m = loader.n_qubits  # n + 1
    if not inverse:
        out = loader.apply(state)
        out = apply_gate(out, Hadamard(m - 1), inplace=True)
        return apply_gate(out, Hadamard(m), inplace=True)
    out = apply_gate(state, Hadamard(m))
    out = apply_gate(out, Hadamard(m - 1), inplace=True)
    return loader.apply(out, inverse=True)


def reflect_zero(state: np.ndarray) -> np.ndarray:
    """(I - 2|0><0|)"""
    out = np.array(state, dtype=complex, copy=True)
    out[0] *= -1
    return out


def reflect_good(state: np.ndarray) -> np.ndarray:
    """(I - 2 I (x) |11><11|) on the last two qubits."""
    out = np.array(state, dtype=complex, copy=True)
    out[3::4] *= -1
    return out


def amplification_operator(loader, state: np.ndarray, inverse: bool = False) -> np.ndarray:
    """Q = A (I - 2|0><0|) A^dagger (I - 2 I (x) |11><11|), or its inverse."""
    loader = as_loader(loader)
    if not inverse:
        out = reflect_good(state)
        out = _apply_A(loader, out, inverse=True)
        out = reflect_zero(out)
        return _apply_A(loader, out)
    out = _apply_A(loader, state, inverse=True)
    out = reflect_zero(out)
    out = _apply_A(loader, out)
    return reflect_good(out)


def prepare_A(loader) -> np.ndarray:
    loader = as_loader(loader)
    return _apply_A(loader, init_zero_state(loader.n_qubits + 1))


def amplitude_amplify(loader) -> np.ndarray:
    """Q A |0>^(n+2) for a loader acting on n+1 qubits.

    ``loader`` is an ``(AnsatzSpec, params)`` pair, an :class:`AnsatzLoader`
    or a :class:`MatrixLoader`.
    """
    loader = as_loader(loader)
    return amplification_operator(loader, prepare_A(loader))


def good_branch(state) -> tuple[np.ndarray, float]:
    """Data register conditioned on the last two qubits being |11>, and its probability."""
    state = np.asarray(state, dtype=complex)
    branch = state[3::4]
    prob = float(np.vdot(branch, branch).real)
    if prob <= 0:
        raise PostSelectionError("the |11> branch is empty")
    return branch / np.sqrt(prob), prob
