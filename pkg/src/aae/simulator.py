"""Dense statevector simulator for layered rotation/CNOT circuits.

Qubit 0 is the most significant bit of the amplitude index, so for an
n-qubit register the basis index is ``j = sum_k 2**(n-1-k) * j_k``.
States are plain complex numpy arrays of length ``2**n``.  Batched helpers
operate on arrays of shape ``(B, 2**n)`` and are what the trainers use.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Iterator, NamedTuple, Sequence

import numpy as np

MAX_QUBITS = 24
AXES = ("x", "y", "z")


class SimulationError(ValueError):
    pass


class Rotation(NamedTuple):
    axis: str
    qubit: int
    angle: float


class Hadamard(NamedTuple):
    qubit: int


class CNOT(NamedTuple):
    control: int
    target: int


Gate = Rotation | Hadamard | CNOT


def n_qubits_of(state: np.ndarray) -> int:
    dim = state.shape[-1]
    n = dim.bit_length() - 1
    if dim < 2 or 1 << n != dim:
        raise SimulationError(f"state length {dim} is not a power of two >= 2")
    return n


def init_zero_state(n_qubits: int, max_qubits: int = MAX_QUBITS) -> np.ndarray:
    if n_qubits < 1 or n_qubits > max_qubits:
        raise SimulationError(f"n_qubits must be in [1, {max_qubits}], got {n_qubits}")
    state = np.zeros(1 << n_qubits, dtype=complex)
    state[0] = 1.0
    return state


def _check_qubit(q: int, n: int) -> None:
    if not 0 <= q < n:
        raise SimulationError(f"qubit {q} out of range for {n}-qubit register")


def _pair_view(state: np.ndarray, qubit: int, n: int) -> tuple[np.ndarray, np.ndarray]:
    # views of the amplitudes with `qubit` = 0 and = 1; leading axes are batch axes
    if not state.flags.c_contiguous:
        raise SimulationError("in-place gate application needs a C-contiguous state")
    v = state.reshape(state.shape[:-1] + (1 << qubit, 2, 1 << (n - qubit - 1)))
    return v[..., 0, :], v[..., 1, :]


def _rotation_terms(axis: str, angle) -> tuple:
    """Matrix entries (u00, u01, u10, u11) of exp(-i angle sigma_axis / 2)."""
    c = np.cos(np.asarray(angle) / 2)
    s = np.sin(np.asarray(angle) / 2)
    if axis == "y":
        return c, -s, s, c
    if axis == "x":
        return c, -1j * s, -1j * s, c
    if axis == "z":
        return c - 1j * s, 0.0, 0.0, c + 1j * s
    raise SimulationError(f"unknown rotation axis {axis!r}")


def rotation_matrix(axis: str, angle: float) -> np.ndarray:
    u00, u01, u10, u11 = _rotation_terms(axis, angle)
    return np.array([[u00, u01], [u10, u11]], dtype=complex)


def _rotate_inplace(state: np.ndarray, axis: str, qubit: int, angle, n: int) -> None:
    a0, a1 = _pair_view(state, qubit, n)
    u00, u01, u10, u11 = _rotation_terms(axis, angle)
    if np.ndim(u00):
        # one angle per batch row
        shape = (-1,) + (1,) * (a0.ndim - 1)
        u00, u11 = u00.reshape(shape), u11.reshape(shape)
        u01 = u01.reshape(shape) if np.ndim(u01) else u01
        u10 = u10.reshape(shape) if np.ndim(u10) else u10
    b0 = a0.copy()
    a0 *= u00
    a0 += u01 * a1
    a1 *= u11
    a1 += u10 * b0


def _hadamard_inplace(state: np.ndarray, qubit: int, n: int) -> None:
    a0, a1 = _pair_view(state, qubit, n)
    b0 = a0.copy()
    a0 += a1
    a1 *= -1
    a1 += b0
    a0 /= np.sqrt(2)
    a1 /= np.sqrt(2)


def cnot_permutation(control: int, target: int, n: int) -> np.ndarray:
    idx = np.arange(1 << n)
    cbit = 1 << (n - 1 - control)
    tbit = 1 << (n - 1 - target)
    return np.where(idx & cbit, idx ^ tbit, idx)


def apply_gate(state: np.ndarray, gate: Gate, inplace: bool = False) -> np.ndarray:
    """Apply one gate; works on a single state or a batch of states."""
    n = n_qubits_of(state)
    out = state if inplace else np.array(state, dtype=complex, copy=True)
    if isinstance(gate, Rotation):
        _check_qubit(gate.qubit, n)
        _rotate_inplace(out, gate.axis, gate.qubit, gate.angle, n)
    elif isinstance(gate, Hadamard):
        _check_qubit(gate.qubit, n)
        _hadamard_inplace(out, gate.qubit, n)
    elif isinstance(gate, CNOT):
        _check_qubit(gate.control, n)
        _check_qubit(gate.target, n)
        if gate.control == gate.target:
            raise SimulationError("CNOT control equals target")
        out[...] = out[..., cnot_permutation(gate.control, gate.target, n)]
    else:
        raise SimulationError(f"unsupported gate {gate!r}")
    return out


def apply_hadamard_all(state: np.ndarray) -> np.ndarray:
    out = np.array(state, dtype=complex, copy=True)
    n = n_qubits_of(out)
    for q in range(n):
        _hadamard_inplace(out, q, n)
    return out


@dataclass(frozen=True)
class AnsatzSpec:
    """Hardware-efficient ansatz: per layer, one rotation on every qubit then a
    CNOT chain 0->1, 1->2, ..., (n-2)->(n-1).

    ``axes`` lists the rotation axis of each parameter in layer-major order.
    """

    n_qubits: int
    n_layers: int
    axes: tuple[str, ...]

    def __post_init__(self):
        if self.n_qubits < 1 or self.n_layers < 0:
            raise SimulationError("ansatz needs n_qubits >= 1 and n_layers >= 0")
        if len(self.axes) != self.n_params:
            raise SimulationError(f"expected {self.n_params} axis tags, got {len(self.axes)}")
        bad = set(self.axes) - set(AXES)
        if bad:
            raise SimulationError(f"unknown axis tags {sorted(bad)}")

    @property
    def n_params(self) -> int:
        return self.n_layers * self.n_qubits

    @property
    def is_real(self) -> bool:
        return all(a == "y" for a in self.axes)

    @classmethod
    def all_y(cls, n_qubits: int, n_layers: int) -> "AnsatzSpec":
        return cls(n_qubits, n_layers, ("y",) * (n_qubits * n_layers))

    @classmethod
    def random_axes(cls, n_qubits: int, n_layers: int, rng: np.random.Generator) -> "AnsatzSpec":
        picks = rng.integers(0, 3, size=n_qubits * n_layers)
        return cls(n_qubits, n_layers, tuple(AXES[i] for i in picks))

    def entangler(self) -> list[CNOT]:
        return [CNOT(q, q + 1) for q in range(self.n_qubits - 1)]

    def gates(self, params: Sequence[float], offset: int = 0) -> Iterator[Gate]:
        """Gate sequence; ``offset`` shifts qubit indices when embedded in a larger register."""
        params = check_params(self, params)
        for layer in range(self.n_layers):
            for q in range(self.n_qubits):
                r = layer * self.n_qubits + q
                yield Rotation(self.axes[r], q + offset, float(params[r]))
            for g in self.entangler():
                yield CNOT(g.control + offset, g.target + offset)

    def to_dict(self) -> dict:
        return {"n_qubits": self.n_qubits, "n_layers": self.n_layers, "axes": "".join(self.axes)}

    @classmethod
    def from_dict(cls, d: dict) -> "AnsatzSpec":
        return cls(int(d["n_qubits"]), int(d["n_layers"]), tuple(d["axes"]))


def check_params(spec: AnsatzSpec, params) -> np.ndarray:
    params = np.asarray(params, dtype=float)
    if params.ndim < 1 or params.shape[-1] != spec.n_params:
        raise SimulationError(f"ansatz takes {spec.n_params} parameters, got shape {params.shape}")
    return params


def _chain_permutation(spec: AnsatzSpec, n: int, offset: int) -> np.ndarray:
    perm = np.arange(1 << n)
    for g in spec.entangler():
        # applying CNOTs in order composes their index maps right-to-left
        perm = perm[cnot_permutation(g.control + offset, g.target + offset, n)]
    return perm


def run_layers_batch(states: np.ndarray, blocks, params: np.ndarray) -> np.ndarray:
    """Run several ansatz blocks side by side on a batch of states, in place.

    ``blocks`` is a list of ``(spec, qubit_offset)``; ``params`` has shape
    ``(B, total_params)`` with block parameters concatenated in block order.
    Layer ``k`` of every block is applied before layer ``k+1`` of any block;
    blocks act on disjoint qubits so this equals running them one after another.
    """
    n = n_qubits_of(states)
    starts = np.cumsum([0] + [spec.n_params for spec, _ in blocks])
    perms = [_chain_permutation(spec, n, off) for spec, off in blocks]
    depth = max((spec.n_layers for spec, _ in blocks), default=0)
    for layer in range(depth):
        for (spec, off), start, perm in zip(blocks, starts, perms):
            if layer >= spec.n_layers:
                continue
            for q in range(spec.n_qubits):
                r = start + layer * spec.n_qubits + q
                _rotate_inplace(states, spec.axes[r - start], q + off, params[:, r], n)
            if spec.n_qubits > 1:
                states[...] = states[..., perm]
    return states


def run_ansatz_batch(spec: AnsatzSpec, params: np.ndarray, initial: np.ndarray | None = None) -> np.ndarray:
    params = np.atleast_2d(check_params(spec, params))
    if initial is None:
        initial = init_zero_state(spec.n_qubits)
    states = np.repeat(np.asarray(initial, dtype=complex)[None, :], params.shape[0], axis=0)
    return run_layers_batch(states, [(spec, 0)], params)


def run_ansatz(spec: AnsatzSpec, params, initial: np.ndarray | None = None) -> np.ndarray:
    """Statevector of the layered circuit applied to ``initial`` (default |0...0>)."""
    params = check_params(spec, params)
    if params.ndim != 1:
        raise SimulationError("run_ansatz takes a single parameter vector")
    return run_ansatz_batch(spec, params[None, :], initial)[0]


def run_gates(state: np.ndarray, gates) -> np.ndarray:
    out = np.array(state, dtype=complex, copy=True)
    for g in gates:
        apply_gate(out, g, inplace=True)
    return out


def inverse_gates(gates) -> list[Gate]:
    inv = []
    for g in reversed(list(gates)):
        inv.append(Rotation(g.axis, g.qubit, -g.angle) if isinstance(g, Rotation) else g)
    return inv


def measure_distribution(state: np.ndarray) -> np.ndarray:
    return np.abs(state) ** 2


def sample_counts(dist, n_shot: int, seed) -> np.ndarray:
    """Draw ``n_shot`` outcome indices from ``dist`` by inverse-CDF sampling.

    ``seed`` is an int or a ``numpy.random.Generator``.
    """
    dist = np.asarray(dist, dtype=float)
    if n_shot < 1:
        raise SimulationError("n_shot must be >= 1")
    if np.any(dist < -1e-12) or abs(dist.sum() - 1.0) > 1e-9:
        raise SimulationError("distribution must be non-negative and sum to 1")
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    cdf = np.cumsum(np.clip(dist, 0.0, None))
    return inverse_cdf(cdf[None, :], rng.random((1, n_shot)))[0]


def inverse_cdf(cdf: np.ndarray, u: np.ndarray) -> np.ndarray:
    """Row-wise inverse CDF: ``cdf`` is ``(B, N)``, ``u`` is ``(B, S)`` uniforms in [0, 1)."""
    rows, n = cdf.shape
    scaled = cdf / cdf[:, -1:]
    # offset row i into [i, i+1] so one sorted search covers every row
    offsets = np.arange(rows, dtype=float)[:, None]
    flat = (scaled + offsets).ravel()
    pos = np.searchsorted(flat, (u + offsets).ravel(), side="right").reshape(u.shape)
    return np.minimum(pos - offsets.astype(int) * n, n - 1)


def expectation_z_product(state: np.ndarray, qubits) -> float:
    """<Z_q1 Z_q2 ...> for the selected qubits."""
    n = n_qubits_of(state)
    qubits = list(qubits)
    if not qubits:
        raise SimulationError("empty qubit set")
    for q in qubits:
        _check_qubit(q, n)
    return float(np.real(z_signs(qubits, n) @ measure_distribution(state).T))


def z_signs(qubits, n: int) -> np.ndarray:
    idx = np.arange(1 << n)
    parity = np.zeros(1 << n, dtype=int)
    for q in qubits:
        parity ^= (idx >> (n - 1 - q)) & 1
    return 1.0 - 2.0 * parity
