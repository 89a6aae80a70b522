"""Variational Schmidt decomposition and the entropy readout.

A pair of ansatz blocks, one on the stock register and one on the time
register, is trained so that measuring both registers gives perfectly
correlated bit strings.  The squared amplitudes on the correlated basis
states are then the eigenvalues of the reduced stock density matrix.

When the registers differ in size, qubit ``q`` of the smaller register is
paired with qubit ``q`` of the larger one and the larger register's
remaining (least significant) qubits are pushed to |0>.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .mmd_train import AdamState, adam_step, shift_batch
from .simulator import AnsatzSpec, n_qubits_of, run_layers_batch, z_signs


class QSVDError(ValueError):
    pass


@dataclass
class SvdAnsatzPair:
    stock_spec: AnsatzSpec
    time_spec: AnsatzSpec
    stock_params: np.ndarray
    time_params: np.ndarray

    def __post_init__(self):
        self.stock_params = np.asarray(self.stock_params, dtype=float)
        self.time_params = np.asarray(self.time_params, dtype=float)
        if self.stock_params.shape != (self.stock_spec.n_params,) or self.time_params.shape != (
            self.time_spec.n_params,
        ):
            raise QSVDError("parameter vectors do not match the ansatz pair")

    @property
    def n_s(self) -> int:
        return self.stock_spec.n_qubits

    @property
    def n_t(self) -> int:
        return self.time_spec.n_qubits

    @property
    def params(self) -> np.ndarray:
        return np.concatenate([self.stock_params, self.time_params])

    def with_params(self, params) -> "SvdAnsatzPair":
        k = self.stock_spec.n_params
        return SvdAnsatzPair(self.stock_spec, self.time_spec, params[:k], params[k:])

    def blocks(self):
        return [(self.stock_spec, 0), (self.time_spec, self.n_s)]

    @classmethod
    def random(cls, n_s: int, n_t: int, n_layers: int, rng: np.random.Generator,
               time_layers: int | None = None) -> "SvdAnsatzPair":
        """Random rotation axes (fixed for the pair's lifetime) and angles in [0, 2pi)."""
        stock = AnsatzSpec.random_axes(n_s, n_layers, rng)
        time = AnsatzSpec.random_axes(n_t, n_layers if time_layers is None else time_layers, rng)
        return cls(stock, time,
                   rng.uniform(0, 2 * math.pi, stock.n_params),
                   rng.uniform(0, 2 * math.pi, time.n_params))

    def to_dict(self) -> dict:
        return {
            "stock_spec": self.stock_spec.to_dict(),
            "time_spec": self.time_spec.to_dict(),
            "stock_params": self.stock_params.tolist(),
            "time_params": self.time_params.tolist(),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "SvdAnsatzPair":
        return cls(AnsatzSpec.from_dict(d["stock_spec"]), AnsatzSpec.from_dict(d["time_spec"]),
                   d["stock_params"], d["time_params"])


def _check_sizes(state: np.ndarray, n_s: int, n_t: int) -> None:
    if n_s < 1 or n_t < 1 or n_qubits_of(state) != n_s + n_t:
        raise QSVDError(
            f"register sizes {n_s}+{n_t} do not match a {n_qubits_of(state)}-qubit state"
        )


def cost_observable(n_s: int, n_t: int) -> np.ndarray:
    """Diagonal of the Hamming-distance cost operator in the computational basis."""
    n = n_s + n_t
    m = min(n_s, n_t)
    obs = np.zeros(1 << n)
    for q in range(m):
        obs += (1 - z_signs([q, n_s + q], n)) / 2
    surplus = range(m, n_s) if n_s > n_t else range(n_s + m, n)
    for q in surplus:
        obs += (1 - z_signs([q], n)) / 2
    return obs


def svd_cost(state, n_s: int, n_t: int) -> float:
    state = np.asarray(state)
    _check_sizes(state, n_s, n_t)
    return float(np.abs(state) ** 2 @ cost_observable(n_s, n_t))


def paired_indices(n_s: int, n_t: int) -> np.ndarray:
    m = min(n_s, n_t)
    k = np.arange(1 << m)
    return ((k << (n_s - m)) << n_t) | (k << (n_t - m))


def apply_pair(data_state, pair: SvdAnsatzPair, param_rows=None) -> np.ndarray:
    """(U_stock (x) U_time) |data>; batched over ``param_rows`` when given."""
    data_state = np.asarray(data_state, dtype=complex)
    _check_sizes(data_state, pair.n_s, pair.n_t)
    rows = pair.params[None, :] if param_rows is None else np.atleast_2d(param_rows)
    states = np.repeat(data_state[None, :], rows.shape[0], axis=0)
    out = run_layers_batch(states, pair.blocks(), rows)
    return out[0] if param_rows is None else out


def _costs(probs, obs, rng, shots):
    if shots is None:
        return probs @ obs
    # shot estimate: average the observable over sampled basis states
    counts = np.array([rng.multinomial(shots, p / p.sum()) for p in probs])
    return counts @ obs / shots


def svd_gradient(data_state, pair: SvdAnsatzPair, shots: int | None = None,
                 rng: np.random.Generator | None = None) -> tuple[float, np.ndarray]:
    """Cost and its parameter-shift gradient (exact unless ``shots`` is given)."""
    obs = cost_observable(pair.n_s, pair.n_t)
    states = apply_pair(data_state, pair, shift_batch(pair.params))
    costs = _costs(np.abs(states) ** 2, obs, rng, shots)
    R = pair.params.size
    return float(costs[0]), (costs[1 : R + 1] - costs[R + 1 :]) / 2


@dataclass
class QSVDResult:
    pair: SvdAnsatzPair
    history: np.ndarray  # exact cost before each update, plus the final cost
    config: dict = field(default_factory=dict)

    @property
    def final_cost(self) -> float:
        return float(self.history[-1])

    def to_dict(self) -> dict:
        return {"pair": self.pair.to_dict(), "history": self.history.tolist(), "config": self.config}

    @classmethod
    def from_dict(cls, d: dict) -> "QSVDResult":
        return cls(SvdAnsatzPair.from_dict(d["pair"]), np.asarray(d["history"], dtype=float),
                   d.get("config", {}))


def train_qsvd(data_state, pair: SvdAnsatzPair, iterations: int = 500, lr: float = 0.01,
               seed: int = 0, shots: int | None = None) -> QSVDResult:
    """Adam on the Hamming-distance cost, exact parameter-shift gradients by default.

    ``seed`` only matters in shot mode.
    """
    data_state = np.asarray(data_state, dtype=complex)
    _check_sizes(data_state, pair.n_s, pair.n_t)
    rng = np.random.default_rng(seed)
    obs = cost_observable(pair.n_s, pair.n_t)
    params = pair.params.copy()
    state = AdamState.zeros(params.size)
    history = []
    for _ in range(iterations):
        cost, grad = svd_gradient(data_state, pair.with_params(params), shots, rng)
        if shots is not None:
            cost = float(np.abs(apply_pair(data_state, pair.with_params(params))) ** 2 @ obs)
        history.append(cost)
        params, state = adam_step(params, grad, state, lr)
    trained = pair.with_params(params)
    history.append(svd_cost(apply_pair(data_state, trained), pair.n_s, pair.n_t))
    config = {"iterations": iterations, "lr": lr, "seed": seed, "shots": shots}
    return QSVDResult(trained, np.asarray(history), config)


@dataclass
class SchmidtSpectrum:
    probabilities: np.ndarray  # kept |c_m|^2, not renormalized
    residual: float  # probability mass not kept

    @property
    def kept_mass(self) -> float:
        return float(self.probabilities.sum())

    def normalized(self) -> np.ndarray:
        return self.probabilities / self.probabilities.sum()


def extract_schmidt_spectrum(state, n_s: int, n_t: int, threshold: float = 1e-4,
                             min_mass: float = 0.5) -> SchmidtSpectrum:
    """Probabilities on the correlated basis states |m>|m>, dropping those below ``threshold``."""
    state = np.asarray(state)
    _check_sizes(state, n_s, n_t)
    probs = np.abs(state[paired_indices(n_s, n_t)]) ** 2
    kept = probs[probs >= threshold]
    if kept.sum() < min_mass:
        raise QSVDError(f"only {kept.sum():.3f} of the probability is on correlated states")
    total = float(np.sum(np.abs(state) ** 2))
    return SchmidtSpectrum(kept, max(0.0, total - float(kept.sum())))


def svd_entropy(spectrum) -> float:
    lam = np.asarray(spectrum, dtype=float)
    if np.any(lam < -1e-12):
        raise QSVDError("spectrum has negative entries")
    if abs(lam.sum() - 1.0) > 1e-9:
        raise QSVDError("spectrum does not sum to 1")
    lam = lam[lam > 0]
    return float(-np.sum(lam * np.log(lam))) + 0.0  # no negative zero
