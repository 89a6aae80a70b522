"""MMD-based training of amplitude-encoding circuits.

The loader is trained so that its output distribution matches the target
both in the computational basis and after a Hadamard on every qubit.  The
cost is ``L = (L1 + L2) / 2`` with ``L1 = MMD(q, p)`` and
``L2 = MMD(q^H, p^H)``.  Gradients come from the parameter-shift rule and
are either computed from exact probabilities or estimated from shots.
"""
from __future__ import annotations

import logging
import math
import time
from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np

from .encoding import TargetEncoding, fwht
from .simulator import AnsatzSpec, check_params, inverse_cdf, run_ansatz_batch

log = logging.getLogger(__name__)

SHIFT = math.pi / 2


class TrainingError(ValueError):
    pass


@dataclass(frozen=True)
class KernelConfig:
    """Gaussian kernel ``scale * exp(-(j-k)^2 / (2 sigma_sq))`` on basis indices."""

    sigma_sq: float = 0.125
    scale: float = 1.0

    def __post_init__(self):
        if self.sigma_sq <= 0 or self.scale <= 0:
            raise TrainingError("kernel needs sigma_sq > 0 and scale > 0")

    def matrix(self, dim: int) -> np.ndarray:
        idx = np.arange(dim)
        return kernel(idx[:, None], idx[None, :], self)


@dataclass(frozen=True)
class TrainConfig:
    n_shot: int = 400
    iterations: int = 200
    # (first iteration NOT covered, lr); None means "until the end"
    lr_schedule: tuple = ((100, 0.1), (None, 0.01))
    betas: tuple[float, float] = (0.9, 0.999)
    eps: float = 1e-8
    n_trials: int = 10
    checkpoint_iterations: tuple[int, ...] = ()
    seed: int = 0
    gradient_mode: str = "sampled"
    objective: str = "aae"

    def __post_init__(self):
        if self.n_shot < 1 or self.iterations < 0 or self.n_trials < 1:
            raise TrainingError("need n_shot >= 1, iterations >= 0, n_trials >= 1")
        if any(lr <= 0 for _, lr in self.lr_schedule):
            raise TrainingError("learning rates must be positive")
        if self.gradient_mode not in ("sampled", "exact"):
            raise TrainingError(f"unknown gradient mode {self.gradient_mode!r}")
        if self.objective not in OBJECTIVES:
            raise TrainingError(f"unknown objective {self.objective!r}")

    def lr_at(self, iteration: int) -> float:
        for until, lr in self.lr_schedule:
            if until is None or iteration < until:
                return lr
        return self.lr_schedule[-1][1]

    def to_dict(self) -> dict:
        return {
            "n_shot": self.n_shot,
            "iterations": self.iterations,
            "lr_schedule": [list(x) for x in self.lr_schedule],
            "betas": list(self.betas),
            "eps": self.eps,
            "n_trials": self.n_trials,
            "checkpoint_iterations": list(self.checkpoint_iterations),
            "seed": self.seed,
            "gradient_mode": self.gradient_mode,
            "objective": self.objective,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "TrainConfig":
        d = dict(d)
        d["lr_schedule"] = tuple(tuple(x) for x in d["lr_schedule"])
        d["betas"] = tuple(d["betas"])
        d["checkpoint_iterations"] = tuple(d["checkpoint_iterations"])
        return cls(**d)


# weights of (L1, L2) in the trained cost; "naive" ignores signs entirely
OBJECTIVES = {"aae": (0.5, 0.5), "naive": (1.0, 0.0)}


def kernel(j, k, cfg: KernelConfig):
    diff = np.asarray(j, dtype=float) - np.asarray(k, dtype=float)
    return cfg.scale * np.exp(-(diff**2) / (2.0 * cfg.sigma_sq))


def _check_dist(x, name: str) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if abs(x.sum() - 1.0) > 1e-9:
        raise TrainingError(f"{name} does not sum to 1")
    return x


def mmd_exact(q, p, cfg: KernelConfig) -> float:
    q = _check_dist(q, "q")
    p = _check_dist(p, "p")
    if q.shape != p.shape:
        raise TrainingError(f"length mismatch {q.shape} vs {p.shape}")
    diff = q - p
    return float(max(diff @ cfg.matrix(q.size) @ diff, 0.0))


def _two_streams(samples, name: str) -> tuple[np.ndarray, np.ndarray]:
    s = np.asarray(samples)
    if s.ndim == 2 and s.shape[0] == 2:
        a, b = s[0], s[1]
    else:
        s = s.ravel()
        if s.size == 0:
            raise TrainingError(f"{name} is empty")
        if s.size == 1:
            return s, s
        half = s.size // 2
        a, b = s[:half], s[half : 2 * half]
    if a.size == 0 or b.size == 0:
        raise TrainingError(f"{name} is empty")
    return a, b


def _paired_mean(a, b, cfg: KernelConfig) -> float:
    m = min(len(a), len(b))
    return float(np.mean(kernel(a[:m], b[:m], cfg)))


def mmd_sampled(samples_q, samples_p, cfg: KernelConfig) -> float:
    """Shot estimate of the MMD from paired kernel averages.

    Each argument is either two independent sample streams (shape ``(2, S)``)
    or one stream, which is split into halves to get the two.
    """
    q1, q2 = _two_streams(samples_q, "samples_q")
    p1, p2 = _two_streams(samples_p, "samples_p")
    e_qq = _paired_mean(q1, q2, cfg)
    e_pp = _paired_mean(p1, p2, cfg)
    e_qp = 0.5 * (_paired_mean(q1, p1, cfg) + _paired_mean(q2, p2, cfg))
    return e_qq - 2.0 * e_qp + e_pp


def shifted_params(params, r: int, sign: int) -> np.ndarray:
    params = np.asarray(params, dtype=float)
    if not 0 <= r < params.size:
        raise TrainingError(f"parameter index {r} out of range for {params.size} parameters")
    if sign not in (1, -1):
        raise TrainingError("sign must be +1 or -1")
    out = params.copy()
    out[r] += sign * SHIFT
    return out


def shift_batch(params: np.ndarray) -> np.ndarray:
    """Rows: params, then params with +pi/2 on each index, then -pi/2 on each."""
    eye = np.eye(params.size) * SHIFT
    return np.vstack([params[None, :], params + eye, params - eye])


def model_distributions(spec: AnsatzSpec, param_rows: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    states = run_ansatz_batch(spec, param_rows)
    return np.abs(states) ** 2, np.abs(fwht(states)) ** 2


def _check_dims(spec: AnsatzSpec, enc: TargetEncoding) -> None:
    if spec.n_qubits != enc.n_qubits:
        raise TrainingError(
            f"ansatz has {spec.n_qubits} qubits but the target needs {enc.n_qubits}"
        )


def cost_terms(q, q_h, enc: TargetEncoding, kernel_cfg: KernelConfig, objective: str = "aae"):
    """Exact (L, L1, L2) for the given model distributions."""
    w1, w2 = OBJECTIVES[objective]
    l1 = mmd_exact(q, enc.p, kernel_cfg)
    l2 = mmd_exact(q_h, enc.p_hadamard, kernel_cfg)
    return w1 * l1 + w2 * l2, l1, l2


def aae_cost(spec: AnsatzSpec, params, enc: TargetEncoding, kernel_cfg: KernelConfig,
             objective: str = "aae") -> tuple[float, float, float]:
    _check_dims(spec, enc)
    q, q_h = model_distributions(spec, np.atleast_2d(check_params(spec, params)))
    return cost_terms(q[0], q_h[0], enc, kernel_cfg, objective)


def _exact_gradient(dists, enc, kernel_cfg, weights) -> np.ndarray:
    (q, q_h), R = dists, (dists[0].shape[0] - 1) // 2
    K = kernel_cfg.matrix(q.shape[1])
    grad = np.zeros(R)
    for w, probs, target in ((weights[0], q, enc.p), (weights[1], q_h, enc.p_hadamard)):
        if w == 0.0:
            continue
        dq = probs[1 : R + 1] - probs[R + 1 :]
        # d/dtheta_r MMD(q, p) = (q+ - q-) K (q - p)
        grad += w * (dq @ K @ (probs[0] - target))
    return grad


def _sampled_gradient(dists, enc, kernel_cfg, weights, n_shot, rng) -> np.ndarray:
    (q, q_h), R = dists, (dists[0].shape[0] - 1) // 2
    K = kernel_cfg.matrix(q.shape[1])
    grad = np.zeros(R)
    for w, probs, target in ((weights[0], q, enc.p), (weights[1], q_h, enc.p_hadamard)):
        if w == 0.0:
            continue
        plus, minus = probs[1 : R + 1], probs[R + 1 :]
        base = np.broadcast_to(probs[0], plus.shape)
        tgt = np.broadcast_to(target, plus.shape)
        # four expectation terms, each with its own fresh pair of sample streams
        first = np.cumsum(np.concatenate([plus, minus, plus, minus]), axis=1)
        second = np.cumsum(np.concatenate([base, base, tgt, tgt]), axis=1)
        j = inverse_cdf(first, rng.random((4 * R, n_shot)))
        k = inverse_cdf(second, rng.random((4 * R, n_shot)))
        e = K[j, k].mean(axis=1).reshape(4, R)
        # E[q+, q] - E[q-, q] - E[q+, p] + E[q-, p]
        grad += w * (e[0] - e[1] - e[2] + e[3])
    return grad


def mmd_gradient(spec: AnsatzSpec, params, enc: TargetEncoding, cfg: TrainConfig,
                 kernel_cfg: KernelConfig, mode: str | None = None,
                 rng: np.random.Generator | None = None) -> np.ndarray:
    """Parameter-shift gradient of the training cost.

    ``mode`` defaults to ``cfg.gradient_mode``.  In sampled mode every
    expectation term draws ``cfg.n_shot`` fresh samples per factor; ``rng``
    defaults to a generator seeded with ``cfg.seed``.
    """
    _check_dims(spec, enc)
    params = check_params(spec, params)
    mode = mode or cfg.gradient_mode
    dists = model_distributions(spec, shift_batch(params))
    weights = OBJECTIVES[cfg.objective]
    if mode == "exact":
        return _exact_gradient(dists, enc, kernel_cfg, weights)
    if mode == "sampled":
        rng = rng if rng is not None else np.random.default_rng(cfg.seed)
        return _sampled_gradient(dists, enc, kernel_cfg, weights, cfg.n_shot, rng)
    raise TrainingError(f"unknown gradient mode {mode!r}")


@dataclass
class AdamState:
    m: np.ndarray
    v: np.ndarray
    t: int = 0

    @classmethod
    def zeros(cls, size: int) -> "AdamState":
        return cls(np.zeros(size), np.zeros(size), 0)


def adam_step(params, grad, state: AdamState, lr: float,
              betas: tuple[float, float] = (0.9, 0.999), eps: float = 1e-8):
    """One bias-corrected Adam update; returns ``(new_params, new_state)``."""
    params = np.asarray(params, dtype=float)
    grad = np.asarray(grad, dtype=float)
    if params.shape != grad.shape or state.m.shape != params.shape:
        raise TrainingError("params, gradient and optimizer state shapes differ")
    b1, b2 = betas
    t = state.t + 1
    m = b1 * state.m + (1 - b1) * grad
    v = b2 * state.v + (1 - b2) * grad * grad
    m_hat = m / (1 - b1**t)
    v_hat = v / (1 - b2**t)
    return params - lr * m_hat / (np.sqrt(v_hat) + eps), AdamState(m, v, t)


@dataclass
class TrainRecord:
    spec: AnsatzSpec
    costs: np.ndarray  # (iterations + 1, 3) rows of (L, L1, L2); row i is after i updates
    params: np.ndarray
    initial_params: np.ndarray
    checkpoints: dict[int, np.ndarray] = field(default_factory=dict)
    seed: int = 0
    trial: int = 0
    duration: float = 0.0
    objective: str = "aae"
    selected_iteration: int | None = None
    config: dict = field(default_factory=dict)

    @property
    def final_iteration(self) -> int:
        return len(self.costs) - 1

    @property
    def iteration(self) -> int:
        """Iteration whose parameters this record currently stands for."""
        return self.final_iteration if self.selected_iteration is None else self.selected_iteration

    @property
    def best_params(self) -> np.ndarray:
        if self.iteration == self.final_iteration:
            return self.params
        return self.checkpoints[self.iteration]

    def cost_at(self, iteration: int | None = None) -> tuple[float, float, float]:
        row = self.costs[self.iteration if iteration is None else iteration]
        return float(row[0]), float(row[1]), float(row[2])

    def to_dict(self, include_timing: bool = True) -> dict:
        d = {
            "spec": self.spec.to_dict(),
            "objective": self.objective,
            "seed": self.seed,
            "trial": self.trial,
            "selected_iteration": self.iteration,
            "costs": self.costs.tolist(),
            "initial_params": self.initial_params.tolist(),
            "params": self.params.tolist(),
            "checkpoints": {str(k): v.tolist() for k, v in sorted(self.checkpoints.items())},
            "config": self.config,
        }
        if include_timing:
            d["duration_s"] = self.duration
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "TrainRecord":
        costs = np.asarray(d["costs"], dtype=float).reshape(-1, 3)
        rec = cls(
            spec=AnsatzSpec.from_dict(d["spec"]),
            costs=costs,
            params=np.asarray(d["params"], dtype=float),
            initial_params=np.asarray(d["initial_params"], dtype=float),
            checkpoints={int(k): np.asarray(v, dtype=float) for k, v in d["checkpoints"].items()},
            seed=int(d["seed"]),
            trial=int(d["trial"]),
            duration=float(d.get("duration_s", 0.0)),
            objective=d.get("objective", "aae"),
            config=d.get("config", {}),
        )
        sel = d.get("selected_iteration")
        if sel is not None and sel != rec.final_iteration:
            rec.selected_iteration = int(sel)
        return rec


def trial_rng(seed: int, trial: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(trial,)))


def train_encoder(enc: TargetEncoding, spec: AnsatzSpec, cfg: TrainConfig,
                  kernel_cfg: KernelConfig, trial: int = 0) -> TrainRecord:
    """Adam on the parameter-shift gradient from uniform random angles in [0, 2pi).

    The cost logged each iteration is always the exact one, whatever the
    gradient mode.  Trial ``t`` draws from its own stream spawned off ``cfg.seed``.
    """
    _check_dims(spec, enc)
    started = time.perf_counter()
    rng = trial_rng(cfg.seed, trial)
    params = rng.uniform(0.0, 2.0 * math.pi, size=spec.n_params)
    initial = params.copy()
    weights = OBJECTIVES[cfg.objective]
    K_check = set(cfg.checkpoint_iterations)
    state = AdamState.zeros(spec.n_params)
    costs = []
    checkpoints = {}
    for it in range(cfg.iterations + 1):
        dists = model_distributions(spec, shift_batch(params))
        costs.append(cost_terms(dists[0][0], dists[1][0], enc, kernel_cfg, cfg.objective))
        if it in K_check:
            checkpoints[it] = params.copy()
        if it == cfg.iterations:
            break
        if cfg.gradient_mode == "exact":
            grad = _exact_gradient(dists, enc, kernel_cfg, weights)
        else:
            grad = _sampled_gradient(dists, enc, kernel_cfg, weights, cfg.n_shot, rng)
        params, state = adam_step(params, grad, state, cfg.lr_at(it), cfg.betas, cfg.eps)
    duration = time.perf_counter() - started
    log.debug("trial %d: L=%.5f after %d iterations (%.1fs)", trial, costs[-1][0], cfg.iterations, duration)
    return TrainRecord(
        spec=spec,
        costs=np.asarray(costs, dtype=float),
        params=params,
        initial_params=initial,
        checkpoints=checkpoints,
        seed=cfg.seed,
        trial=trial,
        duration=duration,
        objective=cfg.objective,
        config=cfg.to_dict(),
    )


def train_trials(enc: TargetEncoding, spec: AnsatzSpec, cfg: TrainConfig,
                 kernel_cfg: KernelConfig) -> list[TrainRecord]:
    return [train_encoder(enc, spec, cfg, kernel_cfg, trial=t) for t in range(cfg.n_trials)]


def select_best_trial(records: Sequence[TrainRecord]) -> TrainRecord:
    """Record (pinned to its best saved iteration) with the smallest exact L."""
    if not records:
        raise TrainingError("no training records to select from")
    best, best_cost = None, math.inf
    for rec in records:
        candidates = sorted(set(rec.checkpoints) | {rec.final_iteration})
        for it in candidates:
            cost = rec.costs[it][0]
            if cost < best_cost:
                best, best_cost = (rec, it), cost
    rec, it = best
    return replace(rec, selected_iteration=None if it == rec.final_iteration else it)
