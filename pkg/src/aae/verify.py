"""Self-checks against independent oracles, used by ``aae verify``.

Each suite returns a :class:`CheckResult`; none of them touch the network
or the filesystem.
"""
from __future__ import annotations

import itertools
import math
import time
from dataclasses import dataclass

import numpy as np

from .encoding import TargetEncoding, extend_case2, fwht
from .mmd_train import KernelConfig, TrainConfig, aae_cost, mmd_exact, mmd_gradient
from .postprocess import MatrixLoader, align_sign, amplitude_amplify, good_branch, post_select
from .qsvd import SvdAnsatzPair, apply_pair, svd_cost, svd_gradient
from .simulator import AnsatzSpec


@dataclass
class CheckResult:
    name: str
    passed: bool
    detail: str
    seconds: float = 0.0


def sylvester_hadamard(n_qubits: int) -> np.ndarray:
    """Dense normalized H^(x)n by repeated Kronecker products."""
    h = np.array([[1.0, 1.0], [1.0, -1.0]]) / math.sqrt(2)
    out = np.ones((1, 1))
    for _ in range(n_qubits):
        out = np.kron(out, h)
    return out


def _timed(name, fn, *args):
    t0 = time.perf_counter()
    passed, detail = fn(*args)
    return CheckResult(name, bool(passed), detail, time.perf_counter() - t0)


def _fwht(rng, n_vectors):
    ks = rng.integers(1, 13, n_vectors)
    worst_fwd = worst_inv = 0.0
    for k in np.unique(ks):
        count = int(np.sum(ks == k))
        v = rng.normal(size=(count, 1 << int(k)))
        fast = fwht(v, axis=1)
        dense = v @ sylvester_hadamard(int(k)).T
        worst_fwd = max(worst_fwd, float(np.max(np.abs(fast - dense))))
        worst_inv = max(worst_inv, float(np.max(np.abs(fwht(fast, axis=1) - v))))
    ok = worst_fwd <= 1e-12 and worst_inv <= 1e-12
    return ok, f"{n_vectors} vectors, max |fast-dense| {worst_fwd:.1e}, max |inverse error| {worst_inv:.1e}"


def _central_difference(f, x, h=1e-5):
    g = np.zeros_like(x)
    for r in range(x.size):
        e = np.zeros_like(x)
        e[r] = h
        g[r] = (f(x + e) - f(x - e)) / (2 * h)
    return g


def _gradients(rng, n_configs):
    kernel = KernelConfig()
    worst_mmd = worst_svd = 0.0
    for i in range(n_configs):
        # MMD gradient on a 2-3 qubit model, alternating the two objectives
        n = int(rng.integers(2, 4))
        enc = TargetEncoding.from_raw(rng.normal(size=1 << (n - 1)) if i % 2 else rng.random(1 << n))
        spec = AnsatzSpec(enc.n_qubits, 2, tuple(rng.choice(["x", "y", "z"], 2 * enc.n_qubits)))
        theta = rng.uniform(0, 2 * math.pi, spec.n_params)
        objective = "aae" if i % 3 else "naive"
        grad = mmd_gradient(spec, theta, enc, TrainConfig(objective=objective), kernel, mode="exact")
        fd = _central_difference(lambda t: aae_cost(spec, t, enc, kernel, objective)[0], theta)
        worst_mmd = max(worst_mmd, float(np.max(np.abs(grad - fd))))

        # qSVD cost gradient on a 1+1 .. 2+1 register split
        n_s = int(rng.integers(1, 3))
        n_t = int(rng.integers(1, 4 - n_s))
        pair = SvdAnsatzPair.random(n_s, n_t, 2, rng)
        s = rng.normal(size=1 << (n_s + n_t)) + 1j * rng.normal(size=1 << (n_s + n_t))
        s /= np.linalg.norm(s)
        _, g = svd_gradient(s, pair)
        fd = _central_difference(
            lambda p: svd_cost(apply_pair(s, pair.with_params(p)), n_s, n_t), pair.params
        )
        worst_svd = max(worst_svd, float(np.max(np.abs(g - fd))))
    ok = worst_mmd < 1e-6 and worst_svd < 1e-6
    return ok, f"{n_configs} configs, max error MMD {worst_mmd:.1e}, qSVD {worst_svd:.1e}"


def _theorem1(rng, n_vectors):
    """Among all sign patterns with |a| = |d|, only +-d match both distributions."""
    kernel = KernelConfig()
    checked = 0
    smallest_gap = math.inf
    for i in range(n_vectors):
        n = 4 if i % 2 == 0 else 8
        d = rng.uniform(0.05, 1.0, n)
        d /= np.linalg.norm(d)
        p, ph = d**2, fwht(d) ** 2
        for signs in itertools.product((1.0, -1.0), repeat=n):
            a = np.asarray(signs) * d
            if mmd_exact(a**2, p, kernel) > 1e-12:
                return False, "squared amplitudes differ for a sign pattern"
            mismatch = float(np.max(np.abs(fwht(a) ** 2 - ph)))
            is_pm_d = np.all(a == d) or np.all(a == -d)
            if is_pm_d and mismatch > 1e-12:
                return False, "+-d fails the Hadamard-basis condition"
            if not is_pm_d:
                if mismatch <= 1e-10:
                    return False, f"pattern {signs} is indistinguishable from d"
                smallest_gap = min(smallest_gap, mismatch)
            checked += 1
    return True, f"{checked} sign patterns, smallest p^H mismatch {smallest_gap:.2e}"


def _random_mixed(rng, n):
    d = rng.normal(size=1 << n)
    d[0], d[-1] = abs(d[0]) + 0.1, -abs(d[-1]) - 0.1
    return d / np.linalg.norm(d)


def _postselect(rng, n_targets):
    worst_p = worst_d = 0.0
    for _ in range(n_targets):
        d = _random_mixed(rng, int(rng.integers(1, 4)))
        res = post_select(extend_case2(d))
        worst_p = max(worst_p, abs(res.success_probability - 0.5))
        worst_d = max(worst_d, float(np.max(np.abs(align_sign(res.data_state, d) - d))))
    ok = worst_p <= 1e-12 and worst_d <= 1e-10
    return ok, f"{n_targets} targets, max |p-1/2| {worst_p:.1e}, max |d error| {worst_d:.1e}"


def _amplify(rng, n_targets):
    worst = 0.0
    for _ in range(n_targets):
        d = _random_mixed(rng, int(rng.integers(1, 4)))
        _, prob = good_branch(amplitude_amplify(MatrixLoader.preparing(extend_case2(d))))
        worst = max(worst, abs(prob - 1))
    return worst <= 1e-9, f"{n_targets} exact loaders, max |P(11)-1| {worst:.1e}"


SUITES = ("fwht", "gradients", "theorem1", "postselect", "amplify")


def run_suites(seed: int = 0, names=SUITES, fwht_vectors: int = 1000,
               gradient_configs: int = 50) -> list[CheckResult]:
    rng = np.random.default_rng(seed)
    table = {
        "fwht": (_fwht, fwht_vectors),
        "gradients": (_gradients, gradient_configs),
        "theorem1": (_theorem1, 20),
        "postselect": (_postselect, 10),
        "amplify": (_amplify, 10),
    }
    return [_timed(name, table[name][0], rng, table[name][1]) for name in names]
