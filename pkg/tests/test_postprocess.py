import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from aae.encoding import extend_case2
from aae.postprocess import (
    AnsatzLoader,
    MatrixLoader,
    PostSelectionError,
    align_sign,
    amplification_operator,
    amplitude_amplify,
    good_branch,
    overlap,
    post_select,
    prepare_A,
)
from aae.simulator import AnsatzSpec, run_gates


def mixed_target(rng, n):
    d = rng.normal(size=1 << n)
    d[0], d[1] = abs(d[0]) + 0.1, -abs(d[1]) - 0.1
    return d / np.linalg.norm(d)


def run_ansatz_column(spec, theta, k):
    """Column k of the ansatz unitary."""
    e = np.zeros(1 << spec.n_qubits, complex)
    e[k] = 1
    return run_gates(e, list(spec.gates(theta)))


def perturbed(rng, psi, target_overlap):
    """Random perturbation of psi whose post-selected overlap first drops below the goal."""
    noise = rng.normal(size=psi.size)
    d = post_select(psi).data_state.real
    for eps in np.linspace(0, 2, 801):
        c = psi + eps * noise
        c = c / np.linalg.norm(c)
        if overlap(c, d) < target_overlap:
            return c
    return c


class TestPostSelect:
    def test_positive_first(self):
        res = post_select([0.6, 0, 0, 0.8])
        np.testing.assert_allclose(res.data_state, [0.6, -0.8], atol=1e-15)
        assert res.success_probability == pytest.approx(0.5, abs=1e-15)

    def test_negative_first(self):
        res = post_select(extend_case2([-0.6, 0.8]))
        np.testing.assert_allclose(align_sign(res.data_state, [-0.6, 0.8]), [-0.6, 0.8], atol=1e-15)
        assert res.success_probability == pytest.approx(0.5)

    def test_zero_state(self):
        res = post_select([1, 0, 0, 0])
        np.testing.assert_allclose(res.data_state, [1, 0])
        assert res.success_probability == pytest.approx(0.5)

    def test_empty_branch(self):
        # |+> on the ancilla maps to |0> under H
        with pytest.raises(PostSelectionError):
            post_select(np.array([1, 1, 0, 0]) / math.sqrt(2))

    def test_needs_data_qubit(self):
        with pytest.raises(PostSelectionError):
            post_select([1, 0])

    @settings(max_examples=40, deadline=None)
    @given(seed=st.integers(0, 2**32 - 1), n=st.integers(1, 4))
    def test_exact_injection(self, seed, n):
        d = mixed_target(np.random.default_rng(seed), n)
        res = post_select(extend_case2(d))
        assert abs(res.success_probability - 0.5) < 1e-12
        assert abs(np.linalg.norm(res.data_state) - 1) < 1e-10
        np.testing.assert_allclose(align_sign(res.data_state, d), d, atol=1e-10)


class TestOverlap:
    def test_exact_is_one(self, rng):
        d = mixed_target(rng, 3)
        assert overlap(extend_case2(d), d) == pytest.approx(1.0, abs=1e-12)

    def test_orthogonal_branch(self):
        # branch is (1, 0) after post-selection; target (0, 1)
        assert overlap([1, 0, 0, 0], [0, 1]) == pytest.approx(0, abs=1e-15)

    def test_empty_branch_gives_zero(self):
        assert overlap(np.array([1, 1, 0, 0]) / math.sqrt(2), [1, 0]) == 0.0

    def test_dimension_mismatch(self):
        with pytest.raises(PostSelectionError):
            overlap([1, 0, 0, 0], [1, 0, 0, 0])

    def test_global_sign_ignored(self, rng):
        d = mixed_target(rng, 2)
        assert overlap(-extend_case2(d), d) == pytest.approx(1.0)


class TestAlignSign:
    def test_flips(self):
        np.testing.assert_array_equal(align_sign(np.array([-0.6, 0.8]), [0.6, -0.8]), [0.6, -0.8])

    def test_keeps(self):
        np.testing.assert_array_equal(align_sign(np.array([0.6, -0.8]), [0.6, -0.8]), [0.6, -0.8])


class TestAmplification:
    def test_example_two_entries(self):
        d = np.array([0.6, -0.8])
        loader = MatrixLoader.preparing(extend_case2(d))
        before = prepare_A(loader)
        assert abs(before[3::4]).sum() > 0
        # amplitude cos(pi/3) on the |11> pair
        assert good_branch(before)[1] == pytest.approx(0.25, abs=1e-12)
        data, prob = good_branch(amplitude_amplify(loader))
        assert prob == pytest.approx(1.0, abs=1e-9)
        np.testing.assert_allclose(align_sign(data, d).real, d, atol=1e-9)

    @pytest.mark.parametrize("n", [1, 2, 3, 4])
    def test_exact_loaders_reach_one(self, rng, n):
        for _ in range(5):
            d = mixed_target(rng, n)
            data, prob = good_branch(amplitude_amplify(MatrixLoader.preparing(extend_case2(d))))
            assert abs(prob - 1) < 1e-9
            np.testing.assert_allclose(align_sign(data, d).real, d, atol=1e-9)

    def test_householder_loader_is_exact(self, rng):
        v = rng.normal(size=8)
        v /= np.linalg.norm(v)
        U = MatrixLoader.preparing(v).unitary
        np.testing.assert_allclose(U[:, 0], v, atol=1e-14)
        np.testing.assert_allclose(U @ U.conj().T, np.eye(8), atol=1e-13)

    def test_approximate_loader_matches_rotation_formula(self, rng):
        for _ in range(30):
            c = perturbed(rng, extend_case2(mixed_target(rng, 2)), 0.95)
            p = post_select(c).success_probability
            _, prob = good_branch(amplitude_amplify(MatrixLoader.preparing(c)))
            # one Grover round rotates the branch angle theta to 3 theta
            theta = math.asin(math.sqrt(p / 2))
            assert prob == pytest.approx(math.sin(3 * theta) ** 2, abs=1e-10)

    def test_approximate_loader_near_half_success(self, rng):
        seen = 0
        while seen < 20:
            c = perturbed(rng, extend_case2(mixed_target(rng, 3)), 0.95)
            if abs(post_select(c).success_probability - 0.5) > 0.1:
                continue
            seen += 1
            _, prob = good_branch(amplitude_amplify(MatrixLoader.preparing(c)))
            assert 0.9 <= prob <= 1 + 1e-12

    def test_ansatz_loader_matches_matrix_loader(self, rng):
        spec = AnsatzSpec.all_y(3, 2)
        theta = rng.uniform(0, 2 * math.pi, spec.n_params)
        U = np.stack([run_ansatz_column(spec, theta, k) for k in range(8)], axis=1)
        a = amplitude_amplify((spec, theta))
        b = amplitude_amplify(MatrixLoader(U))
        np.testing.assert_allclose(a, b, atol=1e-12)

    @settings(max_examples=20, deadline=None)
    @given(seed=st.integers(0, 2**32 - 1))
    def test_q_then_inverse_is_identity(self, seed):
        rng = np.random.default_rng(seed)
        spec = AnsatzSpec.all_y(3, 2)
        loader = AnsatzLoader(spec, rng.uniform(0, 2 * math.pi, spec.n_params))
        s = rng.normal(size=32) + 1j * rng.normal(size=32)
        s /= np.linalg.norm(s)
        out = amplification_operator(loader, s)
        assert abs(np.linalg.norm(out) - 1) < 1e-10
        back = amplification_operator(loader, out, inverse=True)
        np.testing.assert_allclose(back, s, atol=1e-10)

    def test_empty_good_branch(self):
        with pytest.raises(PostSelectionError):
            good_branch([1, 0, 0, 0])

