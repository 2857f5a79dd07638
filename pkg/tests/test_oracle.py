import numpy as np
import pytest

from fbfep.core import ConjugateProx, ProxOracle, moreau_conjugate_prox
from fbfep.errors import NoUniqueSolutionError, ParameterError
from fbfep.inpainting import proj_unit_disks, psi_grad
from fbfep.oracle import finite_diff_grad, indicator_box, prox_optimality_check, solve_small_inclusion


class TestInclusion:
    def test_identity_unconstrained(self):
        assert np.allclose(solve_small_inclusion(([[1.0]], None)), [0.0])

    def test_singleton_constraint(self):
        assert solve_small_inclusion(([[1.0]], [-1.0]), None, ([[1.0]], [2.0]))[0] == pytest.approx(2.0)

    def test_two_dim_kkt(self):
        Q, S, K = np.diag([1.0, 2.0]), np.array([[0.0, 1.0], [-1.0, 0.0]]), np.array([[1.0, 1.0]])
        u, mult = solve_small_inclusion((Q, None), (S, None), (K, [1.0]), return_multiplier=True)
        assert np.linalg.norm((Q + S) @ u + K.T @ mult) <= 1e-10
        assert abs(K @ u - 1.0)[0] <= 1e-12
        # hand solution: u = (1/3, 2/3), multiplier -1
        assert np.allclose(u, [1 / 3, 2 / 3], atol=1e-14) and mult[0] == pytest.approx(-1.0)

    def test_box(self):
        u = solve_small_inclusion(([[1.0]], [-3.0]), box=(0.0, 1.0))
        assert u[0] == pytest.approx(1.0)
        u = solve_small_inclusion((np.eye(2), [-0.5, 2.0]), box=(-1.0, 1.0))
        assert np.allclose(u, [0.5, -1.0])

    def test_singular(self):
        with pytest.raises(NoUniqueSolutionError):
            solve_small_inclusion(([[0.0]], None))

    def test_too_large(self):
        with pytest.raises(ParameterError):
            solve_small_inclusion((np.eye(51), None))


class TestFiniteDiff:
    def test_quadratic(self):
        assert np.allclose(finite_diff_grad(lambda x: 0.5 * x @ x, np.array([3.0, -1.0]), 1e-5), [3, -1], atol=1e-6)

    def test_constant(self):
        assert np.allclose(finite_diff_grad(lambda x: 4.0, np.ones(3)), 0.0)

    def test_psi_grad(self):
        rng = np.random.default_rng(2)
        mask = rng.random(6) < 0.5
        b = np.where(mask, rng.random(6), 0.0)
        x = rng.random(6)
        f = lambda z: 0.5 * np.sum((np.where(mask, z, 0.0) - b) ** 2)  # noqa: E731
        assert np.allclose(finite_diff_grad(f, x), psi_grad(x, mask, b), atol=1e-6)


class TestProxCheck:
    def test_box_examples(self):
        f = indicator_box(0.0, 1.0)
        assert prox_optimality_check(f, np.array([2.0]), np.array([1.0]), 1.0)
        assert not prox_optimality_check(f, np.array([2.0]), np.array([0.5]), 1.0)

    def test_cross_norm_via_conjugate(self):
        # prox of gamma ||.||_x on a 2x2 field from the disk projection and the Moreau identity
        def fnorm(z):
            return float(np.sqrt(z[:4] ** 2 + z[4:] ** 2).sum())

        disk = ProxOracle(lambda g, z: np.concatenate(proj_unit_disks(z[:4].reshape(2, 2), z[4:].reshape(2, 2))).ravel())
        rng = np.random.default_rng(0)
        for _ in range(100):
            x = 2 * rng.standard_normal(8)
            gamma = rng.uniform(0.2, 2.0)
            p = moreau_conjugate_prox(disk, gamma, x)
            assert prox_optimality_check(fnorm, x, p, gamma, trials=20, radius=0.5)

    def test_conjugate_prox_of_box_is_consistent(self):
        box = ProxOracle(lambda g, z: np.clip(z, 0.0, 1.0))
        x = np.array([2.0, -1.0, 0.3])
        gamma = 0.7
        # Moreau: x = prox_{gamma f}(x) + gamma prox_{f*/gamma}(x / gamma)
        q = ConjugateProx(box).prox(1.0 / gamma, x / gamma)
        assert np.allclose(box.prox(gamma, x) + gamma * q, x, atol=1e-14)
