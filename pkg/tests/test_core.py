import math
import threading

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from fbfep.core import (
    ConjugateProx,
    CountedOp,
    LinearMap,
    LipschitzOp,
    ProxOracle,
    abs_prox,
    box_prox,
    linear_resolvent,
    moreau_conjugate_prox,
    op_norm_estimate,
    proj_affine,
    prox_box,
    sqnorm_prox,
    wrap_counted,
)
from fbfep.errors import DimensionError, InfeasibleError, ParameterError
from fbfep.inpainting import gradient_map

finite = st.floats(-50, 50, allow_nan=False)


def vec(n):
    return arrays(np.float64, n, elements=finite)


class TestOpNorm:
    def test_identity(self):
        assert op_norm_estimate(LinearMap.identity(3)) == pytest.approx(1.0, abs=1e-8)

    def test_diagonal(self):
        assert op_norm_estimate(LinearMap.from_matrix(np.diag([3.0, 1.0]))) == pytest.approx(3.0, abs=1e-6)

    def test_gradient_4x4_matches_svd(self):
        L = gradient_map(4, 4)
        assert L.matrix().shape == (32, 16)
        exact = np.linalg.svd(L.matrix(), compute_uv=False)[0]
        est = op_norm_estimate(L)
        assert 0 < est < math.sqrt(8)
        assert est == pytest.approx(exact, abs=1e-6)

    def test_zero_map(self):
        Z = LinearMap.from_matrix(np.zeros((2, 3)))
        assert op_norm_estimate(Z) == 0.0

    def test_malformed_map(self):
        bad = LinearMap(lambda x: np.zeros(5), lambda y: np.zeros(3), 3, 2)
        with pytest.raises(DimensionError):
            op_norm_estimate(bad)

    def test_deterministic(self):
        L = gradient_map(5, 3)
        assert op_norm_estimate(L, seed=4) == op_norm_estimate(L, seed=4)

    def test_bad_arguments(self):
        with pytest.raises(ParameterError):
            op_norm_estimate(LinearMap.identity(2), max_iters=0)
        with pytest.raises(ParameterError):
            op_norm_estimate(LinearMap.identity(2), tol=0)

    @settings(max_examples=30, deadline=None)
    @given(arrays(np.float64, (4, 3), elements=st.floats(-5, 5)))
    def test_bracket_on_random_matrices(self, M):
        true = np.linalg.norm(M, 2)
        est = op_norm_estimate(LinearMap(lambda x: M @ x, lambda y: M.T @ y, 3, 4), tol=1e-12, max_iters=5000)
        assert est <= true * (1 + 1e-9) + 1e-12
        # power iteration can stall on near-degenerate top singular values; the estimate stays a lower bound

    def test_lazy_norm_bound_has_safety_factor(self):
        M = np.diag([2.0, 1.0])
        L = LinearMap(lambda x: M @ x, lambda y: M @ y, 2, 2)
        assert L.norm_bound == pytest.approx(2.0 * 1.0001, rel=1e-8)


class TestLinearMap:
    def test_adjoint_identity_on_shipped_maps(self):
        rng = np.random.default_rng(0)
        maps = [gradient_map(6, 4), LinearMap.from_matrix(rng.standard_normal((3, 5)))]
        for L in maps:
            for Lx in (L, L.adjoint):
                for _ in range(100):
                    x = rng.standard_normal(Lx.in_dim)
                    y = rng.standard_normal(Lx.out_dim)
                    gap = abs(Lx.apply(x) @ y - x @ Lx.adjoint_apply(y))
                    assert gap <= 1e-10 * np.linalg.norm(x) * np.linalg.norm(y)

    def test_norm_bound_holds(self):
        rng = np.random.default_rng(1)
        for L in (gradient_map(5, 5), LinearMap.from_matrix(rng.standard_normal((4, 4)))):
            for _ in range(50):
                x = rng.standard_normal(L.in_dim)
                assert np.linalg.norm(L.apply(x)) <= L.norm_bound * np.linalg.norm(x) + 1e-12

    def test_matrix_roundtrip(self):
        M = np.arange(6.0).reshape(2, 3)
        assert np.array_equal(LinearMap.from_matrix(M).matrix(), M)

    def test_rejects_empty(self):
        with pytest.raises(DimensionError):
            LinearMap(lambda x: x, lambda y: y, 0, 1)


class TestLipschitzOp:
    def test_affine_lipschitz_and_monotone(self):
        rng = np.random.default_rng(2)
        G = rng.standard_normal((3, 3))
        op = LipschitzOp.affine(G @ G.T + (G - G.T))
        for _ in range(100):
            x, y = rng.standard_normal(3), rng.standard_normal(3)
            d = op(x) - op(y)
            assert np.linalg.norm(d) <= op.lipschitz_constant * np.linalg.norm(x - y) + 1e-12
            assert (x - y) @ d >= -1e-10 * np.linalg.norm(x - y) ** 2

    def test_penalty_gradient(self):
        K = LinearMap.from_matrix([[1.0, 1.0]])
        op = LipschitzOp.penalty_gradient(K, [2.0])
        assert np.allclose(op(np.array([0.0, 0.0])), [-2.0, -2.0])
        assert op.lipschitz_constant == pytest.approx(2.0)

    def test_negative_constant(self):
        with pytest.raises(ParameterError):
            LipschitzOp(lambda x: x, -1.0)


class TestMoreau:
    def test_abs_interior(self):
        assert moreau_conjugate_prox(abs_prox(), 1.0, np.array([0.5]))[0] == pytest.approx(0.5)

    def test_abs_clamp(self):
        assert moreau_conjugate_prox(abs_prox(), 1.0, np.array([3.0]))[0] == pytest.approx(1.0)

    def test_quadratic(self):
        out = moreau_conjugate_prox(sqnorm_prox(), 2.0, np.array([2.0, -4.0]))
        assert np.allclose(out, np.array([2.0, -4.0]) / 3.0, atol=1e-12)

    def test_bad_gamma(self):
        with pytest.raises(ParameterError):
            moreau_conjugate_prox(abs_prox(), 0.0, np.array([1.0]))

    @settings(max_examples=100, deadline=None)
    @given(vec(4), st.floats(0.05, 20))
    def test_identity(self, x, gamma):
        for g in (abs_prox(), sqnorm_prox(), box_prox(-1.0, 2.0)):
            lhs = moreau_conjugate_prox(g, gamma, x) + gamma * g.prox(1.0 / gamma, x / gamma)
            assert np.allclose(lhs, x, rtol=0, atol=1e-12 * max(1.0, np.abs(x).max()))

    def test_conjugate_prox_oracle(self):
        cp = ConjugateProx(abs_prox())
        assert np.allclose(cp.prox(1.0, np.array([-3.0, 0.2])), [-1.0, 0.2])


class TestBoxAndAffine:
    def test_box_interior(self):
        assert np.array_equal(prox_box(np.array([0.2, 0.9]), 0, 1), [0.2, 0.9])

    def test_box_clamp(self):
        assert np.array_equal(prox_box(np.array([-0.5, 1.7]), 0, 1), [0.0, 1.0])

    def test_box_degenerate(self):
        assert np.array_equal(prox_box(np.array([0.5]), 0.5, 0.5), [0.5])

    def test_box_empty(self):
        with pytest.raises(ParameterError):
            prox_box(np.array([0.0]), 1, 0)
        with pytest.raises(ParameterError):
            box_prox(1, 0)

    def test_affine_examples(self):
        assert np.allclose(proj_affine(LinearMap.from_matrix([[1.0, 1.0]]), [2.0], [0.0, 0.0]), [1, 1])
        assert np.allclose(proj_affine(np.eye(2), [3.0, 4.0], [9.0, -1.0]), [3, 4])
        assert np.allclose(proj_affine(np.array([[1.0, 0.0]]), [5.0], [2.0, 7.0]), [5, 7])

    def test_affine_infeasible(self):
        with pytest.raises(InfeasibleError):
            proj_affine(np.array([[1.0, 1.0], [1.0, 1.0]]), [1.0, 2.0], [0.0, 0.0])

    @settings(max_examples=50, deadline=None)
    @given(arrays(np.float64, (2, 4), elements=st.floats(-3, 3)), vec(4), vec(4))
    def test_affine_is_projection(self, K, z0, x):
        if np.linalg.matrix_rank(K) < 2 or np.linalg.cond(K) > 1e6:
            return
        b = K @ z0
        z = proj_affine(K, b, x)
        assert np.linalg.norm(K @ z - b) <= 1e-8 * (1 + np.linalg.norm(b)) * max(1.0, np.linalg.norm(x))
        # x - z is orthogonal to the null space of K
        null = np.linalg.svd(K)[2][2:]
        assert np.abs(null @ (x - z)).max() <= 1e-8 * max(1.0, np.linalg.norm(x))


class TestResolvents:
    @settings(max_examples=50, deadline=None)
    @given(vec(3), vec(3), st.floats(0.01, 10))
    def test_firm_nonexpansive(self, x, y, gamma):
        rng = np.random.default_rng(0)
        G = rng.standard_normal((3, 3))
        shipped = [abs_prox(), sqnorm_prox(), box_prox(0, 1), linear_resolvent(G @ G.T + (G - G.T))]
        for J in shipped:
            jx, jy = J.prox(gamma, x), J.prox(gamma, y)
            d = jx - jy
            assert d @ d <= (x - y) @ d + 1e-10 * max(1.0, (x - y) @ (x - y))

    def test_idempotent_on_fixed_points(self):
        J = box_prox(0, 1)
        p = J.prox(1.0, np.array([0.3, 2.0]))
        assert np.array_equal(J.prox(1.0, p), p)


class TestCounted:
    def test_counts(self):
        op = wrap_counted(LipschitzOp.affine(np.eye(2)))
        assert op.call_count == 0
        for _ in range(3):
            op.eval(np.ones(2))
        assert op.call_count == 3

    def test_reset(self):
        op = wrap_counted(abs_prox())
        for _ in range(5):
            op.prox(1.0, np.ones(1))
        op.reset()
        op(1.0, np.ones(1))
        op.prox(1.0, np.ones(1))
        assert op.call_count == 2

    def test_transparent(self):
        inner = LipschitzOp.affine(2 * np.eye(2))
        op = CountedOp(inner)
        assert op.lipschitz_constant == inner.lipschitz_constant
        assert np.array_equal(op(np.ones(2)), inner(np.ones(2)))
        assert wrap_counted(op) is op

    def test_thread_safe(self):
        op = wrap_counted(ProxOracle(lambda g, x: x))
        x = np.zeros(1)

        def work():
            for _ in range(2000):
                op.prox(1.0, x)

        threads = [threading.Thread(target=work) for _ in range(4)]
        for t in threads:
            t.start()
        for t in threads:
            t.join()
        assert op.call_count == 8000
