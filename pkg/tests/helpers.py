"""Shared small instances with oracle-known solutions."""

import math

import numpy as np

from fbfep.core import ConjugateProx, LinearMap, LipschitzOp, abs_prox, box_prox, linear_resolvent
from fbfep.minimax import quadratic_instance
from fbfep.oracle import solve_small_inclusion
from fbfep.schedules import PolySchedule, eval_schedule
from fbfep.splitting import PenaltyProblem


def affine_problem(Q, S, K, b, shift=None):
    """``A(x) = Q(x - shift)``, ``D(x) = S(x - shift)``, ``B = K*(K x - b)``."""
    Q = np.atleast_2d(np.asarray(Q, dtype=float))
    S = np.atleast_2d(np.asarray(S, dtype=float))
    K = np.atleast_2d(np.asarray(K, dtype=float))
    n = Q.shape[0]
    shift = np.zeros(n) if shift is None else np.asarray(shift, dtype=float)
    prob = PenaltyProblem(
        A=linear_resolvent(Q, -Q @ shift),
        B=LipschitzOp.penalty_gradient(LinearMap.from_matrix(K), b),
        D=LipschitzOp.affine(S, -S @ shift) if np.any(S) else None,
        dim=n,
    )
    u = solve_small_inclusion((Q, -Q @ shift), (S, -S @ shift), (K, b))
    return prob, u


def zero_multiplier_instances():
    """Three strongly monotone instances whose zero of ``A + D`` lies in ``C``.

    At the solution ``u``: ``B(u) = 0`` and ``A(u) + D(u) = 0``, so the
    constraint carries no multiplier. Returns ``(name, problem, u, x0)``.
    """
    out = []
    prob, u = affine_problem([[1.0]], [[0.0]], [[1.0]], [0.0])
    out.append(("scalar", prob, u, np.array([1.0])))

    p2 = np.array([0.25, 0.75])
    prob, u = affine_problem(np.diag([1.0, 2.0]), [[0.0, 1.0], [-1.0, 0.0]], [[1.0, 1.0]], [1.0], p2)
    out.append(("plane", prob, u, np.array([2.0, -1.0])))

    rng = np.random.default_rng(3)
    G = rng.standard_normal((3, 3))
    H = rng.standard_normal((3, 3))
    K = rng.standard_normal((2, 3))
    p3 = rng.standard_normal(3)
    prob, u = affine_problem(G @ G.T + 0.5 * np.eye(3), H - H.T, K, K @ p3, p3)
    out.append(("random3", prob, u, np.array([1.0, -2.0, 0.5])))
    return out


def safe_schedule(prob, bound=0.3, a=0.51):
    """``lam_n = c n^-a``, ``beta_n = n^a`` with ``M_n = lam_n beta_n / mu + lam_n / eta <= bound`` for every n."""
    inv = 1.0 / prob.mu + (0.0 if math.isinf(prob.eta) else 1.0 / prob.eta)
    return PolySchedule(bound / inv, a, 1.0, a)


def active_constraint_instance():
    """``A = diag(1, 2) x``, ``D`` skew, ``C = {x1 + x2 = 1}``: multiplier -1 at ``u = (1/3, 2/3)``."""
    return affine_problem(np.diag([1.0, 2.0]), [[0.0, 1.0], [-1.0, 0.0]], [[1.0, 1.0]], [1.0])


def minimax_quadratic():
    """Convex-concave quadratic on ``R^2 x R^2`` with one equality constraint per player.

    The saddle ``x* = (0.5, -0.3)``, ``y* = (0.2, 0.4)`` of the unconstrained
    function satisfies both constraints and lies inside the box ``[-2, 2]``.
    """
    P = np.diag([1.0, 0.5])
    Q = np.diag([0.8, 1.0])
    C = np.array([[1.0, 0.5], [-0.5, 1.0]])
    xs = np.array([0.5, -0.3])
    ys = np.array([0.2, 0.4])
    p = -(P @ xs + C @ ys)
    q = C.T @ xs - Q @ ys
    K1 = np.array([[1.0, 1.0]])
    K2 = np.array([[1.0, -1.0]])
    return quadratic_instance(P, Q, C, p, q, -2.0, 2.0, K1, K1 @ xs, K2, K2 @ ys)


def minimax_oracle(m):
    """Saddle of a quadratic instance from the KKT system (box assumed inactive)."""
    K = np.block([
        [m.K1.matrix(), np.zeros((m.K1.out_dim, m.n2))],
        [np.zeros((m.K2.out_dim, m.n1)), m.K2.matrix()],
    ])
    return solve_small_inclusion((m.F_matrix, m.F_offset), None, (K, np.concatenate([m.b1, m.b2])))


def transcribe_alg4(f, g, L, psi, h_grad, x0, sched, steps):
    """The four proximal-minimisation updates for one composed term, written out directly."""
    n = x0.shape[0]
    gconj = ConjugateProx(g)
    x, v = x0.copy(), np.zeros(L.out_dim)
    y_prev, q_prev = x0.copy(), v.copy()
    hp = h_grad(y_prev) if h_grad else np.zeros(n)
    out = []
    for k in range(steps):
        lam, beta = eval_schedule(sched, k + 1)
        y = f.prox(lam, x - lam * hp - lam * L.adjoint_apply(q_prev) - lam * beta * psi(y_prev))
        q = gconj.prox(lam, v + lam * L.apply(y_prev))
        hy = h_grad(y) if h_grad else np.zeros(n)
        x = lam * beta * (psi(y_prev) - psi(y)) + lam * (hp - hy) + lam * L.adjoint_apply(q_prev - q) + y
        v = lam * L.apply(y - y_prev) + q
        y_prev, q_prev, hp = y, q, hy
        out.append(np.concatenate([x, v]))
    return out


def signed_permutation_instance(n=8, seed=5):
    """Proximal-minimisation data whose products are all exact in floating point.

    ``L`` is a signed permutation with power-of-two scales, ``psi`` the
    penalty gradient of a coordinate selection with dyadic targets, ``f``
    the box ``[-1, 1]`` and ``g = |.|``. Returns ``(f, g, L, psi, x0)``.
    """
    rng = np.random.default_rng(seed)
    P = np.zeros((n, n))
    P[np.arange(n), rng.permutation(n)] = rng.choice([-2.0, -0.5, 0.5, 1.0, 2.0], n)
    K = LinearMap.from_matrix(np.eye(n)[:3])
    psi = LipschitzOp.penalty_gradient(K, np.array([0.25, -0.5, 0.125]))
    return box_prox(-1, 1), abs_prox(), LinearMap.from_matrix(P), psi, rng.standard_normal(n)
