"""Constrained convex-concave minimax through the penalty splitting solver.

For ``min_{x in X, K1 x = b} max_{y in Y, K2 y = b'} f(x, y)`` the solver
works on the stacked vector ``w = (x, y)`` with

    A(w) = (N_X(x), N_Y(y))                 resolvent (proj_X, proj_Y)
    B(w) = (K1*(K1 x - b), K2*(K2 y - b'))  zer B = feasible product set
    D(w) = (grad_1 f(x, y), -grad_2 f(x, y))
"""

from dataclasses import dataclass

import numpy as np

from fbfep.core import LinearMap, LipschitzOp, ProxOracle, as_vector
from fbfep.errors import DimensionError
from fbfep.splitting import PenaltyProblem, RunOptions, run


@dataclass(frozen=True)
class MinimaxInstance:
    """Oracles of one constrained saddle problem.

    ``lipschitz`` is a Lipschitz constant of ``(grad_1 f, -grad_2 f)``
    jointly in ``(x, y)``. ``proj_X`` and ``proj_Y`` map a vector to its
    projection.
    """

    grad1: object
    grad2: object
    lipschitz: float
    proj_X: object
    proj_Y: object
    K1: object
    b1: np.ndarray
    K2: object
    b2: np.ndarray
    name: str = "minimax"

    def __post_init__(self):
        object.__setattr__(self, "b1", as_vector(self.b1, self.K1.out_dim))
        object.__setattr__(self, "b2", as_vector(self.b2, self.K2.out_dim))

    @property
    def n1(self):
        return self.K1.in_dim

    @property
    def n2(self):
        return self.K2.in_dim

    def split(self, w):
        w = as_vector(w, self.n1 + self.n2)
        return w[: self.n1], w[self.n1:]

    def join(self, x, y):
        return np.concatenate([as_vector(x, self.n1), as_vector(y, self.n2)])


def box_projection(lo, hi):
    def _proj(x):
        return np.clip(x, lo, hi)

    return _proj


def quadratic_instance(P, Q, C, p=None, q=None, lo=-np.inf, hi=np.inf, K1=None, b1=None, K2=None, b2=None,
                       name="quadratic"):
    """``f(x, y) = x'Px/2 - y'Qy/2 + x'Cy + p'x - q'y`` on boxes ``[lo, hi]``.

    ``P`` and ``Q`` must be positive semidefinite so that ``f`` is
    convex-concave. Missing constraint maps default to identities with
    ``b = 0``.
    """
    P = np.atleast_2d(np.asarray(P, dtype=np.float64))
    Q = np.atleast_2d(np.asarray(Q, dtype=np.float64))
    C = np.atleast_2d(np.asarray(C, dtype=np.float64))
    n1, n2 = P.shape[0], Q.shape[0]
    if P.shape != (n1, n1) or Q.shape != (n2, n2) or C.shape != (n1, n2):
        raise DimensionError("P, Q, C must be n1 x n1, n2 x n2 and n1 x n2")
    p = np.zeros(n1) if p is None else as_vector(p, n1)
    q = np.zeros(n2) if q is None else as_vector(q, n2)
    K1 = LinearMap.identity(n1) if K1 is None else (K1 if isinstance(K1, LinearMap) else LinearMap.from_matrix(K1))
    K2 = LinearMap.identity(n2) if K2 is None else (K2 if isinstance(K2, LinearMap) else LinearMap.from_matrix(K2))
    b1 = np.zeros(K1.out_dim) if b1 is None else b1
    b2 = np.zeros(K2.out_dim) if b2 is None else b2
    # F(w) = M w + (p, q) with M = [[P, C], [-C', Q]]
    M = np.block([[P, C], [-C.T, Q]])
    inst = MinimaxInstance(
        grad1=lambda x, y: P @ x + C @ y + p,
        grad2=lambda x, y: C.T @ x - Q @ y - q,
        lipschitz=float(np.linalg.norm(M, 2)),
        proj_X=box_projection(lo, hi),
        proj_Y=box_projection(lo, hi),
        K1=K1, b1=b1, K2=K2, b2=b2, name=name,
    )
    object.__setattr__(inst, "F_matrix", M)
    object.__setattr__(inst, "F_offset", np.concatenate([p, q]))
    return inst


def bilinear_instance():
    """``f(x, y) = x y`` on ``[-1, 1]^2`` with ``K1 = K2 = Id``, ``b = b' = 0``."""
    return quadratic_instance([[0.0]], [[0.0]], [[1.0]], lo=-1.0, hi=1.0, name="bilinear")


def build_minimax_problem(m):
    n1 = m.n1

    def _prox(lam, w):
        return np.concatenate([m.proj_X(w[:n1]), m.proj_Y(w[n1:])])

    def _B(w):
        x, y = w[:n1], w[n1:]
        return np.concatenate([m.K1.adjoint_apply(m.K1.apply(x) - m.b1), m.K2.adjoint_apply(m.K2.apply(y) - m.b2)])

    def _D(w):
        x, y = w[:n1], w[n1:]
        return np.concatenate([m.grad1(x, y), -m.grad2(x, y)])

    kbar = max(m.K1.norm_bound ** 2, m.K2.norm_bound ** 2)
    return PenaltyProblem(
        A=ProxOracle(_prox, name="proj_XxY"),
        B=LipschitzOp(_B, kbar, name="penalty"),
        D=LipschitzOp(_D, m.lipschitz, name="F"),
        dim=n1 + m.n2,
    )


def alg2_run(m, s, init, opts=None, **kwargs):
    """Run the extrapolated solver; ``init`` is ``(x0, y0)`` or a stacked vector."""
    w0 = m.join(*init) if isinstance(init, tuple) else as_vector(init, m.n1 + m.n2)
    return run(build_minimax_problem(m), s, w0, opts=opts or RunOptions(), **kwargs)


def saddle_residual(m, x, y):
    """Projected-gradient and feasibility residual of the pair ``(x, y)``.

    ``||x - P_X(x - g1)|| + ||y - P_Y(y + g2)|| + ||K1 x - b|| + ||K2 y - b'||``
    where ``g1, g2`` are the partial gradients at ``(x, y)``. It vanishes at
    saddle points whose equality constraints carry zero multipliers.
    """
    x = as_vector(x, m.n1)
    y = as_vector(y, m.n2)
    g1 = m.grad1(x, y)
    g2 = m.grad2(x, y)
    r = np.linalg.norm(x - m.proj_X(x - g1))
    r += np.linalg.norm(y - m.proj_Y(y + g2))
    r += np.linalg.norm(m.K1.apply(x) - m.b1)
    r += np.linalg.norm(m.K2.apply(y) - m.b2)
    return float(r)
