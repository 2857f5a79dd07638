"""Vector-space primitives: linear maps, Lipschitz operators, resolvent
oracles, call counting, operator-norm estimation and a few closed-form
proximal maps.

Vectors are plain 1-D ``float64`` numpy arrays. Product spaces are
realised by concatenation, so every inner product here is the standard
Euclidean one.
"""

import threading

import numpy as np

from fbfep.errors import DimensionError, InfeasibleError, ParameterError

# default tolerances; tests may override per call
ADJOINT_RTOL = 1e-10
MOREAU_ATOL = 1e-12
NORM_MAX_ITERS = 1000
NORM_TOL = 1e-9
NORM_SAFETY = 1.0001
AFFINE_RTOL = 1e-8


def as_vector(x, dim=None):
    v = np.asarray(x, dtype=np.float64)
    if v.ndim == 0:
        v = v.reshape(1)
    if v.ndim != 1:
        raise DimensionError(f"expected a 1-D vector, got shape {v.shape}")
    if dim is not None and v.shape[0] != dim:
        raise DimensionError(f"expected dimension {dim}, got {v.shape[0]}")
    return v


class LinearMap:
    """A linear operator given by its action and the action of its adjoint.

    Parameters
    ----------
    apply, adjoint_apply : callable
        ``apply(x)`` maps R^in_dim to R^out_dim; ``adjoint_apply`` goes back.
    in_dim, out_dim : int
    norm_bound : float, optional
        An upper bound on the operator norm. When omitted it is estimated
        with :func:`op_norm_estimate` and inflated by ``NORM_SAFETY``.
    """

    def __init__(self, apply, adjoint_apply, in_dim, out_dim, norm_bound=None, name="L"):
        if in_dim < 1 or out_dim < 1:
            raise DimensionError("linear map dimensions must be positive")
        self._apply = apply
        self._adjoint = adjoint_apply
        self.in_dim = int(in_dim)
        self.out_dim = int(out_dim)
        self.name = name
        self._norm_bound = None if norm_bound is None else float(norm_bound)

    def apply(self, x):
        return self._apply(x)

    def adjoint_apply(self, y):
        return self._adjoint(y)

    __call__ = apply

    @property
    def norm_bound(self):
        if self._norm_bound is None:
            self._norm_bound = op_norm_estimate(self) * NORM_SAFETY
        return self._norm_bound

    @property
    def adjoint(self):
        return LinearMap(
            self._adjoint,
            self._apply,
            self.out_dim,
            self.in_dim,
            norm_bound=self._norm_bound,
            name=f"{self.name}*",
        )

    def matrix(self):
        """Assemble the dense matrix column by column (small maps only)."""
        cols = [self.apply(e) for e in np.eye(self.in_dim)]
        return np.stack(cols, axis=1)

    @classmethod
    def from_matrix(cls, M, name="K"):
        M = np.atleast_2d(np.asarray(M, dtype=np.float64))
        MT = M.T.copy()
        nb = float(np.linalg.norm(M, 2)) if M.size else 0.0
        return cls(lambda x: M @ x, lambda y: MT @ y, M.shape[1], M.shape[0], norm_bound=nb, name=name)

    @classmethod
    def identity(cls, n):
        return cls(lambda x: x.copy(), lambda y: y.copy(), n, n, norm_bound=1.0, name="Id")

    def __repr__(self):
        return f"LinearMap({self.name}: R^{self.in_dim} -> R^{self.out_dim})"


class LipschitzOp:
    """Single-valued monotone operator with a known Lipschitz constant."""

    def __init__(self, fn, lipschitz_constant, name="op"):
        if lipschitz_constant < 0:
            raise ParameterError("Lipschitz constant must be nonnegative")
        self._fn = fn
        self.lipschitz_constant = float(lipschitz_constant)
        self.name = name

    def eval(self, x):
        return self._fn(x)

    __call__ = eval

    @classmethod
    def zero(cls):
        return cls(np.zeros_like, 0.0, name="0")

    @classmethod
    def affine(cls, M, c=None, name="affine"):
        M = np.atleast_2d(np.asarray(M, dtype=np.float64))
        c = np.zeros(M.shape[0]) if c is None else np.asarray(c, dtype=np.float64)
        return cls(lambda x: M @ x + c, float(np.linalg.norm(M, 2)), name=name)

    @classmethod
    def penalty_gradient(cls, K, b, name="penalty"):
        """Gradient ``K*(Kx - b)`` of ``0.5*||Kx - b||^2``; Lipschitz ``||K||^2``."""
        b = as_vector(b, K.out_dim)
        return cls(lambda x: K.adjoint_apply(K.apply(x) - b), K.norm_bound**2, name=name)


class ProxOracle:
    """Resolvent oracle ``prox(gamma, x) = (Id + gamma*A)^{-1} x``."""

    def __init__(self, fn, name="prox"):
        self._fn = fn
        self.name = name

    def prox(self, gamma, x):
        return self._fn(gamma, x)

    __call__ = prox


class CountedOp:
    """Wraps a :class:`LipschitzOp` or :class:`ProxOracle` and counts calls.

    The counter is guarded by a lock so one wrapper may be shared between
    threads; counts are exact either way.
    """

    def __init__(self, inner):
        self.inner = inner
        self._count = 0
        self._lock = threading.Lock()

    def _bump(self):
        with self._lock:
            self._count += 1

    @property
    def call_count(self):
        return self._count

    def reset(self):
        with self._lock:
            self._count = 0

    def eval(self, x):
        self._bump()
        return self.inner.eval(x)

    def prox(self, gamma, x):
        self._bump()
        return self.inner.prox(gamma, x)

    def __call__(self, *args):
        return self.prox(*args) if len(args) == 2 else self.eval(*args)

    def __getattr__(self, name):
        # lipschitz_constant, name, ... come from the wrapped operator
        return getattr(self.inner, name)


def wrap_counted(op):
    return op if isinstance(op, CountedOp) else CountedOp(op)


def op_norm_estimate(K, max_iters=NORM_MAX_ITERS, tol=NORM_TOL, seed=0):
    """Power iteration on ``K* K`` for the largest singular value of ``K``.

    Returns a lower estimate of ``||K||`` (``||K v||`` for a unit vector
    ``v``), stopping once the relative change drops below ``tol``.
    The start vector comes from ``numpy.random.default_rng(seed)``.
    """
    if max_iters < 1:
        raise ParameterError("max_iters must be >= 1")
    if tol <= 0:
        raise ParameterError("tol must be positive")
    rng = np.random.default_rng(seed)
    v = rng.standard_normal(K.in_dim)
    v /= np.linalg.norm(v)
    sigma = 0.0
    for _ in range(max_iters):
        Kv = np.asarray(K.apply(v), dtype=np.float64)
        if Kv.shape != (K.out_dim,):
            raise DimensionError(f"map returned shape {Kv.shape}, expected ({K.out_dim},)")
        new_sigma = float(np.linalg.norm(Kv))
        if new_sigma == 0.0:
            return 0.0
        w = np.asarray(K.adjoint_apply(Kv), dtype=np.float64)
        if w.shape != (K.in_dim,):
            raise DimensionError(f"adjoint returned shape {w.shape}, expected ({K.in_dim},)")
        wn = np.linalg.norm(w)
        if wn == 0.0:
            return new_sigma
        converged = abs(new_sigma - sigma) <= tol * new_sigma
        sigma = new_sigma
        v = w / wn
        if converged:
            break
    return max(sigma, float(np.linalg.norm(K.apply(v))))


def moreau_conjugate_prox(g_prox, gamma, x):
    """``prox_{gamma g*}(x) = x - gamma * prox_{g/gamma}(x/gamma)``."""
    if gamma <= 0:
        raise ParameterError("gamma must be positive")
    x = np.asarray(x, dtype=np.float64)
    return x - gamma * g_prox.prox(1.0 / gamma, x / gamma)


class ConjugateProx(ProxOracle):
    """Resolvent of ``(dg)^{-1}`` built from the prox of ``g``."""

    def __init__(self, g_prox):
        self.g_prox = g_prox
        super().__init__(lambda gamma, x: moreau_conjugate_prox(g_prox, gamma, x),
                         name=f"conj({getattr(g_prox, 'name', 'g')})")


def prox_box(x, lo, hi):
    if lo > hi:
        raise ParameterError(f"empty box [{lo}, {hi}]")
    return np.clip(np.asarray(x, dtype=np.float64), lo, hi)


def proj_affine(K, b, x):
    """Euclidean projection of ``x`` onto ``{z : K z = b}`` (small dense ``K``).

    Solves the normal equations ``(K K*) m = K x - b`` by least squares so
    rank-deficient but consistent systems are accepted.
    """
    Km = K.matrix() if isinstance(K, LinearMap) else np.atleast_2d(np.asarray(K, dtype=np.float64))
    b = as_vector(b, Km.shape[0])
    x = as_vector(x, Km.shape[1])
    # feasibility first: the least-squares solution must satisfy Kz = b
    z0, *_ = np.linalg.lstsq(Km, b, rcond=None)
    if np.linalg.norm(Km @ z0 - b) > AFFINE_RTOL * (1.0 + np.linalg.norm(b)):
        raise InfeasibleError("K z = b has no solution")
    m, *_ = np.linalg.lstsq(Km @ Km.T, Km @ x - b, rcond=None)
    z = x - Km.T @ m
    return z


# --- closed-form resolvents used by instances and tests -------------------


def box_prox(lo, hi):
    """Resolvent of the normal cone of ``[lo, hi]^n`` (independent of gamma)."""
    if lo > hi:
        raise ParameterError(f"empty box [{lo}, {hi}]")
    return ProxOracle(lambda gamma, x: np.clip(x, lo, hi), name=f"box[{lo},{hi}]")


def abs_prox():
    """prox of ``sum |x_i|``: soft thresholding."""
    return ProxOracle(lambda gamma, x: np.sign(x) * np.maximum(np.abs(x) - gamma, 0.0), name="|.|")


def sqnorm_prox():
    """prox of ``0.5*||x||^2``."""
    return ProxOracle(lambda gamma, x: x / (1.0 + gamma), name="0.5||.||^2")


def zero_prox():
    """Resolvent of the zero operator: the identity."""
    return ProxOracle(lambda gamma, x: np.array(x, dtype=np.float64, copy=True), name="0")


def point_prox(u):
    """Resolvent of the normal cone of the singleton ``{u}``."""
    u = np.asarray(u, dtype=np.float64)
    return ProxOracle(lambda gamma, x: u.copy(), name="N_{u}")


def linear_resolvent(Q, a=None):
    """Resolvent of ``A(x) = Q x + a`` for positive semidefinite ``Q``."""
    Q = np.atleast_2d(np.asarray(Q, dtype=np.float64))
    n = Q.shape[0]
    a = np.zeros(n) if a is None else as_vector(a, n)
    eye = np.eye(n)

    def _res(gamma, x):
        return np.linalg.solve(eye + gamma * Q, x - gamma * a)

    return ProxOracle(_res, name="affine")
