"""Independent reference computations for small instances.

Nothing here calls the solver code paths; the routines use dense linear
algebra and direct evaluation only.
"""

import itertools

import numpy as np

from fbfep.errors import DimensionError, NoUniqueSolutionError, ParameterError

KKT_TOL = 1e-10
MAX_DIM = 50


def _affine(spec, n=None):
    Q, a = spec
    Q = np.atleast_2d(np.asarray(Q, dtype=np.float64))
    if Q.shape[0] != Q.shape[1] or (n is not None and Q.shape[0] != n):
        raise DimensionError("affine operators must be square and share one dimension")
    a = np.zeros(Q.shape[0]) if a is None else np.asarray(a, dtype=np.float64).reshape(Q.shape[0])
    return Q, a


def _kkt_solve(M, c, K, b):
    """Solve ``M u + c + K' m = 0, K u = b`` densely; returns ``(u, m)``."""
    n = M.shape[0]
    k = K.shape[0]
    S = np.block([[M, K.T], [K, np.zeros((k, k))]])
    rhs = np.concatenate([-c, b])
    if np.linalg.matrix_rank(S) < n + k:
        raise NoUniqueSolutionError("singular KKT system")
    sol = np.linalg.solve(S, rhs)
    return sol[:n], sol[n:]


def solve_small_inclusion(A_affine, D_affine=None, C_affine=None, box=None, return_multiplier=False):
    """Zero of ``A + D + N_C`` for affine ``A, D`` and ``C = {K x = b}``.

    ``A_affine`` and ``D_affine`` are ``(matrix, vector)`` pairs, ``C_affine``
    a ``(K, b)`` pair (``None`` for the whole space). With ``box = (lo, hi)``
    the inclusion gains ``N_[lo,hi]^n`` and is solved by enumerating which
    coordinates sit at which bound (fine for ``n <= 12``).
    """
    MA, cA = _affine(A_affine)
    n = MA.shape[0]
    if n > MAX_DIM:
        raise ParameterError(f"oracle is limited to dimension {MAX_DIM}")
    MD, cD = _affine(D_affine, n) if D_affine is not None else (np.zeros((n, n)), np.zeros(n))
    M = MA + MD
    c = cA + cD
    if C_affine is None:
        K, b = np.zeros((0, n)), np.zeros(0)
    else:
        K = np.atleast_2d(np.asarray(C_affine[0], dtype=np.float64))
        b = np.asarray(C_affine[1], dtype=np.float64).reshape(K.shape[0])
        if K.shape[1] != n:
            raise DimensionError("K must act on the same space as A")

    if box is None:
        u, m = _kkt_solve(M, c, K, b)
        res = np.linalg.norm(M @ u + c + K.T @ m) + np.linalg.norm(K @ u - b)
        if res > KKT_TOL * (1.0 + np.linalg.norm(c) + np.linalg.norm(b)):
            raise NoUniqueSolutionError(f"KKT residual {res:.3g} too large")
        return (u, m) if return_multiplier else u

    lo, hi = box
    if n > 12:
        raise ParameterError("box enumeration is limited to n <= 12")
    found = []
    for pattern in itertools.product((0, -1, 1), repeat=n):
        pat = np.array(pattern)
        fixed = pat != 0
        # fixed coordinates become extra equality rows; their multipliers are the normal-cone parts
        E = np.eye(n)[fixed]
        val = np.where(pat[fixed] < 0, lo, hi)
        try:
            u, m = _kkt_solve(M, c, np.vstack([K, E]), np.concatenate([b, val]))
        except (NoUniqueSolutionError, np.linalg.LinAlgError):
            continue
        if np.any(u < lo - 1e-12) or np.any(u > hi + 1e-12):
            continue
        w = m[K.shape[0]:]
        # normal cone of the box: nonpositive at lo, nonnegative at hi
        if np.any(w[pat[fixed] < 0] > 1e-12) or np.any(w[pat[fixed] > 0] < -1e-12):
            continue
        found.append((u, m[: K.shape[0]]))
    if not found:
        raise NoUniqueSolutionError("no KKT point found in the box")
    u, m = found[0]
    for v, _ in found[1:]:
        if np.linalg.norm(v - u) > 1e-8:
            raise NoUniqueSolutionError("several KKT points in the box")
    return (u, m) if return_multiplier else u


def finite_diff_grad(f, x, h=1e-5):
    """Central-difference gradient of ``f`` at ``x``."""
    if not h > 0:
        raise ParameterError("h must be positive")
    x = np.asarray(x, dtype=np.float64).ravel()
    g = np.empty_like(x)
    for i in range(x.size):
        e = np.zeros_like(x)
        e[i] = h
        g[i] = (f(x + e) - f(x - e)) / (2.0 * h)
    return g


def prox_optimality_check(f, x, p, gamma, trials=100, radius=1.0, seed=0, slack=1e-9):
    """True iff ``p`` beats random ``z`` near ``p`` on ``f(z) + ||z - x||^2 / (2 gamma)``."""
    if not gamma > 0:
        raise ParameterError("gamma must be positive")
    x = np.asarray(x, dtype=np.float64).ravel()
    p = np.asarray(p, dtype=np.float64).ravel()
    rng = np.random.default_rng(seed)

    def obj(z):
        return f(z) + float(np.sum((z - x) ** 2)) / (2.0 * gamma)

    base = obj(p)
    if not np.isfinite(base):
        return False
    for _ in range(trials):
        z = p + radius * rng.uniform(-1.0, 1.0, size=p.shape)
        if base > obj(z) + slack:
            return False
    return True


def indicator_box(lo, hi):
    """``f = indicator of [lo, hi]^n`` as a real-valued callable (``inf`` outside)."""

    def f(z):
        z = np.asarray(z)
        return 0.0 if np.all((z >= lo) & (z <= hi)) else np.inf

    return f
