"""Product-space lift for sums of linearly composed operators.

A :class:`CompositeProblem` describes

    0 in A x + sum_i L_i* B_i (L_i x) + D x + N_C(x),   C = zer B.

:func:`lift_problem` turns it into a :class:`~fbfep.splitting.PenaltyProblem`
on ``H x G_1 x ... x G_m`` with

    A~(x, v) = A x  x  B_1^{-1} v_1  x ...
    D~(x, v) = (sum_i L_i* v_i + D x, -L_1 x, ..., -L_m x)
    B~(x, v) = (B x, 0, ..., 0)

so the generic extrapolated solver runs unchanged on flat vectors.
"""

import math
from dataclasses import dataclass

import numpy as np

from fbfep.core import ConjugateProx, LipschitzOp, ProxOracle, as_vector
from fbfep.errors import DimensionError, ParameterError
from fbfep.splitting import PenaltyProblem, RunOptions, run


@dataclass(frozen=True)
class CompositeTerm:
    """One ``L_i* B_i L_i`` summand.

    ``inverse_resolvent.prox(lam, v)`` must return ``J_{lam B_i^{-1}} v``.
    Use :meth:`from_resolvent` when only the resolvent of ``B_i`` (or the
    prox of ``g_i`` for ``B_i = dg_i``) is available.
    """

    L: object
    inverse_resolvent: object

    @classmethod
    def from_resolvent(cls, L, resolvent):
        # J_{lam B^{-1}}(v) = v - lam J_{B/lam}(v/lam)
        return cls(L, ConjugateProx(resolvent))


def _as_term(t):
    if isinstance(t, CompositeTerm):
        return t
    try:
        g_prox, L = t
    except (TypeError, ValueError):
        raise ParameterError("terms must be CompositeTerm or (prox, LinearMap) pairs") from None
    return CompositeTerm.from_resolvent(L, g_prox)


@dataclass(frozen=True)
class CompositeProblem:
    A: object
    B: object
    D: object = None
    terms: tuple = ()
    dim: int = None

    def __post_init__(self):
        if self.D is None:
            object.__setattr__(self, "D", LipschitzOp.zero())
        terms = tuple(_as_term(t) for t in self.terms)
        object.__setattr__(self, "terms", terms)
        in_dims = {t.L.in_dim for t in terms}
        if len(in_dims) > 1:
            raise DimensionError(f"linear maps disagree on the primal dimension: {sorted(in_dims)}")
        if in_dims:
            (n,) = in_dims
            if self.dim is None:
                object.__setattr__(self, "dim", n)
            elif self.dim != n:
                raise DimensionError(f"dim={self.dim} but linear maps act on R^{n}")

    @property
    def m(self):
        return len(self.terms)


@dataclass(frozen=True)
class LiftedLayout:
    """Offsets of the blocks ``x, v_1, ..., v_m`` inside one flat vector."""

    dims: tuple

    @property
    def offsets(self):
        return tuple(int(o) for o in np.concatenate(([0], np.cumsum(self.dims))))

    @property
    def size(self):
        return int(sum(self.dims))

    def split(self, flat):
        flat = as_vector(flat, self.size)
        o = self.offsets
        return [flat[o[k]:o[k + 1]] for k in range(len(self.dims))]

    def point(self, flat):
        blocks = self.split(flat)
        return LiftedPoint(blocks[0].copy(), tuple(b.copy() for b in blocks[1:]))

    def flatten(self, pt):
        if len(pt.v) != len(self.dims) - 1:
            raise DimensionError(f"expected {len(self.dims) - 1} dual blocks, got {len(pt.v)}")
        blocks = [pt.x, *pt.v]
        for blk, d in zip(blocks, self.dims):
            as_vector(blk, d)
        return np.concatenate([np.asarray(b, dtype=np.float64) for b in blocks])


@dataclass(frozen=True)
class LiftedPoint:
    x: np.ndarray
    v: tuple = ()

    def norm(self):
        return math.sqrt(float(self.x @ self.x) + sum(float(vi @ vi) for vi in self.v))


def layout_of(c):
    if c.dim is None:
        raise DimensionError("CompositeProblem.dim is required when there are no composed terms")
    return LiftedLayout((c.dim, *(t.L.out_dim for t in c.terms)))


def resolvent_product(lam, A, inv_terms, pt):
    """``J_{lam A~}(x, v) = (J_{lam A} x, J_{lam B_1^{-1}} v_1, ...)``."""
    if not lam > 0:
        raise ParameterError("lam must be positive")
    if len(inv_terms) != len(pt.v):
        raise DimensionError("one inverse resolvent per dual block is required")
    return LiftedPoint(A.prox(lam, pt.x), tuple(r.prox(lam, v) for r, v in zip(inv_terms, pt.v)))


def lift_problem(c):
    """Penalty problem on the flat product space; ``m = 0`` returns the base problem."""
    if c.m == 0:
        return PenaltyProblem(A=c.A, B=c.B, D=c.D, dim=c.dim)
    lay = layout_of(c)
    o = lay.offsets
    n = c.dim
    Ls = [t.L for t in c.terms]
    invs = [t.inverse_resolvent for t in c.terms]

    def _prox(lam, flat):
        out = np.empty(lay.size)
        out[:n] = c.A.prox(lam, flat[:n])
        for k, r in enumerate(invs, start=1):
            out[o[k]:o[k + 1]] = r.prox(lam, flat[o[k]:o[k + 1]])
        return out

    def _D(flat):
        x = flat[:n]
        out = np.empty(lay.size)
        acc = Ls[0].adjoint_apply(flat[o[1]:o[2]])
        for k in range(1, len(Ls)):
            acc = acc + Ls[k].adjoint_apply(flat[o[k + 1]:o[k + 2]])
        out[:n] = acc + c.D.eval(x)
        for k, L in enumerate(Ls, start=1):
            out[o[k]:o[k + 1]] = -L.apply(x)
        return out

    def _B(flat):
        out = np.zeros(lay.size)
        out[:n] = c.B.eval(flat[:n])
        return out

    beta = c.D.lipschitz_constant + math.sqrt(sum(L.norm_bound ** 2 for L in Ls))
    return PenaltyProblem(
        A=ProxOracle(_prox, name="J_lift"),
        B=LipschitzOp(_B, c.B.lipschitz_constant, name="B_lift"),
        D=LipschitzOp(_D, beta, name="D_lift"),
        dim=lay.size,
    )


def alg3_run(c, s, init, opts=None, **kwargs):
    """Run the extrapolated solver on the lifted problem.

    ``init`` is a :class:`LiftedPoint` (or a primal vector, in which case
    the dual blocks start at zero, which also sets ``q_{i,-1} = v_{i,0}``).
    The returned record's ``x`` and ``z`` are the primal components; the
    full lifted vectors are kept as ``x_lifted`` and ``z_lifted``.
    """
    lay = layout_of(c)
    if not isinstance(init, LiftedPoint):
        init = LiftedPoint(as_vector(init, c.dim), tuple(np.zeros(d) for d in lay.dims[1:]))
    flat0 = lay.flatten(init)
    rec = run(lift_problem(c), s, flat0, opts=opts or RunOptions(), **kwargs)
    rec.layout = lay
    rec.x_lifted, rec.z_lifted = rec.x, rec.z
    rec.x = rec.x[: c.dim].copy()
    rec.z = rec.z[: c.dim].copy()
    return rec


def alg4_build(f, h_grad=None, psi_grad=None, terms=(), dim=None):
    """Operators for ``min f + sum g_i(L_i .) + h`` over ``argmin Psi``.

    ``A = df`` (via ``f``'s prox), ``B = grad Psi``, ``D = grad h`` and
    ``B_i = dg_i``. Terms are ``(g_prox, L)`` pairs, whose dual update
    ``prox_{lam g_i*}`` goes through the Moreau identity, or
    :class:`CompositeTerm` objects with a closed-form conjugate prox.
    ``psi_grad = None`` means ``Psi = 0`` (``mu = inf``).
    """
    if psi_grad is None:
        psi_grad = LipschitzOp.zero()
    return CompositeProblem(A=f, B=psi_grad, D=h_grad, terms=tuple(terms), dim=dim)
