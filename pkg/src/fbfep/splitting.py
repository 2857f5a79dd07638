"""Penalty-scheme splitting solvers for ``0 in A x + D x + N_C(x)``, ``C = zer B``.

Two per-iteration maps are provided:

* :func:`fbf_ep_step` - forward-backward-forward with extrapolation from
  the past. ``B`` and ``D`` are evaluated once per iteration; the values at
  the previous trial point ``y_{n-1}`` are reused from the state.
* :func:`fbf_step` - the classic forward-backward-forward step with ``B`` and ``D`` evaluated
  at ``x_n`` and at ``y_n`` (two evaluations each).

:func:`run` drives either map with a schedule, maintains the
``lam``-weighted ergodic average and records a per-iteration trace.
"""

import math
import time
from dataclasses import dataclass, field, replace

import numpy as np

from fbfep.core import CountedOp, LipschitzOp, as_vector
from fbfep.errors import NumericalDivergence, ParameterError, UsageError
from fbfep.schedules import eval_schedule

DIVERGENCE_BOUND = 1e12
LYAPUNOV_ATOL = 1e-9

ALGORITHMS = ("fbf_ep", "fbf")


@dataclass(frozen=True)
class PenaltyProblem:
    """Operators of one monotone inclusion with a penalised constraint.

    ``A`` is accessed only through its resolvent ``A.prox(lam, .)``.
    ``D = None`` stands for the zero operator (``eta = inf``).
    """

    A: object
    B: object
    D: object = None
    dim: int = None

    def __post_init__(self):
        if self.D is None:
            object.__setattr__(self, "D", LipschitzOp.zero())
        if self.B.lipschitz_constant < 0:
            raise ParameterError("B needs a nonnegative Lipschitz constant")

    @property
    def mu(self):
        # a zero penalty operator (C is the whole space) has mu = inf
        L = self.B.lipschitz_constant
        return math.inf if L == 0 else 1.0 / L

    @property
    def eta(self):
        L = self.D.lipschitz_constant
        return math.inf if L == 0 else 1.0 / L

    def counted(self):
        """Copy whose three operators count their calls."""
        return replace(self, A=CountedOp(self.A), B=CountedOp(self.B), D=CountedOp(self.D))


@dataclass(frozen=True)
class IterState:
    x: np.ndarray
    y_prev: np.ndarray
    By_prev: np.ndarray
    Dy_prev: np.ndarray
    n: int = 0


def init_state(p, x0, y_init=None):
    """State at ``n = 0``: ``y_{-1} = x_0`` unless another start is given."""
    x0 = as_vector(x0, p.dim).copy()
    y = x0.copy() if y_init is None else as_vector(y_init, x0.shape[0]).copy()
    return IterState(x=x0, y_prev=y, By_prev=p.B.eval(y), Dy_prev=p.D.eval(y), n=0)


def _check_finite(v, n, what):
    if not np.all(np.isfinite(v)):
        raise NumericalDivergence(n, f"non-finite {what}")


def fbf_ep_step(p, s, lam, beta):
    """One extrapolated step; exactly one call each to the resolvent, B and D."""
    lb = lam * beta
    y = p.A.prox(lam, s.x - lam * s.Dy_prev - lb * s.By_prev)
    _check_finite(y, s.n, "trial point")
    By = p.B.eval(y)
    Dy = p.D.eval(y)
    x_next = lb * (s.By_prev - By) + lam * (s.Dy_prev - Dy) + y
    _check_finite(x_next, s.n, "iterate")
    return IterState(x=x_next, y_prev=y, By_prev=By, Dy_prev=Dy, n=s.n + 1)


def fbf_step(p, s, lam, beta):
    """One forward-backward-forward step; B and D are evaluated at ``x_n`` and at ``y_n``.

    Only ``s.x`` is read. The returned state carries ``y_n`` and its
    operator values so it has the same shape as the extrapolated state.
    """
    lb = lam * beta
    Bx = p.B.eval(s.x)
    Dx = p.D.eval(s.x)
    y = p.A.prox(lam, s.x - lam * Dx - lb * Bx)
    _check_finite(y, s.n, "trial point")
    By = p.B.eval(y)
    Dy = p.D.eval(y)
    x_next = lb * (Bx - By) + lam * (Dx - Dy) + y
    _check_finite(x_next, s.n, "iterate")
    return IterState(x=x_next, y_prev=y, By_prev=By, Dy_prev=Dy, n=s.n + 1)


@dataclass(frozen=True)
class ErgodicAverage:
    """Running ``z = (1/tau) * sum lam_k x_k`` with ``tau = sum lam_k``."""

    z: np.ndarray = None
    tau: float = 0.0


def ergodic_update(avg, x, lam):
    if not lam > 0:
        raise ParameterError("averaging weight must be positive")
    tau = avg.tau + lam
    if avg.z is None:
        return ErgodicAverage(z=np.array(x, dtype=np.float64, copy=True), tau=tau)
    return ErgodicAverage(z=avg.z + (lam / tau) * (x - avg.z), tau=tau)


@dataclass
class RunOptions:
    max_iters: int = 1000
    algorithm: str = "fbf_ep"
    tol: float = None
    record_history: bool = False
    reference: np.ndarray = None
    monitor: object = None
    divergence_bound: float = DIVERGENCE_BOUND


ROW_FIELDS = ("n", "lam", "beta", "dx", "dy", "dist_ref", "b_calls", "d_calls", "resolvent_calls", "wall_ms")


@dataclass
class RunRecord:
    """Per-iteration trace of a run.

    Row ``n`` describes algorithm step ``n``: the schedule values used,
    ``dx = ||x_{n+1} - x_n||``, ``dy = ||y_n - y_{n-1}||``, cumulative
    operator-call counts and elapsed wall time. ``x`` and ``z`` hold the
    final iterate and ergodic average. With ``record_history`` the lists
    ``xs`` (``x_0 .. x_K``) and ``ys`` (``y_{-1} .. y_{K-1}``) are kept.
    """

    algorithm: str
    columns: dict = field(default_factory=dict)
    x: np.ndarray = None
    z: np.ndarray = None
    tau: float = 0.0
    xs: list = None
    ys: list = None
    lams: list = field(default_factory=list)
    betas: list = field(default_factory=list)
    stopped_early: bool = False

    def append(self, row):
        for k, v in row.items():
            self.columns.setdefault(k, []).append(v)

    def __len__(self):
        return len(self.columns.get("n", ()))

    def column(self, name):
        return np.asarray(self.columns[name], dtype=np.float64)


def run(p, s, x0, y_init=None, opts=None, **kwargs):
    """Iterate a penalty problem with schedule ``s``.

    Keyword arguments override fields of :class:`RunOptions`. A
    ``monitor(n, x_next, z, y)`` callback may return a dict of extra
    columns for each row. Raises :class:`NumericalDivergence` (with the
    partial record attached) when the iterates stop being finite or exceed
    ``divergence_bound``.
    """
    opts = replace(opts or RunOptions(), **kwargs)
    if opts.max_iters < 1:
        raise ParameterError("max_iters must be >= 1")
    if opts.algorithm not in ALGORITHMS:
        raise ParameterError(f"algorithm must be one of {ALGORITHMS}")
    step = fbf_ep_step if opts.algorithm == "fbf_ep" else fbf_step

    cp = p.counted()
    if opts.algorithm == "fbf_ep":
        state = init_state(cp, x0, y_init)
    else:
        x0v = as_vector(x0, p.dim).copy()
        zero = np.zeros_like(x0v)
        state = IterState(x=x0v, y_prev=x0v.copy(), By_prev=zero, Dy_prev=zero, n=0)
    ref = None if opts.reference is None else as_vector(opts.reference)

    rec = RunRecord(algorithm=opts.algorithm)
    if opts.record_history:
        rec.xs = [state.x.copy()]
        rec.ys = [state.y_prev.copy()]
    lam0, _ = eval_schedule(s, 1)
    avg = ergodic_update(ErgodicAverage(), state.x, lam0)
    t0 = time.perf_counter()

    for n in range(opts.max_iters):
        lam, beta = eval_schedule(s, n + 1)
        y_before = state.y_prev
        x_before = state.x
        try:
            state = step(cp, state, lam, beta)
        except NumericalDivergence as exc:
            rec.x, rec.z, rec.tau = x_before, avg.z, avg.tau
            raise NumericalDivergence(n, str(exc).split(": ", 1)[-1], record=rec) from None
        xn = state.x
        lam_next, _ = eval_schedule(s, n + 2)
        avg = ergodic_update(avg, xn, lam_next)

        dx = float(np.linalg.norm(xn - x_before))
        row = {
            "n": n,
            "lam": lam,
            "beta": beta,
            "dx": dx,
            "dy": float(np.linalg.norm(state.y_prev - y_before)),
            "dist_ref": float(np.linalg.norm(xn - ref)) if ref is not None else math.nan,
            "b_calls": cp.B.call_count,
            "d_calls": cp.D.call_count,
            "resolvent_calls": cp.A.call_count,
            "wall_ms": (time.perf_counter() - t0) * 1e3,
        }
        if opts.monitor is not None:
            row.update(opts.monitor(n, xn, avg.z, state.y_prev))
        rec.append(row)
        rec.lams.append(lam)
        rec.betas.append(beta)
        if opts.record_history:
            rec.xs.append(xn.copy())
            rec.ys.append(state.y_prev.copy())

        if np.linalg.norm(xn) > opts.divergence_bound:
            rec.x, rec.z, rec.tau = xn, avg.z, avg.tau
            raise NumericalDivergence(n, f"||x|| exceeded {opts.divergence_bound:g}", record=rec)
        if opts.tol is not None and dx <= opts.tol * max(1.0, float(np.linalg.norm(x_before))):
            rec.stopped_early = True
            break

    rec.x, rec.z, rec.tau = state.x, avg.z, avg.tau
    return rec


@dataclass(frozen=True)
class LyapunovReport:
    checked: int
    violations: tuple
    max_excess: float

    @property
    def first_violation(self):
        return self.violations[0] if self.violations else None

    @property
    def ok(self):
        return not self.violations


def lyapunov_check(rec, u, mu, eta=math.inf, atol=LYAPUNOV_ATOL):
    """Check the one-step energy inequality along a recorded extrapolated run.

    For a point ``u`` with ``B(u) = 0`` and ``0 in A(u) + D(u)`` every step
    ``n`` with ``M_n = lam_n beta_n / mu + lam_n / eta <= 1/2`` must satisfy::

        ||x_{n+1}-u||^2 - ||x_n-u||^2 + (1/2 - M_n^2) ||y_{n-1}-y_n||^2
            <= M_{n-1}^2 ||y_{n-2}-y_{n-1}||^2 + atol

    At ``n = 0`` the right-hand side is ``||x_0 - y_{-1}||^2``, which is the
    bound the step actually uses (zero for the default start).
    """
    if rec.xs is None or rec.ys is None:
        raise UsageError("lyapunov_check needs a run with record_history=True")
    u = as_vector(u)
    inv_eta = 0.0 if math.isinf(eta) else 1.0 / eta
    inv_mu = 0.0 if math.isinf(mu) else 1.0 / mu
    M = [lam * beta * inv_mu + lam * inv_eta for lam, beta in zip(rec.lams, rec.betas)]
    xs, ys = rec.xs, rec.ys  # ys[k] is y_{k-1}
    violations = []
    max_excess = -math.inf
    checked = 0
    for n in range(len(M)):
        if M[n] > 0.5:
            continue
        dy2 = float(np.sum((ys[n] - ys[n + 1]) ** 2))
        lhs = float(np.sum((xs[n + 1] - u) ** 2)) - float(np.sum((xs[n] - u) ** 2)) + (0.5 - M[n] ** 2) * dy2
        if n == 0:
            rhs = float(np.sum((xs[0] - ys[0]) ** 2))
        else:
            rhs = M[n - 1] ** 2 * float(np.sum((ys[n - 1] - ys[n]) ** 2))
        excess = lhs - rhs
        max_excess = max(max_excess, excess)
        checked += 1
        if excess > atol:
            violations.append(n)
    return LyapunovReport(checked=checked, violations=tuple(violations), max_excess=max_excess)
