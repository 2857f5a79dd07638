"""Step-size and penalty schedules and their convergence conditions.

A :class:`PolySchedule` produces ``lam_n = c * (d*n)**(-a)`` and
``beta_n = n**e`` for ``n >= 1``. The solvers consume index ``n + 1`` at
algorithm step ``n`` because ``n = 0`` has no finite value for ``a > 0``.
"""

import logging
import math
from dataclasses import asdict, dataclass

from fbfep.errors import ParameterError, ScheduleIndexError

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class PolySchedule:
    c: float
    a: float
    d: float = 1.0
    e: float = 0.0

    def __post_init__(self):
        if not (self.c > 0 and math.isfinite(self.c)):
            raise ParameterError("c must be positive and finite")
        if not (self.d > 0 and math.isfinite(self.d)):
            raise ParameterError("d must be positive and finite")
        if not (math.isfinite(self.a) and math.isfinite(self.e)):
            raise ParameterError("exponents must be finite")

    def __call__(self, n):
        return eval_schedule(self, n)

    def to_dict(self):
        return asdict(self)

    @classmethod
    def from_dict(cls, data):
        try:
            return cls(float(data["c"]), float(data["a"]), float(data.get("d", 1.0)), float(data.get("e", 0.0)))
        except KeyError as exc:
            raise ParameterError(f"schedule is missing field {exc}") from None


# schedules of the TV inpainting experiment
INPAINT_FBF = PolySchedule(c=0.9, a=0.75, d=1.0, e=0.75)
INPAINT_FBF_EP = PolySchedule(c=0.9, a=0.75, d=2.0, e=0.75)


def eval_schedule(s, n):
    """Return ``(lam_n, beta_n)`` for the 1-based index ``n``."""
    if n < 1:
        raise ScheduleIndexError(f"schedules are 1-based, got n={n}")
    lam = s.c * (s.d * n) ** (-s.a)
    beta = float(n) ** s.e
    return lam, beta


@dataclass(frozen=True)
class ScheduleReport:
    limsup_estimate: float
    window_sup: float
    in_l2_not_l1: bool
    condition_fbf_ep: bool
    condition_fbf: bool
    horizon: int
    mu: float
    eta: float

    def to_dict(self):
        d = asdict(self)
        # JSON has no infinity; encode it as a string
        for key in ("limsup_estimate", "window_sup", "eta"):
            if math.isinf(d[key]):
                d[key] = "inf"
        return d


def _analytic_limsup(s, mu, eta):
    """Exact ``limsup (lam_n beta_n / mu + lam_n / eta)`` for a polynomial schedule."""
    scale = s.c * s.d ** (-s.a)
    if math.isinf(mu):
        penalty = 0.0
    elif s.e > s.a:
        penalty = math.inf
    elif s.e == s.a:
        penalty = scale / mu
    else:
        penalty = 0.0
    if math.isinf(eta):
        step = 0.0
    elif s.a > 0:
        step = 0.0
    elif s.a == 0:
        step = scale / eta
    else:
        step = math.inf
    return penalty + step


def validate_schedule(s, mu, eta=math.inf, horizon=10_000):
    """Check a schedule against the step-size conditions.

    ``limsup_estimate`` is the analytic limit for the polynomial family;
    ``window_sup`` is the numerical maximum over ``n`` in
    ``[horizon/2, horizon]`` and is reported for reference only.
    ``eta = inf`` encodes ``D = 0`` and ``mu = inf`` encodes ``B = 0``. A violated extrapolation condition is
    logged as a warning, never raised.
    """
    if not mu > 0:
        raise ParameterError("mu must be positive")
    if not eta > 0:
        raise ParameterError("eta must be positive (use inf for D = 0)")
    if horizon < 100:
        raise ParameterError("horizon must be at least 100")
    limsup = _analytic_limsup(s, mu, eta)
    window = 0.0
    for n in range(horizon // 2, horizon + 1):
        lam, beta = eval_schedule(s, n)
        val = (0.0 if math.isinf(mu) else lam * beta / mu) + (0.0 if math.isinf(eta) else lam / eta)
        window = max(window, val)
    report = ScheduleReport(
        limsup_estimate=limsup,
        window_sup=window,
        in_l2_not_l1=0.5 < s.a <= 1.0,
        condition_fbf_ep=limsup < 0.5,
        condition_fbf=limsup < 1.0,
        horizon=int(horizon),
        mu=float(mu),
        eta=float(eta),
    )
    if not report.condition_fbf_ep:
        logger.warning(
            "schedule %s: limsup(lam*beta/mu + lam/eta) = %.6g is not < 1/2; "
            "the extrapolated method has no convergence guarantee",
            s, limsup,
        )
    return report
