"""Forward-backward-forward splitting with extrapolation from the past under a penalty scheme."""

from fbfep.core import (
    ConjugateProx,
    CountedOp,
    LinearMap,
    LipschitzOp,
    ProxOracle,
    moreau_conjugate_prox,
    op_norm_estimate,
    prox_box,
    proj_affine,
    wrap_counted,
)
from fbfep.errors import (
    DimensionError,
    FBFError,
    InfeasibleError,
    NoUniqueSolutionError,
    NumericalDivergence,
    ParameterError,
    ScheduleIndexError,
    UsageError,
)
from fbfep.schedules import PolySchedule, ScheduleReport, eval_schedule, validate_schedule
from fbfep.splitting import (
    ErgodicAverage,
    IterState,
    PenaltyProblem,
    RunOptions,
    RunRecord,
    ergodic_update,
    fbf_ep_step,
    fbf_step,
    lyapunov_check,
    run,
)

__version__ = "0.1.0"
