"""Quick cross-checks of the library against the independent oracles.

Each check returns ``(name, ok, detail)``; used by ``fbfep selftest``.
"""

import math

import numpy as np

from fbfep import inpainting, oracle
from fbfep.core import (
    LinearMap,
    LipschitzOp,
    abs_prox,
    linear_resolvent,
    moreau_conjugate_prox,
    op_norm_estimate,
    sqnorm_prox,
)
from fbfep.schedules import INPAINT_FBF_EP, validate_schedule
from fbfep.splitting import PenaltyProblem, fbf_ep_step, init_state, run
from fbfep.schedules import PolySchedule


def _check_moreau():
    rng = np.random.default_rng(0)
    worst = 0.0
    for g in (abs_prox(), sqnorm_prox()):
        for _ in range(100):
            x = rng.standard_normal(4) * 3
            gamma = rng.uniform(0.1, 5.0)
            lhs = moreau_conjugate_prox(g, gamma, x) + gamma * g.prox(1.0 / gamma, x / gamma)
            worst = max(worst, float(np.abs(lhs - x).max()))
    return "moreau identity", worst <= 1e-12, f"max error {worst:.2e}"


def _check_adjoint():
    rng = np.random.default_rng(1)
    L = inpainting.gradient_map(7, 5)
    worst = 0.0
    for _ in range(100):
        x = rng.standard_normal(L.in_dim)
        y = rng.standard_normal(L.out_dim)
        err = abs(L.apply(x) @ y - x @ L.adjoint_apply(y)) / (np.linalg.norm(x) * np.linalg.norm(y))
        worst = max(worst, err)
    return "gradient adjoint", worst <= 1e-10, f"max relative error {worst:.2e}"


def _check_norm():
    L = inpainting.gradient_map(4, 4)
    est = op_norm_estimate(L)
    exact = float(np.linalg.svd(L.matrix(), compute_uv=False)[0])
    ok = abs(est - exact) <= 1e-6 and est < math.sqrt(8.0)
    return "gradient norm", ok, f"estimate {est:.9f}, svd {exact:.9f}"


def _check_kkt_run():
    p = np.array([0.25, 0.75])
    Q = np.diag([1.0, 2.0])
    S = np.array([[0.0, 1.0], [-1.0, 0.0]])
    K = np.array([[1.0, 1.0]])
    u = oracle.solve_small_inclusion((Q, -Q @ p), (S, -S @ p), (K, [1.0]))
    prob = PenaltyProblem(linear_resolvent(Q, -Q @ p), LipschitzOp.penalty_gradient(LinearMap.from_matrix(K), [1.0]),
                          LipschitzOp.affine(S, -S @ p), 2)
    rec = run(prob, PolySchedule(0.15, 0.51, 1.0, 0.51), [2.0, -1.0], max_iters=3000)
    err = float(np.linalg.norm(rec.x - u))
    return "inclusion vs oracle", err <= 1e-4, f"distance {err:.2e}"


def _check_step():
    prob = PenaltyProblem(linear_resolvent([[1.0]]), LipschitzOp.affine([[1.0]]), None, 1)
    s = fbf_ep_step(prob, init_state(prob, [1.0]), 0.1, 1.0)
    ok = abs(s.y_prev[0] - 0.9 / 1.1) <= 1e-15 and abs(s.x[0] - (0.1 * (1 - 0.9 / 1.1) + 0.9 / 1.1)) <= 1e-15
    return "extrapolated step", ok, f"y0={s.y_prev[0]:.6f}, x1={s.x[0]:.6f}"


def _check_psi_grad():
    rng = np.random.default_rng(2)
    mask = rng.random((3, 3)) < 0.5
    b = np.where(mask, rng.random((3, 3)), 0.0)
    x = rng.random((3, 3))
    fd = oracle.finite_diff_grad(lambda v: 0.5 * float(np.sum((mask.ravel() * (v - b.ravel())) ** 2)), x.ravel())
    err = float(np.abs(fd - inpainting.psi_grad(x, mask, b).ravel()).max())
    return "penalty gradient", err <= 1e-6, f"max error {err:.2e}"


def _check_schedule():
    rep = validate_schedule(INPAINT_FBF_EP, 1.0)
    ok = abs(rep.limsup_estimate - 0.9 * 2 ** -0.75) <= 1e-12 and not rep.condition_fbf_ep and rep.condition_fbf
    return "schedule validator", ok, f"limsup {rep.limsup_estimate:.6f}"


CHECKS = (_check_moreau, _check_adjoint, _check_norm, _check_kkt_run, _check_step, _check_psi_grad, _check_schedule)


def run_selftest():
    return [chk() for chk in CHECKS]
