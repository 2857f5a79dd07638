"""Command-line experiment runner.

Usage::

    fbfep [--config cfg.json] [--outdir DIR] [--seed N] [--iters N]
          [--algorithm {fbf,fbf_ep}] [--record-history] [COMMAND]

``COMMAND`` is one of ``inpaint``, ``run-inclusion``, ``minimax``,
``validate-schedule`` and ``selftest``; it may instead be given as the
``"command"`` field of the JSON config. Command-line flags override the
corresponding config fields.

Exit codes: 0 success, 1 selftest failure, 2 missing input image,
3 invalid config, 4 numerical divergence (partial metrics are written).
"""

import argparse
import csv
import json
import logging
import math
import os
import sys

import numpy as np

from fbfep import inpainting, pgm
from fbfep.core import LinearMap, LipschitzOp, linear_resolvent
from fbfep.errors import FBFError, NumericalDivergence
from fbfep.minimax import alg2_run, bilinear_instance, build_minimax_problem, quadratic_instance, saddle_residual
from fbfep.product import lift_problem
from fbfep.schedules import INPAINT_FBF_EP, PolySchedule, validate_schedule
from fbfep.splitting import ALGORITHMS, PenaltyProblem, run

logger = logging.getLogger("fbfep")

COMMANDS = ("inpaint", "run-inclusion", "minimax", "validate-schedule", "selftest")
METRIC_COLUMNS = ("iter", "lambda", "beta", "isnr_avg", "isnr_nonavg", "residual", "b_calls", "d_calls", "wall_ms")

EXIT_OK = 0
EXIT_SELFTEST = 1
EXIT_MISSING_IMAGE = 2
EXIT_BAD_CONFIG = 3
EXIT_DIVERGED = 4


class ConfigError(Exception):
    pass


# --- output helpers ---------------------------------------------------------


def fmt_real(v):
    """17 significant digits; NaN becomes an empty field."""
    v = float(v)
    if math.isnan(v):
        return ""
    return format(v, ".17g")


def write_metrics(path, rec):
    cols = rec.columns
    n_rows = len(rec)
    nan_col = [math.nan] * n_rows
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(METRIC_COLUMNS)
        for k in range(n_rows):
            w.writerow([
                cols["n"][k] + 1,
                fmt_real(cols["lam"][k]),
                fmt_real(cols["beta"][k]),
                fmt_real(cols.get("isnr_avg", nan_col)[k]),
                fmt_real(cols.get("isnr_nonavg", nan_col)[k]),
                fmt_real(cols["dx"][k]),
                cols["b_calls"][k],
                cols["d_calls"][k],
                fmt_real(cols["wall_ms"][k]),
            ])


def write_history(path, rec):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        dim = rec.xs[0].shape[0]
        w.writerow(["n"] + [f"x{i}" for i in range(dim)])
        for n, x in enumerate(rec.xs):
            w.writerow([n] + [fmt_real(v) for v in x])


def write_json(path, data):
    with open(path, "w") as fh:
        json.dump(data, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _vec(v):
    return [float(t) for t in np.asarray(v).ravel()]


# --- config parsing -------------------------------------------------------


def _get(cfg, key, kind, default=None, required=False):
    if key not in cfg or cfg[key] is None:
        if required:
            raise ConfigError(f"missing field {key!r}")
        return default
    try:
        return kind(cfg[key])
    except (TypeError, ValueError):
        raise ConfigError(f"field {key!r} has an invalid value {cfg[key]!r}") from None


def _schedule(cfg, default=None):
    data = cfg.get("schedule")
    if data is None:
        if default is None:
            raise ConfigError("missing field 'schedule'")
        return default
    if not isinstance(data, dict):
        raise ConfigError("schedule must be an object {c, a, d, e}")
    try:
        return PolySchedule.from_dict(data)
    except (FBFError, TypeError, ValueError) as exc:
        raise ConfigError(f"invalid schedule: {exc}") from None


def _common(cfg):
    iters = _get(cfg, "iters", int, 2000)
    if iters < 1:
        raise ConfigError("iters must be >= 1")
    algorithm = _get(cfg, "algorithm", str, "fbf_ep")
    if algorithm not in ALGORITHMS:
        raise ConfigError(f"algorithm must be one of {ALGORITHMS}")
    return iters, algorithm


def _matrix(cfg, key, required=True, default=None):
    if key not in cfg:
        if required:
            raise ConfigError(f"missing field {key!r}")
        return default
    try:
        M = np.atleast_2d(np.asarray(cfg[key], dtype=np.float64))
    except (TypeError, ValueError):
        raise ConfigError(f"field {key!r} is not a numeric matrix") from None
    return M


def _vector(cfg, key, n=None, required=True, default=None):
    if key not in cfg:
        if required:
            raise ConfigError(f"missing field {key!r}")
        return default
    try:
        v = np.asarray(cfg[key], dtype=np.float64).ravel()
    except (TypeError, ValueError):
        raise ConfigError(f"field {key!r} is not a numeric vector") from None
    if n is not None and v.shape[0] != n:
        raise ConfigError(f"field {key!r} must have length {n}")
    return v


# --- commands ---------------------------------------------------------------


def cmd_inpaint(cfg, outdir):
    iters, algorithm = _common(cfg)
    ratio = _get(cfg, "missing_ratio", float, 0.8)
    if not 0.0 <= ratio < 1.0:
        raise ConfigError("missing_ratio must lie in [0, 1)")
    seed = _get(cfg, "seed", int, 0)
    norm = _get(cfg, "norm", str, "bound")
    if norm not in ("bound", "estimate"):
        raise ConfigError("norm must be 'bound' or 'estimate'")
    schedule = _schedule(cfg, INPAINT_FBF_EP)

    image = cfg.get("image")
    if image is None:
        size = cfg.get("synthetic", [64, 64])
        try:
            M, N = (int(t) for t in size)
        except (TypeError, ValueError):
            raise ConfigError("synthetic must be [M, N]") from None
        if M < 1 or N < 1:
            raise ConfigError("synthetic size must be positive")
        clean = inpainting.synthetic_image(M, N)
    else:
        if not os.path.isfile(image):
            logger.error("input image %s not found", image)
            return EXIT_MISSING_IMAGE
        clean = pgm.read_pgm(image)
    M, N = clean.shape
    mask = inpainting.make_mask(M, N, ratio, seed)
    b = inpainting.corrupt(clean, mask)
    track = clean if np.any(clean != b) else None
    if track is None:
        logger.info("corrupted image equals the source; ISNR columns left empty")

    lifted = lift_problem(inpainting.build_inpainting_problem(b, mask, norm))
    report = validate_schedule(schedule, lifted.mu, lifted.eta)
    write_json(os.path.join(outdir, "schedule_report.json"), report.to_dict())
    pgm.write_pgm(os.path.join(outdir, "mask.pgm"), mask.astype(np.float64))
    pgm.write_pgm(os.path.join(outdir, "corrupted.pgm"), b)
    if cfg.get("record_history"):
        logger.warning("record_history is not stored for image runs (memory); ignored")

    try:
        res = inpainting.run_inpainting(track, b, mask, schedule, iters, algorithm, norm)
    except NumericalDivergence as exc:
        if exc.record is not None:
            write_metrics(os.path.join(outdir, "metrics.csv"), exc.record)
        logger.error("%s", exc)
        return EXIT_DIVERGED
    rec = res.record
    write_metrics(os.path.join(outdir, "metrics.csv"), rec)
    pgm.write_pgm(os.path.join(outdir, "recon_avg.pgm"), res.recon_avg)
    pgm.write_pgm(os.path.join(outdir, "recon_nonavg.pgm"), res.recon_nonavg)
    logger.info("final ISNR: averaged %.5f dB, non-averaged %.5f dB", res.isnr_avg, res.isnr_nonavg)
    return EXIT_OK


def _finish_vector_run(outdir, rec, extra, record_history):
    write_metrics(os.path.join(outdir, "metrics.csv"), rec)
    if record_history:
        write_history(os.path.join(outdir, "history.csv"), rec)
    write_json(os.path.join(outdir, "result.json"), extra)


def cmd_run_inclusion(cfg, outdir):
    """Affine inclusion ``0 in (Q x + a) + (S x + s) + N_{Kx=b}(x)``."""
    from fbfep.oracle import solve_small_inclusion

    iters, algorithm = _common(cfg)
    Q = _matrix(cfg, "A")
    n = Q.shape[0]
    if Q.shape != (n, n):
        raise ConfigError("A must be square")
    a = _vector(cfg, "a", n, required=False, default=np.zeros(n))
    S = _matrix(cfg, "D", required=False, default=np.zeros((n, n)))
    s = _vector(cfg, "d", n, required=False, default=np.zeros(n))
    K = _matrix(cfg, "K")
    if K.shape[1] != n:
        raise ConfigError("K must have as many columns as A")
    bb = _vector(cfg, "b", K.shape[0])
    x0 = _vector(cfg, "x0", n, required=False, default=np.zeros(n))
    Km = LinearMap.from_matrix(K)
    prob = PenaltyProblem(
        A=linear_resolvent(Q, a),
        B=LipschitzOp.penalty_gradient(Km, bb),
        D=LipschitzOp.affine(S, s) if np.any(S) or np.any(s) else None,
        dim=n,
    )
    schedule = _schedule(cfg, PolySchedule(0.3 * min(prob.mu, 1.0), 0.51, 1.0, 0.51))
    report = validate_schedule(schedule, prob.mu, prob.eta)
    write_json(os.path.join(outdir, "schedule_report.json"), report.to_dict())
    try:
        u = solve_small_inclusion((Q, a), (S, s), (K, bb))
    except FBFError as exc:
        logger.warning("oracle solve failed: %s", exc)
        u = None
    record_history = bool(cfg.get("record_history"))
    try:
        rec = run(prob, schedule, x0, max_iters=iters, algorithm=algorithm, reference=u, record_history=record_history)
    except NumericalDivergence as exc:
        if exc.record is not None:
            write_metrics(os.path.join(outdir, "metrics.csv"), exc.record)
        logger.error("%s", exc)
        return EXIT_DIVERGED
    extra = {"x": _vec(rec.x), "z": _vec(rec.z)}
    if u is not None:
        extra.update(oracle=_vec(u), dist_x=float(np.linalg.norm(rec.x - u)), dist_z=float(np.linalg.norm(rec.z - u)))
        logger.info("distance to oracle: last iterate %.3e, average %.3e", extra["dist_x"], extra["dist_z"])
    _finish_vector_run(outdir, rec, extra, record_history)
    return EXIT_OK


def cmd_minimax(cfg, outdir):
    iters, algorithm = _common(cfg)
    kind = _get(cfg, "instance", str, "quadratic")
    if kind == "bilinear":
        m = bilinear_instance()
    elif kind == "quadratic":
        P = _matrix(cfg, "P")
        Qm = _matrix(cfg, "Q")
        C = _matrix(cfg, "C", required=False, default=np.zeros((P.shape[0], Qm.shape[0])))
        try:
            m = quadratic_instance(
                P, Qm, C,
                p=cfg.get("p"), q=cfg.get("q"),
                lo=_get(cfg, "lo", float, -math.inf), hi=_get(cfg, "hi", float, math.inf),
                K1=cfg.get("K1"), b1=cfg.get("b1"), K2=cfg.get("K2"), b2=cfg.get("b2"),
            )
        except FBFError as exc:
            raise ConfigError(str(exc)) from None
    else:
        raise ConfigError("instance must be 'bilinear' or 'quadratic'")
    prob = build_minimax_problem(m)
    x0 = _vector(cfg, "x0", m.n1, required=False, default=np.zeros(m.n1))
    y0 = _vector(cfg, "y0", m.n2, required=False, default=np.zeros(m.n2))
    inv = 1.0 / prob.mu + (0.0 if math.isinf(prob.eta) else 1.0 / prob.eta)
    schedule = _schedule(cfg, PolySchedule(0.45 / inv, 0.51, 1.0, 0.51))
    report = validate_schedule(schedule, prob.mu, prob.eta)
    write_json(os.path.join(outdir, "schedule_report.json"), report.to_dict())
    record_history = bool(cfg.get("record_history"))
    try:
        rec = alg2_run(m, schedule, (x0, y0), max_iters=iters, algorithm=algorithm, record_history=record_history)
    except NumericalDivergence as exc:
        if exc.record is not None:
            write_metrics(os.path.join(outdir, "metrics.csv"), exc.record)
        logger.error("%s", exc)
        return EXIT_DIVERGED
    xz, yz = m.split(rec.z)
    xl, yl = m.split(rec.x)
    extra = {
        "x": _vec(xl), "y": _vec(yl), "x_avg": _vec(xz), "y_avg": _vec(yz),
        "saddle_residual_avg": saddle_residual(m, xz, yz),
        "saddle_residual_last": saddle_residual(m, xl, yl),
    }
    logger.info("saddle residual: average %.3e, last iterate %.3e", extra["saddle_residual_avg"], extra["saddle_residual_last"])
    _finish_vector_run(outdir, rec, extra, record_history)
    return EXIT_OK


def cmd_validate_schedule(cfg, outdir):
    schedule = _schedule(cfg)
    mu = _get(cfg, "mu", float, required=True)
    eta = _get(cfg, "eta", float, math.inf)
    horizon = _get(cfg, "horizon", int, 10_000)
    try:
        report = validate_schedule(schedule, mu, eta, horizon)
    except FBFError as exc:
        raise ConfigError(str(exc)) from None
    write_json(os.path.join(outdir, "schedule_report.json"), report.to_dict())
    print(json.dumps(report.to_dict(), sort_keys=True))
    return EXIT_OK


def cmd_selftest(cfg, outdir):
    from fbfep.selftest import run_selftest

    failures = run_selftest()
    for name, ok, detail in failures:
        print(f"{'PASS' if ok else 'FAIL'} {name}: {detail}")
    return EXIT_OK if all(ok for _, ok, _ in failures) else EXIT_SELFTEST


HANDLERS = {
    "inpaint": cmd_inpaint,
    "run-inclusion": cmd_run_inclusion,
    "minimax": cmd_minimax,
    "validate-schedule": cmd_validate_schedule,
    "selftest": cmd_selftest,
}


# --- entry point ---------------------------------------------------------------


def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON config file")
    common.add_argument("--outdir", help="output directory (default: current directory)")
    common.add_argument("--seed", type=int, help="mask seed")
    common.add_argument("--iters", type=int, help="iteration budget")
    common.add_argument("--algorithm", choices=ALGORITHMS)
    common.add_argument("--record-history", action="store_true", default=None)
    common.add_argument("-v", "--verbose", action="store_true")
    p = argparse.ArgumentParser(prog="fbfep", parents=[common], description=__doc__.split("\n\n")[0])
    sub = p.add_subparsers(dest="command")
    for name in COMMANDS:
        sub.add_parser(name, parents=[common])
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)
    try:
        cfg = {}
        if args.config:
            try:
                with open(args.config) as fh:
                    cfg = json.load(fh)
            except OSError as exc:
                raise ConfigError(f"cannot read config: {exc}") from None
            except json.JSONDecodeError as exc:
                raise ConfigError(f"config is not valid JSON: {exc}") from None
            if not isinstance(cfg, dict):
                raise ConfigError("config must be a JSON object")
        command = args.command or cfg.get("command")
        if command is None:
            raise ConfigError("no command given (argument or config 'command' field)")
        if args.command and cfg.get("command") not in (None, args.command):
            raise ConfigError(f"command {args.command!r} conflicts with config command {cfg['command']!r}")
        if command not in HANDLERS:
            raise ConfigError(f"unknown command {command!r}")
        for key in ("seed", "iters", "algorithm", "record_history"):
            val = getattr(args, key)
            if val is not None:
                cfg[key] = val
        # image paths are relative to the config file
        if args.config and isinstance(cfg.get("image"), str) and not os.path.isabs(cfg["image"]):
            cfg["image"] = os.path.join(os.path.dirname(os.path.abspath(args.config)), cfg["image"])
        outdir = args.outdir or cfg.get("outdir") or "."
        os.makedirs(outdir, exist_ok=True)
        return HANDLERS[command](cfg, outdir)
    except ConfigError as exc:
        logger.error("invalid config: %s", exc)
        return EXIT_BAD_CONFIG
    except pgm.PGMError as exc:
        logger.error("cannot read image: %s", exc)
        return EXIT_BAD_CONFIG


if __name__ == "__main__":
    sys.exit(main())
