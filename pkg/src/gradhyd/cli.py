"""Command-line interface.

    gradhyd <simulate|jacobian|gradient|calibrate|verify|synthetic>
            [--config PATH] [--data PATH] [--out DIR] [--verify] [--seed N]

Exit codes: 0 success, 1 verification or run failure, 2 usage or config
error, 3 data error. All CSV outputs are deterministic for fixed inputs;
wall-clock figures go to stdout and ``timing.txt`` only.
"""

from __future__ import annotations

import argparse
import sys
import time
from pathlib import Path
from typing import List, Optional

import numpy as np

from . import __version__
from .config import RunConfig, load_config
from .dataio import read_forcing_file, write_csv, write_forcing_csv, write_truth
from .errors import ConfigError, DataError, GradHydError
from .losses import loss_kge, loss_nse, make_loss
from .numdiff import DiffConfig
from .optimizers import gradient_descent, levenberg_marquardt, multi_start
from .problem import CalibrationProblem
from .synthetic import SyntheticSpec, generate_synthetic
from .transforms import to_physical, to_unconstrained
from .verify import VerifyConfig, run_battery

__all__ = ["main", "build_parser"]

EXIT_OK, EXIT_FAIL, EXIT_CONFIG, EXIT_DATA = 0, 1, 2, 3


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="INI run configuration")
    common.add_argument("--data", help="forcing CSV: time,precip,pet[,discharge]")
    common.add_argument("--out", default=".", help="output directory (default: current)")
    common.add_argument("--seed", type=int, help="overrides [run] seed")
    common.add_argument("--model", help="overrides [run] model")
    common.add_argument("--loss", help="overrides [run] loss")
    common.add_argument("--optimizer", help="overrides [run] optimizer")
    common.add_argument("--spin-up", type=int, dest="spin_up", help="overrides [run] spin_up")
    common.add_argument("--n-starts", type=int, dest="n_starts", help="overrides [run] n_starts")
    common.add_argument("--verify", action="store_true",
                        help="jacobian: also write the FD Jacobian and a difference summary")

    parser = argparse.ArgumentParser(prog="gradhyd", description="Gradient-based calibration of conceptual rainfall-runoff models.")
    parser.add_argument("--version", action="version", version=f"gradhyd {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("simulate", parents=[common], help="write simulated discharge t,q")
    sub.add_parser("jacobian", parents=[common], help="write the discharge Jacobian")
    sub.add_parser("gradient", parents=[common], help="analytic vs FD loss gradient")
    sub.add_parser("calibrate", parents=[common], help="multi-start calibration")
    sub.add_parser("verify", parents=[common], help="run the verification battery")
    syn = sub.add_parser("synthetic", parents=[common], help="generate synthetic forcing and truth")
    syn.add_argument("--n-total", type=int, default=730, dest="n_total")
    syn.add_argument("--truth-unit", dest="truth_unit",
                     help="comma-separated unit-cube truth (default: midpoint)")
    return parser


def _config(args) -> RunConfig:
    cfg = load_config(args.config)
    return cfg.with_overrides(seed=args.seed, model=args.model and args.model.lower(),
                              loss=args.loss and args.loss.lower(),
                              optimizer=args.optimizer and args.optimizer.lower(),
                              spin_up=args.spin_up, n_starts=args.n_starts)


def _load(args, cfg: RunConfig, need_obs: bool):
    if not args.data:
        raise ConfigError("--data is required")
    if not Path(args.data).is_file():
        raise ConfigError(f"data file {args.data} does not exist")
    ff = read_forcing_file(args.data)
    forcing = ff.forcing(cfg.spin_up)
    obs = ff.observed(cfg.spin_up)
    if need_obs and obs is None:
        raise DataError(f"{args.data} has no discharge column")
    return ff, forcing, obs


def _problem(cfg: RunConfig, forcing, obs, with_loss: bool) -> CalibrationProblem:
    model = cfg.build_model()
    loss = None
    if with_loss:
        loss = make_loss(cfg.loss, obs.y, cfg.build_gls_weights() if cfg.loss == "gls" else None, cfg.huber)
    return CalibrationProblem(model, forcing, loss, cfg.solver)


def _theta_header(d: int) -> List[str]:
    return [f"theta_{j + 1}" for j in range(d)]


def cmd_simulate(args) -> int:
    cfg = _config(args)
    ff, forcing, _ = _load(args, cfg, need_obs=False)
    problem = _problem(cfg, forcing, None, False)
    q = problem.simulate(_theta0(cfg, problem))
    out = Path(args.out)
    write_csv(out / "simulation.csv", ("t", "q"), zip(ff.time[cfg.spin_up:], q))
    print(f"wrote {out / 'simulation.csv'} ({q.size} rows)")
    return EXIT_OK


def _theta0(cfg: RunConfig, problem) -> np.ndarray:
    """Parameters for simulate/jacobian/gradient: ``[parameters]`` over the box midpoint."""
    return cfg.theta(problem.space)


def cmd_jacobian(args) -> int:
    cfg = _config(args)
    ff, forcing, _ = _load(args, cfg, need_obs=False)
    problem = _problem(cfg, forcing, None, False)
    v = to_unconstrained(_theta0(cfg, problem), problem.space).vartheta
    ev = problem.evaluate(v)
    names = problem.space.names
    out = Path(args.out)
    write_csv(out / "jacobian.csv", names, ev.jac_theta)
    print(f"wrote {out / 'jacobian.csv'} ({ev.jac_theta.shape[0]}x{ev.jac_theta.shape[1]}, d q / d theta)")
    if not args.verify:
        return EXIT_OK
    # FD in vartheta, mapped back to theta through the chain factors
    t0 = time.perf_counter()
    J_fd = problem.fd_jacobian(v, DiffConfig()) / ev.point.chain
    t_fd = time.perf_counter() - t0
    write_csv(out / "jacobian_fd.csv", names, J_fd)
    diff = np.abs(ev.jac_theta - J_fd)
    rows = [("mean_abs_diff", float(diff.mean())), ("max_abs_diff", float(diff.max()))]
    rows += [(f"mean_abs_diff_{n}", float(diff[:, j].mean())) for j, n in enumerate(names)]
    write_csv(out / "jacobian_diff.csv", ("statistic", "value"), rows)
    print(f"mean |J_a - J_fd| = {rows[0][1]:.3e}, max = {rows[1][1]:.3e}; FD Jacobian took {t_fd:.2f} s")
    return EXIT_OK


def cmd_gradient(args) -> int:
    cfg = _config(args)
    ff, forcing, obs = _load(args, cfg, need_obs=True)
    problem = _problem(cfg, forcing, obs, True)
    theta = _theta0(cfg, problem)
    v = to_unconstrained(theta, problem.space).vartheta
    ev = problem.evaluate(v)
    chain = ev.point.chain
    g_theta = ev.jac_theta.T @ ev.loss.delta
    g_fd = problem.fd_gradient(v, DiffConfig()) / chain
    rows = [(n, a, f, abs(a - f)) for n, a, f in zip(problem.space.names, g_theta, g_fd)]
    out = Path(args.out)
    write_csv(out / "gradient.csv", ("name", "analytic", "fd", "abs_diff"), rows)
    print(f"loss {cfg.loss} = {ev.loss.value:.10g}; wrote {out / 'gradient.csv'}")
    for r in rows:
        print(f"  {r[0]:>10s}  {r[1]: .10e}  {r[2]: .10e}  {r[3]:.2e}")
    return EXIT_OK


def cmd_calibrate(args) -> int:
    cfg = _config(args)
    ff, forcing, obs = _load(args, cfg, need_obs=True)
    problem = _problem(cfg, forcing, obs, True)
    if cfg.optimizer == "lm":
        runner = lambda v0: levenberg_marquardt(problem.lm_objective, v0, cfg.lm)  # noqa: E731
    else:
        runner = lambda v0: gradient_descent(problem.objective, v0, cfg.gd)  # noqa: E731
    t0 = time.perf_counter()
    res = multi_start(runner, cfg.n_starts, cfg.seed, problem.d, cfg.n_jobs)
    elapsed = time.perf_counter() - t0
    space = problem.space
    out = Path(args.out)
    d = problem.d

    trace_rows = []
    for i, tr in enumerate(res.traces):
        for r in tr.records:
            trace_rows.append((i + 1, r.iteration, r.loss, r.grad_norm, r.step_ctrl,
                               *to_physical(r.vartheta, space).theta))
    write_csv(out / "trace.csv", ["trial", "iter", "loss", "grad_norm", "step_ctrl"] + _theta_header(d), trace_rows)

    summary = []
    for rank, i in enumerate(res.ranking, start=1):
        tr = res.traces[i]
        theta = to_physical(tr.final_vartheta, space).theta if tr.final_vartheta is not None else np.full(d, np.nan)
        summary.append((rank, i + 1, tr.final_loss, tr.n_iterations, tr.termination, *theta))
    write_csv(out / "summary.csv", ["rank", "trial", "final_loss", "iterations", "termination"] + _theta_header(d), summary)

    best = res.best
    if best.final_vartheta is None:
        print("no trial produced a finite objective", file=sys.stderr)
        return EXIT_FAIL
    theta_best = to_physical(best.final_vartheta, space).theta
    q = problem.simulate(theta_best)
    nse = 1.0 - loss_nse(obs.y, q).value
    kge = 1.0 - loss_kge(obs.y, q).value
    write_csv(out / "fit.csv", ("metric", "value"),
              [("loss", best.final_loss), ("nse", nse), ("kge", kge)]
              + [(n, t) for n, t in zip(space.names, theta_best)])
    write_csv(out / "best_fit.csv", ("t", "observed", "simulated"), zip(ff.time[cfg.spin_up:], obs.y, q))
    print(f"{cfg.n_starts} trials ({cfg.optimizer}, {cfg.loss}) in {elapsed:.1f} s; "
          f"best trial {res.ranking[0] + 1}: loss {best.final_loss:.6g}, NSE {nse:.6f}, KGE {kge:.6f}")
    return EXIT_OK


def cmd_verify(args) -> int:
    cfg = _config(args)
    model = cfg.build_model()
    if args.data:
        _, forcing, obs = _load(args, cfg, need_obs=False)
        y = None if obs is None else obs.y
    else:
        spec = SyntheticSpec(seed=cfg.seed)
        data = generate_synthetic(spec, model)
        forcing, y = data.forcing, data.observed
        print(f"no --data: using synthetic {model.name} forcing (seed {cfg.seed}, {spec.n_total} steps)")
    vcfg = VerifyConfig(seed=cfg.seed, solver=cfg.solver, huber=cfg.huber)
    report = run_battery(model, forcing, y, vcfg)
    out = Path(args.out)
    write_csv(out / "verify.csv", ("check", "status", "measured", "tolerance", "detail"), report.rows())
    t = report.timing
    for name, status, measured, tol, detail in report.rows():
        print(f"{status.upper():4s}  {name:20s}  measured {measured:.3e}  tol {tol:.1e}  {detail}")
    if t:
        timing = (f"analytic Jacobian {t['analytic_s']:.4f} s, Richardson FD Jacobian {t['fd_s']:.4f} s, "
                  f"speedup {t['speedup']:.1f}x")
        print(timing)
        (out / "timing.txt").write_text(timing + "\n", encoding="utf-8")
    print("all checks passed" if report.passed else "VERIFICATION FAILED")
    return EXIT_OK if report.passed else EXIT_FAIL


def cmd_synthetic(args) -> int:
    cfg = _config(args)
    model = cfg.build_model()
    unit = None
    if args.truth_unit:
        try:
            unit = tuple(float(u) for u in args.truth_unit.split(","))
        except ValueError:
            raise ConfigError("--truth-unit must be comma-separated numbers") from None
        if len(unit) != model.d or not all(0.0 <= u <= 1.0 for u in unit):
            raise ConfigError(f"--truth-unit needs {model.d} values in [0, 1]")
    spin_up = cfg.spin_up if args.spin_up is not None or args.config else min(365, args.n_total // 2)
    spec = SyntheticSpec(seed=cfg.seed, n_total=args.n_total, spin_up=spin_up, theta_star_unit=unit)
    data = generate_synthetic(spec, model)
    out = Path(args.out)
    write_forcing_csv(out / "forcing.csv", data.forcing, data.discharge)
    write_truth(out / "truth.csv", model.space.names, data.theta_star)
    (out / "run.ini").write_text(
        f"[run]\nmodel = {model.name}\nspin_up = {spin_up}\nseed = {cfg.seed}\n", encoding="utf-8")
    print(f"wrote forcing.csv, truth.csv and run.ini to {out}")
    return EXIT_OK


COMMANDS = {
    "simulate": cmd_simulate,
    "jacobian": cmd_jacobian,
    "gradient": cmd_gradient,
    "calibrate": cmd_calibrate,
    "verify": cmd_verify,
    "synthetic": cmd_synthetic,
}


def main(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return COMMANDS[args.command](args)
    except ConfigError as exc:
        print(f"gradhyd: config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except DataError as exc:
        print(f"gradhyd: data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except GradHydError as exc:
        print(f"gradhyd: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_FAIL


if __name__ == "__main__":
    sys.exit(main())
