"""Verification battery: every analytic derivative against the FD oracle.

The battery covers model Jacobians, the discharge Jacobian, all six loss
gradients, mass balance and the parameter transforms. It also times the
analytic Jacobian against the Richardson FD Jacobian.

All FD work in parameter space perturbs the unconstrained coordinates and
replays the nominal run's step sequence. Perturbed discharges are memoised,
so the six loss gradients reuse the simulations made for the Jacobian.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional

import numpy as np

from .errors import GradHydError
from .losses import LOSS_NAMES, HuberConfig, LossFunction
from .models import check_dynamics_consistency
from .numdiff import DiffConfig, fd_gradient, fd_jacobian
from .problem import CalibrationProblem
from .solver import SolverConfig, integrate_augmented, volume_balance
from .timeseries import ForcingSeries
from .transforms import expit, logit, to_physical, to_unconstrained

__all__ = ["CheckResult", "VerifyConfig", "VerifyReport", "run_battery", "MemoMap", "relative_l2"]

SMOOTH_LOSSES = ("gls", "nse", "kge", "huber")


@dataclass(frozen=True)
class CheckResult:
    name: str
    passed: Optional[bool]  # None = skipped
    measured: float
    tolerance: float
    detail: str = ""

    @property
    def status(self) -> str:
        return "skip" if self.passed is None else ("pass" if self.passed else "fail")


@dataclass(frozen=True)
class VerifyConfig:
    seed: int = 0
    n_dynamics_samples: int = 100
    n_mass_samples: int = 1000
    solver: SolverConfig = SolverConfig()
    diff: DiffConfig = DiffConfig()
    dynamics_tol: float = 1e-6
    identity_tol: float = 1e-12
    jacobian_tol: float = 1e-3
    jacobian_target: float = 1e-5
    smooth_grad_tol: float = 1e-4
    kinked_grad_tol: float = 1e-3
    roundtrip_tol: float = 1e-12
    chain_tol: float = 1e-8
    speedup_min: float = 10.0
    timing_repeats: int = 3
    huber: HuberConfig = HuberConfig()


@dataclass
class VerifyReport:
    model: str
    checks: List[CheckResult] = field(default_factory=list)
    timing: Dict[str, float] = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return all(c.passed is not False for c in self.checks)

    def check(self, name: str) -> CheckResult:
        for c in self.checks:
            if c.name == name:
                return c
        raise KeyError(name)

    def rows(self):
        """Deterministic rows; wall-clock figures are kept out of them."""
        for c in self.checks:
            yield (c.name, c.status, c.measured, c.tolerance, c.detail)


class MemoMap:
    """Cache ``f(v)`` by the exact bytes of ``v``; counts real evaluations."""

    def __init__(self, f: Callable):
        self.f = f
        self.cache: Dict[bytes, np.ndarray] = {}
        self.calls = 0

    def __call__(self, v):
        key = np.asarray(v, dtype=np.float64).tobytes()
        out = self.cache.get(key)
        if out is None:
            self.calls += 1
            out = self.f(v)
            self.cache[key] = out
        return out


def relative_l2(a, b) -> float:
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    den = np.linalg.norm(b)
    return float(np.linalg.norm(a - b) / den) if den > 0 else float(np.linalg.norm(a - b))


def _dynamics_checks(model, cfg: VerifyConfig, rng) -> List[CheckResult]:
    worst_x = worst_th = 0.0
    n_flagged = 0
    worst_id = 0.0
    for _ in range(cfg.n_dynamics_samples):
        theta = model.space.from_unit(rng.uniform(0.02, 0.98, model.d))
        x = model.sample_state(theta, rng)
        p, ep = rng.uniform(0.0, 30.0), rng.uniform(0.0, 6.0)
        rep = check_dynamics_consistency(model, theta, x, p, ep, cfg.diff)
        skip = {(k, i, j) for k, i, j in rep.flagged}
        ex = np.abs(rep.analytic.jf_x - rep.fd_x)
        et = np.abs(rep.analytic.jf_theta - rep.fd_theta)
        for k, i, j in skip:
            (ex if k == "x" else et)[i, j] = 0.0
        n_flagged += len(skip)
        worst_x = max(worst_x, float(ex.max()))
        worst_th = max(worst_th, float(et.max()))
    for _ in range(cfg.n_mass_samples):
        theta = model.space.from_unit(rng.uniform(0.0, 1.0, model.d))
        x = model.sample_state(theta, rng)
        p, ep = rng.uniform(0.0, 30.0), rng.uniform(0.0, 6.0)
        ev = model.dynamics(x, theta, p, ep)
        worst_id = max(worst_id, abs(float(ev.f.sum()) + ev.et_actual - model.external_input(p, ep)))
    detail = f"{cfg.n_dynamics_samples} interior samples, {n_flagged} kink entries excluded"
    return [
        CheckResult("dynamics_jf_x", worst_x <= cfg.dynamics_tol, worst_x, cfg.dynamics_tol, detail),
        CheckResult("dynamics_jf_theta", worst_th <= cfg.dynamics_tol, worst_th, cfg.dynamics_tol, detail),
        CheckResult("mass_identity", worst_id <= cfg.identity_tol, worst_id, cfg.identity_tol,
                    f"{cfg.n_mass_samples} samples of sum(f) + et - input"),
    ]


def _transform_checks(model, cfg: VerifyConfig, rng) -> List[CheckResult]:
    space = model.space
    worst_rt = worst_chain = 0.0
    for _ in range(100):
        v = rng.uniform(-8.0, 8.0, space.d)
        pt = to_physical(v, space)
        back = to_unconstrained(pt.theta, space)
        worst_rt = max(worst_rt, float(np.max(np.abs(back.vartheta - v))))
        worst_rt = max(worst_rt, float(np.max(np.abs(space.to_unit(pt.theta) - pt.theta_bar))))
        fd = fd_gradient(lambda w: float(np.sum(to_physical(w, space).theta)), v, cfg.diff)
        worst_chain = max(worst_chain, float(np.max(np.abs(fd - pt.chain) / np.maximum(1.0, np.abs(pt.chain)))))
    u = rng.uniform(0.0, 1.0, 1000)
    worst_rt = max(worst_rt, float(np.max(np.abs(expit(logit(u)) - u))))
    return [
        CheckResult("transform_roundtrip", worst_rt <= cfg.roundtrip_tol, worst_rt, cfg.roundtrip_tol,
                    "vartheta -> theta -> vartheta and logit/expit"),
        CheckResult("transform_chain", worst_chain <= cfg.chain_tol, worst_chain, cfg.chain_tol,
                    "d theta / d vartheta vs FD, relative"),
    ]


def _gradient_check(name, analytic, fd, cfg: VerifyConfig) -> CheckResult:
    if name in SMOOTH_LOSSES:
        err = relative_l2(fd, analytic)
        return CheckResult(f"gradient_{name}", err <= cfg.smooth_grad_tol, err, cfg.smooth_grad_tol,
                           "relative L2 in vartheta")
    err = float(np.max(np.abs(fd - analytic)))
    big = np.maximum(np.abs(fd), np.abs(analytic)) > cfg.kinked_grad_tol
    signs_ok = bool(np.all(np.sign(fd[big]) == np.sign(analytic[big])))
    detail = "max abs in vartheta; signs " + ("agree" if signs_ok else "DISAGREE")
    return CheckResult(f"gradient_{name}", signs_ok and err <= cfg.kinked_grad_tol, err, cfg.kinked_grad_tol, detail)


def run_battery(model, forcing: ForcingSeries, y=None, cfg: VerifyConfig = VerifyConfig(),
                theta_unit=None) -> VerifyReport:
    """Run every check for ``model`` on ``forcing`` (and observations ``y``).

    Pipeline checks are made at ``theta_unit`` (unit-cube coordinates),
    drawn from ``cfg.seed`` if not given. Without observations the loss
    gradient checks are skipped.
    """
    rng = np.random.default_rng(cfg.seed)
    report = VerifyReport(model.name)
    report.checks += _dynamics_checks(model, cfg, rng)
    report.checks += _transform_checks(model, cfg, rng)

    if theta_unit is None:
        theta_unit = rng.uniform(0.2, 0.8, model.d)
    v = logit(np.asarray(theta_unit, dtype=np.float64))
    problem = CalibrationProblem(model, forcing, solver=cfg.solver)

    try:
        t0 = time.perf_counter()
        ev = problem.evaluate(v)
        t_analytic = time.perf_counter() - t0
        for _ in range(cfg.timing_repeats - 1):
            t0 = time.perf_counter()
            problem.evaluate(v)
            t_analytic = min(t_analytic, time.perf_counter() - t0)
    except GradHydError as exc:
        report.checks.append(CheckResult("simulation", False, float("nan"), 0.0, str(exc)))
        return report

    bal = float(np.max(np.abs(volume_balance(ev.trajectory))))
    bal_tol = forcing.n_total * cfg.solver.abstol
    report.checks.append(CheckResult("mass_balance", bal <= bal_tol, bal, bal_tol,
                                     "max |input - ET - storage change| over the run"))

    # FD timing includes the nominal run that provides the frozen step sequence
    t0 = time.perf_counter()
    schedule = integrate_augmented(model, ev.point.theta, forcing, cfg.solver).schedule
    q_of = MemoMap(problem.discharge_map(schedule))
    J_fd = fd_jacobian(q_of, v, cfg.diff)
    t_fd = time.perf_counter() - t0
    mad = float(np.mean(np.abs(ev.jac - J_fd)))
    report.checks.append(CheckResult(
        "jacobian_fd", mad <= cfg.jacobian_tol, mad, cfg.jacobian_tol,
        f"mean |J_a - J_fd| in vartheta ({'meets' if mad <= cfg.jacobian_target else 'misses'} "
        f"target {cfg.jacobian_target:g}; {q_of.calls} FD simulations)"))

    speedup = t_fd / t_analytic
    report.timing.update(analytic_s=t_analytic, fd_s=t_fd, speedup=speedup)
    report.checks.append(CheckResult("speedup", speedup >= cfg.speedup_min, float("nan"), cfg.speedup_min,
                                     "analytic vs Richardson FD Jacobian wall-clock; see timing"))

    if y is None:
        for name in LOSS_NAMES:
            report.checks.append(CheckResult(f"gradient_{name}", None, float("nan"), 0.0, "no observations"))
        report.checks.append(CheckResult("transform_gradient", None, float("nan"), 0.0, "no observations"))
        return report

    for name in LOSS_NAMES:
        try:
            loss = LossFunction(name, y, huber=cfg.huber)
            g_a = ev.jac.T @ loss(ev.q).delta
            g_fd = fd_gradient(lambda w: loss(q_of(w)).value, v, cfg.diff)
        except GradHydError as exc:
            report.checks.append(CheckResult(f"gradient_{name}", False, float("nan"), 0.0, str(exc)))
            continue
        report.checks.append(_gradient_check(name, g_a, g_fd, cfg))
        if name == "gls":
            # analytic theta-gradient pushed through the chain factors vs FD taken in vartheta
            g_theta = ev.jac_theta.T @ loss(ev.q).delta
            err = relative_l2(g_fd, g_theta * ev.point.chain)
            tgrad = CheckResult("transform_gradient", err <= cfg.smooth_grad_tol, err, cfg.smooth_grad_tol,
                                "FD in vartheta vs rescaled theta-gradient (gls)")
    report.checks.append(tgrad)
    return report
