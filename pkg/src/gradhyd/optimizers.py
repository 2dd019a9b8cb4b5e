"""Gradient descent and Levenberg-Marquardt in unconstrained parameter space.

Both optimizers take an objective ``vartheta -> result``. For gradient
descent the result provides ``loss`` and ``grad`` (a ``(loss, grad)`` tuple
works). Levenberg-Marquardt additionally needs ``gn``, the Gauss-Newton
curvature ``J^T M J`` of the least-squares loss; a ``(loss, grad, gn)``
tuple works. A :class:`~gradhyd.errors.SolverError` raised by the objective
at a trial point counts as an infinite loss, so the step is rejected.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, List, Optional

import numpy as np

from .errors import ConfigError, GradHydError, NonFiniteObjective, SingularNormalEquations, SolverError
from .transforms import logit

__all__ = [
    "GdConfig",
    "LmConfig",
    "TraceRecord",
    "OptimizerTrace",
    "gradient_descent",
    "levenberg_marquardt",
    "MultiStartResult",
    "multi_start",
    "GRADIENT_TOLERANCE",
    "LOSS_TOLERANCE",
    "MAX_ITERATIONS",
    "LINE_SEARCH_FAILED",
    "DAMPING_OVERFLOW",
    "OBJECTIVE_FAILED",
]

GRADIENT_TOLERANCE = "gradient tolerance"
LOSS_TOLERANCE = "loss tolerance"
MAX_ITERATIONS = "max iterations"
LINE_SEARCH_FAILED = "line search failed"
DAMPING_OVERFLOW = "damping overflow"
OBJECTIVE_FAILED = "objective failed"

_LAMBDA_MAX = 1e16
_DIAG_FLOOR = 1e-12


@dataclass(frozen=True)
class GdConfig:
    k_max: int = 500
    eta0: float = 0.1
    armijo_c1: float = 1e-4
    shrink: float = 0.5
    max_backtracks: int = 40
    tol_g: float = 1e-6
    tol_loss_rel: float = 1e-9

    def __post_init__(self):
        if not 0 < self.shrink < 1:
            raise ConfigError("shrink must lie in (0, 1)")
        if min(self.k_max, self.eta0, self.armijo_c1, self.max_backtracks, self.tol_g, self.tol_loss_rel) <= 0:
            raise ConfigError("gradient-descent settings must be positive")


@dataclass(frozen=True)
class LmConfig:
    """``lambda0=None`` uses ``1e-3 * max(diag(J^T M J))`` at the start point."""

    k_max: int = 200
    nu: float = 10.0
    lambda0: Optional[float] = None
    lambda0_factor: float = 1e-3
    tol_g: float = 1e-6
    tol_loss_rel: float = 1e-9

    def __post_init__(self):
        if not self.nu > 1:
            raise ConfigError("nu must be > 1")
        if self.lambda0 is not None and not self.lambda0 > 0:
            raise ConfigError("lambda0 must be positive")
        if min(self.k_max, self.lambda0_factor, self.tol_g, self.tol_loss_rel) <= 0:
            raise ConfigError("Levenberg-Marquardt settings must be positive")


@dataclass(frozen=True)
class TraceRecord:
    """One iteration. ``step_ctrl`` is the step length (GD) or the damping used
    for this iteration's step (LM). For a rejected LM step ``vartheta`` and
    ``loss`` are those of the unchanged iterate and ``trial_loss`` that of the
    rejected point."""

    iteration: int
    vartheta: np.ndarray
    loss: float
    grad_norm: float
    step_ctrl: float
    accepted: bool
    trial_loss: float = float("nan")


@dataclass
class OptimizerTrace:
    records: List[TraceRecord] = field(default_factory=list)
    termination: str = ""
    start: Optional[np.ndarray] = None
    n_evaluations: int = 0
    final_result: object = None

    @property
    def accepted(self) -> List[TraceRecord]:
        return [r for r in self.records if r.accepted]

    @property
    def final_loss(self) -> float:
        acc = self.accepted
        return acc[-1].loss if acc else float("inf")

    @property
    def final_vartheta(self) -> Optional[np.ndarray]:
        acc = self.accepted
        return acc[-1].vartheta if acc else None

    @property
    def n_iterations(self) -> int:
        return max((r.iteration for r in self.records), default=0)


def _unpack(res, need_gn: bool):
    if isinstance(res, tuple) and not hasattr(res, "_fields"):
        loss, grad = float(res[0]), np.asarray(res[1], dtype=np.float64)
        gn = np.asarray(res[2], dtype=np.float64) if need_gn else None
        return loss, grad, gn
    loss = float(res.loss)
    grad = np.asarray(res.grad, dtype=np.float64)
    gn = np.asarray(res.gn, dtype=np.float64) if need_gn else None
    return loss, grad, gn


def _try(objective, v, need_gn):
    """Evaluate; solver failures and non-finite values become ``inf``."""
    try:
        res = objective(v)
    except SolverError:
        return float("inf"), None, None, None
    loss, grad, gn = _unpack(res, need_gn)
    if not np.isfinite(loss) or not np.all(np.isfinite(grad)) or (gn is not None and not np.all(np.isfinite(gn))):
        return float("inf"), None, None, None
    return loss, grad, gn, res


def _start(objective, v0, need_gn):
    v = np.array(v0, dtype=np.float64)
    try:
        res = objective(v)
    except SolverError as exc:
        raise NonFiniteObjective(f"objective failed at the start point: {exc}") from exc
    loss, grad, gn = _unpack(res, need_gn)
    if not np.isfinite(loss) or not np.all(np.isfinite(grad)):
        raise NonFiniteObjective("objective is not finite at the start point")
    return v, loss, grad, gn, res


def _rel_change(old, new):
    if old == 0.0:
        return 0.0 if new == 0.0 else float("inf")
    return abs(old - new) / abs(old)


def gradient_descent(objective: Callable, v0, cfg: GdConfig = GdConfig()) -> OptimizerTrace:
    """Steepest descent with Armijo backtracking.

    Each line search starts from twice the previous accepted step (the first
    from ``eta0``) and halves until the sufficient-decrease condition holds.
    """
    v, loss, g, _, res = _start(objective, v0, False)
    trace = OptimizerTrace(start=v.copy(), n_evaluations=1, final_result=res)
    eta = cfg.eta0
    trace.records.append(TraceRecord(0, v.copy(), loss, float(np.max(np.abs(g))), eta, True))
    for k in range(1, cfg.k_max + 1):
        gnorm = float(np.max(np.abs(g)))
        if gnorm <= cfg.tol_g:
            trace.termination = GRADIENT_TOLERANCE
            return trace
        g2 = float(g @ g)
        accepted = False
        for _ in range(cfg.max_backtracks):
            trial = v - eta * g
            t_loss, t_grad, _, t_res = _try(objective, trial, False)
            trace.n_evaluations += 1
            if t_loss <= loss - cfg.armijo_c1 * eta * g2:
                accepted = True
                break
            eta *= cfg.shrink
        if not accepted:
            trace.termination = LINE_SEARCH_FAILED
            return trace
        converged = _rel_change(loss, t_loss) <= cfg.tol_loss_rel
        v, loss, g, res = trial, t_loss, t_grad, t_res
        trace.final_result = res
        trace.records.append(TraceRecord(k, v.copy(), loss, float(np.max(np.abs(g))), eta, True))
        if converged:
            trace.termination = LOSS_TOLERANCE
            return trace
        eta = eta / cfg.shrink
    trace.termination = MAX_ITERATIONS
    return trace


def lm_step(grad, gn, lam) -> np.ndarray:
    """Solve ``(A + lam * Diag(A)) step = -grad`` with a floor on ``Diag(A)``."""
    diag = np.maximum(np.diag(gn), _DIAG_FLOOR)
    M = gn + lam * np.diag(diag)
    try:
        step = np.linalg.solve(M, -grad)
    except np.linalg.LinAlgError as exc:
        raise SingularNormalEquations(f"damped normal equations are singular (lambda={lam:g})") from exc
    if not np.all(np.isfinite(step)):
        raise SingularNormalEquations(f"damped normal equations gave a non-finite step (lambda={lam:g})")
    return step


def levenberg_marquardt(objective: Callable, v0, cfg: LmConfig = LmConfig()) -> OptimizerTrace:
    """Levenberg-Marquardt with multiplicative damping updates.

    The step solves ``(A + lambda Diag(A)) step = -J^T delta`` where ``A`` is
    the Gauss-Newton curvature; for ordinary least squares ``A = J^T J``.
    A step is accepted when it strictly lowers the loss, after which
    ``lambda <- lambda / nu``; otherwise ``lambda <- lambda * nu`` and the
    iterate is kept.
    """
    v, loss, g, A, res = _start(objective, v0, True)
    if A is None or not np.all(np.isfinite(A)):
        raise NonFiniteObjective("Gauss-Newton matrix is not finite at the start point")
    lam = cfg.lambda0 if cfg.lambda0 is not None else cfg.lambda0_factor * max(float(np.max(np.diag(A))), _DIAG_FLOOR)
    trace = OptimizerTrace(start=v.copy(), n_evaluations=1, final_result=res)
    trace.records.append(TraceRecord(0, v.copy(), loss, float(np.max(np.abs(g))), lam, True))
    for k in range(1, cfg.k_max + 1):
        if float(np.max(np.abs(g))) <= cfg.tol_g:
            trace.termination = GRADIENT_TOLERANCE
            return trace
        step = lm_step(g, A, lam)
        trial = v + step
        t_loss, t_grad, t_A, t_res = _try(objective, trial, True)
        trace.n_evaluations += 1
        if t_loss < loss:
            converged = _rel_change(loss, t_loss) <= cfg.tol_loss_rel
            v, loss, g, A, res = trial, t_loss, t_grad, t_A, t_res
            trace.final_result = res
            trace.records.append(TraceRecord(k, v.copy(), loss, float(np.max(np.abs(g))), lam, True, t_loss))
            lam = lam / cfg.nu
            if converged:
                trace.termination = LOSS_TOLERANCE
                return trace
        else:
            trace.records.append(TraceRecord(k, v.copy(), loss, float(np.max(np.abs(g))), lam, False, t_loss))
            lam = lam * cfg.nu
            if lam > _LAMBDA_MAX:
                trace.termination = DAMPING_OVERFLOW
                return trace
    trace.termination = MAX_ITERATIONS
    return trace


@dataclass
class MultiStartResult:
    """Traces in start order plus the ranking (best first) by final loss."""

    starts_unit: np.ndarray
    traces: List[OptimizerTrace]
    ranking: List[int]
    errors: List[Optional[str]]

    @property
    def ranked(self) -> List[OptimizerTrace]:
        return [self.traces[i] for i in self.ranking]

    @property
    def best(self) -> OptimizerTrace:
        return self.traces[self.ranking[0]]


def multi_start(runner: Callable, n_starts: int, seed: int, d: int, n_jobs: int = 1) -> MultiStartResult:
    """Run ``runner(vartheta0)`` from ``n_starts`` uniform unit-cube points.

    Starts come from ``numpy.random.default_rng(seed)``, so results depend
    only on ``seed``; with ``n_jobs > 1`` trials run in threads and are
    collected in start order. A trial whose objective fails at its start
    point is kept with an empty trace and ranked last.
    """
    if n_starts < 1:
        raise ConfigError("n_starts must be >= 1")
    rng = np.random.default_rng(seed)
    unit = rng.uniform(size=(n_starts, d))
    starts = logit(unit)

    def one(i):
        try:
            return runner(starts[i].copy()), None
        except GradHydError as exc:
            if isinstance(exc, ConfigError):
                raise
            return OptimizerTrace(start=starts[i].copy(), termination=OBJECTIVE_FAILED), str(exc)

    if n_jobs > 1:
        with ThreadPoolExecutor(max_workers=n_jobs) as pool:
            out = list(pool.map(one, range(n_starts)))
    else:
        out = [one(i) for i in range(n_starts)]
    traces = [o[0] for o in out]
    errors = [o[1] for o in out]
    ranking = sorted(range(n_starts), key=lambda i: (traces[i].final_loss, i))
    return MultiStartResult(unit, traces, ranking, errors)
