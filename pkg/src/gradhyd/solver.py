"""Adaptive Heun integration of states and forward sensitivities.

The augmented system is ``dx/dt = f(x, theta)`` together with
``dS/dt = J_f(x) S + J_f(theta)``, ``S(0) = 0``. Both parts are advanced by
the same explicit trapezoidal (Heun) step and share one step-size
controller driven by the Heun/Euler difference. Because the sensitivity
equations are the exact linearisation of the state equations, advancing
them with the same Heun step gives the exact derivative of the discrete
solution map for the accepted step sequence.

Drivers are held constant over each unit reporting interval, steps are
truncated so the solution is sampled exactly at integer times, and the
accepted step sizes are recorded. :func:`integrate_states` can replay a
recorded schedule without error control, which gives a solution map that is
smooth in ``theta``; the finite-difference oracle relies on this.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Optional

import numpy as np

from ._jit import njit
from .errors import ConfigError, MaxStepsExceeded, NonFiniteState, StepSizeUnderflow
from .timeseries import ForcingSeries

__all__ = [
    "SolverConfig",
    "StepStats",
    "StepSchedule",
    "SensitivityTrajectory",
    "integrate_augmented",
    "integrate_states",
    "extract_discharge",
    "extract_jacobian",
    "discharge_from_cumulative",
    "jacobian_from_cumulative",
    "volume_balance",
]

_OK, _UNDERFLOW, _MAXSTEPS, _NONFINITE, _BUFFER = 0, 1, 2, 3, 4
_TAU_EPS = 1e-13
_STAB = 1.8  # step cap h * rho <= 1.8, inside Heun's stability bound of 2


@dataclass(frozen=True)
class SolverConfig:
    abstol: float = 1e-5
    reltol: float = 1e-5
    h_min: float = 1e-5
    h_max: float = 1.0
    max_steps_per_interval: int = 100000

    def __post_init__(self):
        if not (self.abstol > 0 and self.reltol > 0):
            raise ConfigError("abstol and reltol must be positive")
        if not 0 < self.h_min <= self.h_max <= 1.0:
            raise ConfigError("need 0 < h_min <= h_max <= 1")
        if self.max_steps_per_interval < 1:
            raise ConfigError("max_steps_per_interval must be >= 1")

    def with_tolerance(self, tol: float) -> "SolverConfig":
        return replace(self, abstol=tol, reltol=tol)


@dataclass(frozen=True)
class StepStats:
    accepted: int
    rejected: int
    h_min_used: float
    h_max_used: float
    clamped_volume: float


@dataclass(frozen=True)
class StepSchedule:
    """Accepted step sizes, concatenated over intervals, and per-interval counts."""

    h: np.ndarray
    counts: np.ndarray


@dataclass(frozen=True)
class SensitivityTrajectory:
    """Solution sampled at reporting times ``0 .. n_total``.

    ``sens`` is ``None`` for state-only integrations. ``cum_precip`` and
    ``cum_et`` are the input and evaporation volumes since ``t = 0``.
    """

    times: np.ndarray
    states: np.ndarray
    sens: Optional[np.ndarray]
    cum_precip: np.ndarray
    cum_et: np.ndarray
    stats: StepStats
    schedule: StepSchedule


@njit(inline="always")
def _aug_rhs(kernel, x, S, theta, p, ep, fx, fS, jx, jth, with_sens, want_jac):
    et = kernel(x, theta, p, ep, fx, jx, jth, want_jac)
    if with_sens:
        m = x.shape[0]
        d = jth.shape[1]
        for i in range(m):
            for j in range(d):
                acc = jth[i, j]
                for k in range(m):
                    acc += jx[i, k] * S[k, j]
                fS[i, j] = acc
    return et


@njit
def _heun_run(kernel, x0, params, precip, pet, with_sens, abstol, reltol, h_min, h_max,
              max_steps, replay, sched_h, sched_n, xs, Ss, cum_et, rec_h, rec_n, stats):
    m = x0.shape[0]
    d = Ss.shape[2]
    n_total = precip.shape[0]
    x = x0.copy()
    S = np.zeros((m, d))
    k1x = np.empty(m)
    k2x = np.empty(m)
    xe = np.empty(m)
    xn = np.empty(m)
    k1S = np.zeros((m, d))
    k2S = np.zeros((m, d))
    Se = np.zeros((m, d))
    Sn = np.zeros((m, d))
    jx = np.zeros((m, m))
    jth = np.zeros((m, d))

    for i in range(m):
        xs[0, i] = x[i]
    if with_sens:
        for i in range(m):
            for j in range(d):
                Ss[0, i, j] = 0.0
    cum_et[0] = 0.0

    h = 0.1 * h_max
    et_acc = 0.0
    n_acc = 0
    n_rej = 0
    h_lo = np.inf
    h_hi = 0.0
    clamped = 0.0
    idx = 0  # position in the schedule buffer
    for t in range(n_total):
        p = precip[t]
        ep = pet[t]
        tau = 0.0
        steps_here = 0
        need_k1 = True
        et1 = 0.0
        n_sched = sched_n[t] if replay else 0
        while True:
            if replay:
                if steps_here >= n_sched:
                    break
                hh = sched_h[idx]
            else:
                if tau >= 1.0 - _TAU_EPS:
                    break
                if steps_here >= max_steps:
                    stats[5] = t
                    return _MAXSTEPS
                rem = 1.0 - tau
                hh = h
                if hh >= rem - _TAU_EPS:
                    hh = rem

            if need_k1:
                et1 = _aug_rhs(kernel, x, S, params, p, ep, k1x, k1S, jx, jth, with_sens, with_sens)
                need_k1 = False
            for i in range(m):
                xe[i] = x[i] + hh * k1x[i]
            if with_sens:
                for i in range(m):
                    for j in range(d):
                        Se[i, j] = S[i, j] + hh * k1S[i, j]
            et2 = _aug_rhs(kernel, xe, Se, params, p, ep, k2x, k2S, jx, jth, with_sens, with_sens or not replay)

            half = 0.5 * hh
            if replay:
                for i in range(m):
                    xn[i] = x[i] + half * (k1x[i] + k2x[i])
                if with_sens:
                    for i in range(m):
                        for j in range(d):
                            Sn[i, j] = S[i, j] + half * (k1S[i, j] + k2S[i, j])
                if not (et2 == et2 and xn.sum() < np.inf):
                    stats[5] = t
                    return _NONFINITE
            err = 0.0
            negative = False
            if not replay:
                for i in range(m):
                    xn[i] = x[i] + half * (k1x[i] + k2x[i])
                    sc = abstol + reltol * max(abs(x[i]), abs(xn[i]))
                    e = abs(half * (k2x[i] - k1x[i])) / sc
                    if e > err or e != e:
                        err = e
                    if xn[i] < -abstol:
                        negative = True
                if with_sens:
                    for i in range(m):
                        for j in range(d):
                            Sn[i, j] = S[i, j] + half * (k1S[i, j] + k2S[i, j])
                            sc = abstol + reltol * max(abs(S[i, j]), abs(Sn[i, j]))
                            e = abs(half * (k2S[i, j] - k1S[i, j])) / sc
                            if e > err or e != e:
                                err = e
                if not (err < np.inf) or not (et2 == et2):
                    stats[5] = t
                    return _NONFINITE

            if replay or (err <= 1.0 and not negative):
                for i in range(m):
                    v = xn[i]
                    if v < 0.0:
                        clamped -= v
                        v = 0.0
                        if with_sens:
                            for j in range(d):
                                Sn[i, j] = 0.0
                    x[i] = v
                if with_sens:
                    for i in range(m):
                        for j in range(d):
                            S[i, j] = Sn[i, j]
                et_acc += half * (et1 + et2)
                need_k1 = True
                steps_here += 1
                n_acc += 1
                if hh < h_lo:
                    h_lo = hh
                if hh > h_hi:
                    h_hi = hh
                if replay:
                    idx += 1
                    continue
                if idx >= rec_h.shape[0]:
                    return _BUFFER
                rec_h[idx] = hh
                idx += 1
                truncated = hh < h
                tau += hh
                if not truncated:
                    if err == 0.0:
                        fac = 5.0
                    else:
                        fac = min(5.0, max(0.2, 0.9 * err ** -0.5))
                    h = min(h_max, h * fac)
                    # keep h * rho inside Heun's real stability interval [-2, 0];
                    # near a stiff equilibrium the error estimate alone lets the
                    # step grow until the iteration oscillates and amplifies roundoff
                    rho = 0.0
                    for i in range(m):
                        a = abs(jx[i, i])
                        if a > rho:
                            rho = a
                    if h * rho > _STAB:
                        h = max(_STAB / rho, h_min)
            else:
                n_rej += 1
                if negative and err <= 1.0:
                    h = 0.5 * hh
                else:
                    h = hh * max(0.2, 0.9 * err ** -0.5)
                    if negative:
                        h = min(h, 0.5 * hh)
                if h < h_min:
                    stats[5] = t
                    return _UNDERFLOW

        if not replay:
            rec_n[t] = steps_here
        for i in range(m):
            xs[t + 1, i] = x[i]
        if with_sens:
            for i in range(m):
                for j in range(d):
                    Ss[t + 1, i, j] = S[i, j]
        cum_et[t + 1] = et_acc

    stats[0] = n_acc
    stats[1] = n_rej
    stats[2] = h_lo
    stats[3] = h_hi
    stats[4] = clamped
    stats[5] = -1.0
    return _OK


def _run(model, theta, forcing: ForcingSeries, cfg: SolverConfig, with_sens: bool,
         schedule: Optional[StepSchedule]) -> SensitivityTrajectory:
    theta = np.ascontiguousarray(theta, dtype=np.float64)
    if theta.shape != (model.d,):
        raise ConfigError(f"{model.name} expects {model.d} parameters, got shape {theta.shape}")
    kparams = np.ascontiguousarray(model.kernel_params(theta), dtype=np.float64)
    x0 = np.ascontiguousarray(model.initial_state(), dtype=np.float64)
    n_total = forcing.n_total
    m, d = model.m, model.d
    xs = np.empty((n_total + 1, m))
    Ss = np.empty((n_total + 1, m, d)) if with_sens else np.empty((1, m, d))
    cum_et = np.empty(n_total + 1)
    stats = np.zeros(6)
    replay = schedule is not None
    if replay:
        sched_h = np.ascontiguousarray(schedule.h, dtype=np.float64)
        sched_n = np.ascontiguousarray(schedule.counts, dtype=np.int64)
        if sched_n.shape != (n_total,):
            raise ConfigError("step schedule does not match the forcing length")
        rec_h = np.empty(0)
        rec_n = np.empty(0, dtype=np.int64)
    else:
        sched_h = np.empty(0)
        sched_n = np.empty(0, dtype=np.int64)
        rec_n = np.zeros(n_total, dtype=np.int64)
        rec_h = np.empty(max(64 * n_total, 1024))

    while True:
        code = _heun_run(model.kernel, x0, kparams, forcing.precip, forcing.pet, with_sens,
                         cfg.abstol, cfg.reltol, cfg.h_min, cfg.h_max, cfg.max_steps_per_interval,
                         replay, sched_h, sched_n, xs, Ss, cum_et, rec_h, rec_n, stats)
        if code != _BUFFER:
            break
        rec_h = np.empty(2 * rec_h.size)

    where = f"{model.name} at theta={theta.tolist()}, interval {int(stats[5])}"
    if code == _UNDERFLOW:
        raise StepSizeUnderflow(f"step size fell below h_min={cfg.h_min:g}: {where}")
    if code == _MAXSTEPS:
        raise MaxStepsExceeded(f"more than {cfg.max_steps_per_interval} steps in one interval: {where}")
    if code == _NONFINITE:
        raise NonFiniteState(f"non-finite state or error estimate: {where}")

    if replay:
        sched = schedule
    else:
        sched = StepSchedule(rec_h[: int(rec_n.sum())].copy(), rec_n)
    cum_p = np.concatenate(([0.0], np.cumsum(forcing.precip)))
    return SensitivityTrajectory(
        times=np.arange(n_total + 1, dtype=np.float64),
        states=xs,
        sens=Ss if with_sens else None,
        cum_precip=cum_p,
        cum_et=cum_et,
        stats=StepStats(int(stats[0]), int(stats[1]), float(stats[2]), float(stats[3]), float(stats[4])),
        schedule=sched,
    )


def integrate_augmented(model, theta, forcing: ForcingSeries, cfg: SolverConfig = SolverConfig()) -> SensitivityTrajectory:
    """Integrate states and sensitivities with adaptive step control."""
    return _run(model, theta, forcing, cfg, True, None)


def integrate_states(model, theta, forcing: ForcingSeries, cfg: SolverConfig = SolverConfig(),
                     schedule: Optional[StepSchedule] = None) -> SensitivityTrajectory:
    """Integrate the states only.

    With ``schedule`` the recorded step sequence is replayed exactly and no
    error control is applied.
    """
    return _run(model, theta, forcing, cfg, False, schedule)


def discharge_from_cumulative(xm, spin_up: int = 0) -> np.ndarray:
    """Difference the cumulative discharge store; tiny negatives become 0."""
    xm = np.asarray(xm, dtype=np.float64)
    q = np.diff(xm)[spin_up:]
    return np.where(q < 0.0, 0.0, q)


def jacobian_from_cumulative(sm, spin_up: int = 0) -> np.ndarray:
    """Difference the last-state sensitivity rows (``(n_total+1) x d``)."""
    return np.diff(np.asarray(sm, dtype=np.float64), axis=0)[spin_up:]


def extract_discharge(traj: SensitivityTrajectory, spin_up: int) -> np.ndarray:
    return discharge_from_cumulative(traj.states[:, -1], spin_up)


def extract_jacobian(traj: SensitivityTrajectory, spin_up: int) -> np.ndarray:
    if traj.sens is None:
        raise ConfigError("trajectory carries no sensitivities; use integrate_augmented")
    return jacobian_from_cumulative(traj.sens[:, -1, :], spin_up)


def volume_balance(traj: SensitivityTrajectory) -> np.ndarray:
    """Input minus evaporation minus storage change, at each reporting time."""
    stored = traj.states.sum(axis=1) - traj.states[0].sum()
    return traj.cum_precip - traj.cum_et - stored
