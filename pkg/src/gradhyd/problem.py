"""Calibration problem: model + forcing + loss, viewed from unconstrained space.

One augmented integration yields the discharge, its Jacobian and (with a
loss attached) the loss gradient. The finite-difference counterparts used
for verification live here too, so that the analytic and numerical paths
are set up identically.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple, Optional

import numpy as np

from .losses import LossEvaluation, LossFunction, assemble_gradient
from .numdiff import DiffConfig, fd_gradient, fd_jacobian
from .solver import (
    SensitivityTrajectory,
    SolverConfig,
    StepSchedule,
    extract_discharge,
    extract_jacobian,
    integrate_augmented,
    integrate_states,
)
from .timeseries import ForcingSeries, ObservedDischarge, validate_series
from .transforms import TransformedPoint, rescale_jacobian, to_physical

__all__ = ["Evaluation", "ObjectiveResult", "CalibrationProblem"]


class ObjectiveResult(NamedTuple):
    """What the optimizers consume: loss, gradient and Gauss-Newton curvature in vartheta."""

    loss: float
    grad: np.ndarray
    gn: Optional[np.ndarray]
    evaluation: "Evaluation"


@dataclass(frozen=True)
class Evaluation:
    """Everything produced by one augmented run at ``point``."""

    point: TransformedPoint
    q: np.ndarray
    jac_theta: np.ndarray
    jac: np.ndarray  # d q / d vartheta
    loss: Optional[LossEvaluation]
    grad: Optional[np.ndarray]  # d L / d vartheta
    trajectory: SensitivityTrajectory

    @property
    def value(self) -> float:
        return self.loss.value if self.loss is not None else float("nan")


class CalibrationProblem:
    def __init__(self, model, forcing: ForcingSeries, loss: Optional[LossFunction] = None,
                 solver: SolverConfig = SolverConfig()):
        self.model = model
        self.forcing = forcing
        self.loss = loss
        self.solver = solver
        if loss is not None:
            validate_series(forcing, ObservedDischarge(loss.y))

    @property
    def space(self):
        return self.model.space

    @property
    def d(self) -> int:
        return self.model.d

    def point(self, vartheta) -> TransformedPoint:
        return to_physical(vartheta, self.space)

    def simulate(self, theta, schedule: Optional[StepSchedule] = None) -> np.ndarray:
        traj = integrate_states(self.model, theta, self.forcing, self.solver, schedule)
        return extract_discharge(traj, self.forcing.spin_up)

    def evaluate(self, vartheta) -> Evaluation:
        pt = self.point(vartheta)
        traj = integrate_augmented(self.model, pt.theta, self.forcing, self.solver)
        q = extract_discharge(traj, self.forcing.spin_up)
        jt = extract_jacobian(traj, self.forcing.spin_up)
        jv = rescale_jacobian(jt, pt)
        ev = grad = None
        if self.loss is not None:
            ev = self.loss(q)
            grad = assemble_gradient(jv, ev)
        return Evaluation(pt, q, jt, jv, ev, grad, traj)

    def objective(self, vartheta) -> ObjectiveResult:
        """Loss and gradient for gradient descent."""
        ev = self.evaluate(vartheta)
        return ObjectiveResult(ev.loss.value, ev.grad, None, ev)

    def lm_objective(self, vartheta) -> ObjectiveResult:
        """Loss, gradient and ``J^T M J`` for Levenberg-Marquardt."""
        ev = self.evaluate(vartheta)
        return ObjectiveResult(ev.loss.value, ev.grad, self.loss.gauss_newton(ev.jac), ev)

    # -- finite-difference reference -------------------------------------

    def discharge_map(self, schedule: Optional[StepSchedule] = None):
        """``vartheta -> q``; replays ``schedule`` if given, else adaptive."""
        return lambda v: self.simulate(self.point(v).theta, schedule)

    def loss_map(self, schedule: Optional[StepSchedule] = None):
        q_of = self.discharge_map(schedule)
        return lambda v: self.loss(q_of(v)).value

    def _schedule(self, vartheta, frozen: bool):
        if not frozen:
            return None
        # the analytic Jacobian is exact for the augmented run's step sequence
        return integrate_augmented(self.model, self.point(vartheta).theta, self.forcing, self.solver).schedule

    def fd_jacobian(self, vartheta, cfg: DiffConfig = DiffConfig(), frozen_steps: bool = True,
                    schedule: Optional[StepSchedule] = None) -> np.ndarray:
        """Richardson FD of ``q`` with respect to ``vartheta``.

        With ``frozen_steps`` every perturbed run replays the step sequence
        of the nominal run, so the map differentiated is smooth; otherwise
        each perturbed run chooses its own adaptive steps.
        """
        if schedule is None:
            schedule = self._schedule(vartheta, frozen_steps)
        return fd_jacobian(self.discharge_map(schedule), vartheta, cfg)

    def fd_gradient(self, vartheta, cfg: DiffConfig = DiffConfig(), frozen_steps: bool = True,
                    schedule: Optional[StepSchedule] = None) -> np.ndarray:
        if schedule is None:
            schedule = self._schedule(vartheta, frozen_steps)
        return fd_gradient(self.loss_map(schedule), vartheta, cfg)
