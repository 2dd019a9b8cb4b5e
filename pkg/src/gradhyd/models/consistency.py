"""Compare a model's analytic Jacobians with Richardson finite differences."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import NonFiniteEvaluation, OracleFailure
from ..numdiff import DiffConfig, richardson_derivative
from .base import DynamicsEval

__all__ = ["ConsistencyReport", "check_dynamics_consistency"]


@dataclass(frozen=True)
class ConsistencyReport:
    """Max-abs discrepancies plus the FD matrices.

    ``flagged`` lists ``(matrix, row, col)`` entries where the function has a
    kink at the evaluation point (e.g. a clamp boundary), detected from
    one-sided slopes: their gap stays put when the step is halved instead of
    shrinking with it. It also lists entries with a large extrapolation error
    estimate.
    """

    max_err_x: float
    max_err_theta: float
    analytic: DynamicsEval
    fd_x: np.ndarray
    fd_theta: np.ndarray
    flagged: tuple

    @property
    def max_err(self) -> float:
        return max(self.max_err_x, self.max_err_theta)


def _fd_columns(fun, z, cfg, name, flag_tol):
    cols, flagged = [], []
    for j in range(z.size):
        def g(t, j=j):
            w = z.copy()
            w[j] = t
            return fun(w)

        try:
            est = richardson_derivative(g, z[j], cfg)
        except NonFiniteEvaluation as exc:
            raise OracleFailure(f"finite differences of f w.r.t. {name}[{j}] are not finite") from exc
        col = np.atleast_1d(est.value)
        err = np.atleast_1d(est.err_est)
        cols.append(col)
        bad = err > flag_tol * (1.0 + np.abs(col))
        h = cfg.steps(z[j])[-1]
        f0 = np.atleast_1d(g(z[j]))
        gaps = []
        for hh in (h, h / cfg.contraction):
            fp = np.atleast_1d(g(z[j] + hh))
            fm = np.atleast_1d(g(z[j] - hh))
            gaps.append(np.abs((fp - f0) - (f0 - fm)) / hh)
        bad |= (gaps[1] > flag_tol * (1.0 + np.abs(col))) & (gaps[1] > 0.75 * gaps[0])
        for i in np.flatnonzero(bad):
            flagged.append((name, int(i), j))
    return np.column_stack(cols), flagged


def check_dynamics_consistency(model, theta, x, p: float, ep: float, cfg: DiffConfig = DiffConfig(),
                               flag_tol: float = 1e-6) -> ConsistencyReport:
    """Max-abs difference of ``jf_x``/``jf_theta`` against FD of ``f``."""
    theta = np.asarray(theta, dtype=np.float64)
    x = np.asarray(x, dtype=np.float64)
    ev = model.dynamics(x, theta, p, ep)
    fd_x, fl_x = _fd_columns(lambda w: model.rhs(w, theta, p, ep), x, cfg, "x", flag_tol)
    fd_t, fl_t = _fd_columns(lambda w: model.rhs(x, w, p, ep), theta, cfg, "theta", flag_tol)
    return ConsistencyReport(
        float(np.max(np.abs(ev.jf_x - fd_x))),
        float(np.max(np.abs(ev.jf_theta - fd_t))),
        ev, fd_x, fd_t, tuple(fl_x + fl_t),
    )
