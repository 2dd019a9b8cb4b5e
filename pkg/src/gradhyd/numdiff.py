"""Reference numerical differentiation.

Central differences on a geometric cascade of step sizes, combined with a
Richardson tableau that cancels the even-power truncation terms
``h^2, h^4, ...``. Works for scalar- and vector-valued functions.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .errors import ConfigError, NonFiniteEvaluation

__all__ = ["DiffConfig", "DerivativeEstimate", "richardson_derivative", "fd_gradient", "fd_jacobian"]


@dataclass(frozen=True)
class DiffConfig:
    """Cascade settings.

    Args:
        n_steps: number of step sizes in the cascade.
        base_step: first step; ``None`` means ``max(1e-2, 1e-2 * |x|)``.
        contraction: ratio between consecutive steps.
        extrapolation_terms: columns of the Richardson tableau.
        mode: ``"richardson"`` or ``"fixed"``.
        fixed_step: step for ``mode="fixed"``.
    """

    n_steps: int = 10
    base_step: Optional[float] = None
    contraction: float = 2.0
    extrapolation_terms: int = 4
    mode: str = "richardson"
    fixed_step: float = 1e-3

    def __post_init__(self):
        if self.mode not in ("richardson", "fixed"):
            raise ConfigError(f"unknown mode {self.mode!r}")
        if not self.n_steps >= self.extrapolation_terms >= 1:
            raise ConfigError("need n_steps >= extrapolation_terms >= 1")
        if self.base_step is not None and self.base_step <= 0:
            raise ConfigError("base_step must be positive")
        if self.contraction <= 1:
            raise ConfigError("contraction must be > 1")
        if self.fixed_step <= 0:
            raise ConfigError("fixed_step must be positive")

    @classmethod
    def fixed(cls, h: float) -> "DiffConfig":
        return cls(mode="fixed", fixed_step=h)

    def steps(self, x: float) -> np.ndarray:
        if self.mode == "fixed":
            return np.array([self.fixed_step])
        base = self.base_step if self.base_step is not None else max(1e-2, 1e-2 * abs(x))
        return base / self.contraction ** np.arange(self.n_steps)


@dataclass(frozen=True)
class DerivativeEstimate:
    value: object
    err_est: object
    evals_used: int


def _central(f, x, h):
    fp = np.asarray(f(x + h), dtype=np.float64)
    fm = np.asarray(f(x - h), dtype=np.float64)
    if not (np.all(np.isfinite(fp)) and np.all(np.isfinite(fm))):
        raise NonFiniteEvaluation(f"non-finite function value near x={x!r} (h={h:g})")
    return (fp - fm) / (2.0 * h)


def richardson_derivative(f: Callable, x: float, cfg: DiffConfig = DiffConfig()) -> DerivativeEstimate:
    """Estimate ``f'(x)``; ``f`` may return a scalar or an array."""
    x = float(x)
    hs = cfg.steps(x)
    if cfg.mode == "fixed":
        d = _central(f, x, hs[0])
        return DerivativeEstimate(_unwrap(d), _unwrap(np.zeros_like(d)), 2)

    # T[j][k]: column k removes the h^2 .. h^{2k} error terms
    prev = None
    last_col = []
    for j, h in enumerate(hs):
        row = [_central(f, x, h)]
        for k in range(1, min(j, cfg.extrapolation_terms - 1) + 1):
            r = cfg.contraction ** (2 * k)
            row.append(row[k - 1] + (row[k - 1] - prev[k - 1]) / (r - 1.0))
        if len(row) == cfg.extrapolation_terms:
            last_col.append(row[-1])
        prev = row
    value = last_col[-1]
    err = np.abs(last_col[-1] - last_col[-2]) if len(last_col) > 1 else np.abs(prev[-1] - prev[0])
    return DerivativeEstimate(_unwrap(value), _unwrap(err), 2 * len(hs))


def _unwrap(a):
    a = np.asarray(a)
    return float(a) if a.ndim == 0 else a


def _coordinate(fun, theta, j):
    def g(t):
        v = np.array(theta, dtype=np.float64)
        v[j] = t
        return fun(v)

    return g


def fd_gradient(f: Callable, theta, cfg: DiffConfig = DiffConfig()) -> np.ndarray:
    """Coordinate-wise derivative of a scalar function of a vector."""
    theta = np.asarray(theta, dtype=np.float64)
    return np.array([float(richardson_derivative(_coordinate(f, theta, j), theta[j], cfg).value)
                     for j in range(theta.size)])


def fd_jacobian(F: Callable, theta, cfg: DiffConfig = DiffConfig()) -> np.ndarray:
    """``n x d`` Jacobian of a vector function; column ``j`` perturbs coordinate ``j``."""
    theta = np.asarray(theta, dtype=np.float64)
    cols = [np.atleast_1d(richardson_derivative(_coordinate(F, theta, j), theta[j], cfg).value)
            for j in range(theta.size)]
    return np.column_stack(cols)
