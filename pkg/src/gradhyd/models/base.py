"""Model contract shared by the solver, losses, optimizers and CLI.

A model is described by a compiled right-hand-side kernel with the fixed
signature::

    kernel(x, kernel_params(theta), p, ep, f, jx, jth, want_jac) -> et_actual

which writes ``dx/dt`` into ``f`` and, when ``want_jac`` is true, the dense
Jacobians ``df/dx`` (m x m) and ``df/dtheta`` (m x d) into ``jx``/``jth``.
The return value is the actual evaporation rate leaving the system, so that
``sum(f) + et_actual - p`` is zero for every model. Kernels must accept
storages slightly below zero (the stepper allows down to ``-abstol``)
without raising: relative storages feeding nonlinear flux laws are clamped,
the state vector itself is never modified.

The last state is always the cumulative discharge reservoir.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import NonFiniteResult, ShapeMismatch
from ..timeseries import ParameterSpace

__all__ = ["DynamicsEval", "ModelDynamics"]


@dataclass(frozen=True)
class DynamicsEval:
    f: np.ndarray
    jf_x: np.ndarray
    jf_theta: np.ndarray
    et_actual: float


class ModelDynamics:
    """Base class; subclasses set ``name``, ``m``, ``space`` and ``kernel``."""

    name: str = "model"
    m: int = 0
    space: ParameterSpace
    kernel = None
    # state index -> index of the parameter bounding that storage
    capacity: dict = {}

    @property
    def d(self) -> int:
        return self.space.d

    @property
    def state_names(self) -> tuple:
        return tuple(f"x{i + 1}" for i in range(self.m))

    def initial_state(self) -> np.ndarray:
        return np.zeros(self.m)

    def sample_state(self, theta, rng: np.random.Generator, scale: float = 20.0) -> np.ndarray:
        """Random admissible state strictly inside every capacity limit."""
        x = rng.uniform(0.0, scale, self.m)
        for i, j in self.capacity.items():
            x[i] = rng.uniform(0.02, 0.98) * theta[j]
        x[-1] = rng.uniform(0.0, 5.0 * scale)
        return x

    def kernel_params(self, theta) -> np.ndarray:
        """Parameter vector handed to the kernel.

        Models may append constants that depend on ``theta`` only, so the
        kernel does not recompute them at every call. The first ``d``
        entries are always ``theta``.
        """
        return np.asarray(theta, dtype=np.float64)

    def external_input(self, p: float, ep: float) -> float:
        """Rate at which water enters the system for drivers ``(p, ep)``."""
        return p

    def with_space(self, space: ParameterSpace) -> "ModelDynamics":
        if space.names != self.space.names:
            raise ShapeMismatch("bound overrides must keep the parameter names")
        clone = object.__new__(type(self))
        clone.__dict__.update(self.__dict__)
        clone.space = space
        return clone

    def dynamics(self, x, theta, p: float, ep: float) -> DynamicsEval:
        x = np.ascontiguousarray(x, dtype=np.float64)
        theta = np.ascontiguousarray(theta, dtype=np.float64)
        if x.shape != (self.m,) or theta.shape != (self.d,):
            raise ShapeMismatch(f"expected x of shape ({self.m},) and theta of shape ({self.d},)")
        f = np.empty(self.m)
        jx = np.empty((self.m, self.m))
        jth = np.empty((self.m, self.d))
        et = self.kernel(x, self.kernel_params(theta), float(p), float(ep), f, jx, jth, True)
        if not (np.all(np.isfinite(f)) and np.all(np.isfinite(jx)) and np.all(np.isfinite(jth)) and np.isfinite(et)):
            raise NonFiniteResult(f"{self.name} dynamics produced non-finite values at x={x}, theta={theta}")
        return DynamicsEval(f, jx, jth, float(et))

    def rhs(self, x, theta, p: float, ep: float) -> np.ndarray:
        """State derivative only (no Jacobians)."""
        x = np.ascontiguousarray(x, dtype=np.float64)
        theta = np.ascontiguousarray(theta, dtype=np.float64)
        f = np.empty(self.m)
        jx = np.empty((self.m, self.m))
        jth = np.empty((self.m, self.d))
        self.kernel(x, self.kernel_params(theta), float(p), float(ep), f, jx, jth, False)
        return f

    def __repr__(self) -> str:
        return f"{type(self).__name__}(m={self.m}, d={self.d})"
