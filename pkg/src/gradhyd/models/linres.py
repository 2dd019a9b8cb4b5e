"""Single linear reservoir ``ds/dt = -k s`` draining into the discharge store.

Has a closed-form solution ``s(t) = s0 exp(-k t)``, which makes it the
reference problem for the integrator and the sensitivity equations.
"""

import numpy as np

from .._jit import njit
from ..timeseries import ParameterSpace
from .base import ModelDynamics

__all__ = ["LinearReservoir", "linres_kernel"]


@njit(_nrt=False)
def linres_kernel(x, theta, p, ep, f, jx, jth, want_jac):
    k = theta[0]
    s = x[0]
    f[0] = p - k * s
    f[1] = k * s
    if want_jac:
        jx[0, 0] = -k
        jx[0, 1] = 0.0
        jx[1, 0] = k
        jx[1, 1] = 0.0
        jth[0, 0] = -s
        jth[1, 0] = s
    return 0.0


class LinearReservoir(ModelDynamics):
    name = "linres"
    m = 2
    kernel = staticmethod(linres_kernel)
    state_names = ("s", "s_q")

    def __init__(self, s0: float = 10.0, k_bounds=(1e-3, 10.0)):
        self.s0 = float(s0)
        self.space = ParameterSpace(("k",), np.array([k_bounds[0]]), np.array([k_bounds[1]]))

    def initial_state(self) -> np.ndarray:
        return np.array([self.s0, 0.0])
