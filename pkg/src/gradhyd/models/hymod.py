"""hymod: soil-moisture store, one slow and three fast linear reservoirs.

States ``(s_u, s_s, s_f1, s_f2, s_f3, s_q)``, parameters
``(s_u_max, b, a, k_s, k_f)``.

The relative soil storage is clamped to ``[0, 1 - 1e-10]`` before it enters
the power law and evaporation terms. The linear reservoirs use the signed
storage, so ``f`` stays smooth at zero; the stepper keeps any negative
storage within ``-abstol``.
"""

import math

import numpy as np

from .._jit import njit
from ..timeseries import ParameterSpace
from .base import ModelDynamics

__all__ = ["Hymod", "hymod_kernel"]

EVAP_C = 1e-2
SBAR_MAX = 1.0 - 1e-10


@njit(_nrt=False)
def hymod_kernel(x, theta, p, ep, f, jx, jth, want_jac):
    su_max = theta[0]
    b = theta[1]
    a = theta[2]
    ks = theta[3]
    kf = theta[4]
    su = x[0]
    ss = x[1]
    sf1 = x[2]
    sf2 = x[3]
    sf3 = x[4]

    sbar = su / su_max
    # d(sbar)/d(s_u) and d(sbar)/d(s_u_max); zero where a clamp is active
    ds_dx = 1.0 / su_max
    ds_dmax = -su / (su_max * su_max)
    if sbar < 0.0:
        sbar = 0.0
        ds_dx = 0.0
        ds_dmax = 0.0
    elif sbar > SBAR_MAX:
        sbar = SBAR_MAX
        ds_dx = 0.0
        ds_dmax = 0.0
    c = EVAP_C
    om = 1.0 - sbar
    pw = om**b
    qu = p * (1.0 - pw)
    ea = ep * sbar * (1.0 + c) / (sbar + c)

    f[0] = p - ea - qu
    f[1] = (1.0 - a) * qu - ks * ss
    f[2] = a * qu - kf * sf1
    f[3] = kf * (sf1 - sf2)
    f[4] = kf * (sf2 - sf3)
    f[5] = kf * sf3 + ks * ss
    if not want_jac:
        return ea

    for i in range(6):
        for j in range(6):
            jx[i, j] = 0.0
        for j in range(5):
            jth[i, j] = 0.0
    dqu = p * b * pw / om  # d q_u / d sbar
    dea = ep * (1.0 + c) * c / ((sbar + c) * (sbar + c))  # d e_a / d sbar
    dqu_b = -p * pw * math.log(om)

    dqu_x = dqu * ds_dx
    dea_x = dea * ds_dx
    jx[0, 0] = -dqu_x - dea_x
    jx[1, 0] = (1.0 - a) * dqu_x
    jx[2, 0] = a * dqu_x
    jx[1, 1] = -ks
    jx[2, 2] = -kf
    jx[3, 2] = kf
    jx[3, 3] = -kf
    jx[4, 3] = kf
    jx[4, 4] = -kf
    jx[5, 1] = ks
    jx[5, 4] = kf

    dqu_m = dqu * ds_dmax
    dea_m = dea * ds_dmax
    jth[0, 0] = -dqu_m - dea_m
    jth[0, 1] = -dqu_b
    jth[1, 0] = (1.0 - a) * dqu_m
    jth[1, 1] = (1.0 - a) * dqu_b
    jth[1, 2] = -qu
    jth[1, 3] = -ss
    jth[2, 0] = a * dqu_m
    jth[2, 1] = a * dqu_b
    jth[2, 2] = qu
    jth[2, 4] = -sf1
    jth[3, 4] = sf1 - sf2
    jth[4, 4] = sf2 - sf3
    jth[5, 3] = ss
    jth[5, 4] = sf3
    return ea


class Hymod(ModelDynamics):
    name = "hymod"
    m = 6
    kernel = staticmethod(hymod_kernel)
    capacity = {0: 0}
    state_names = ("s_u", "s_s", "s_f1", "s_f2", "s_f3", "s_q")

    def __init__(self):
        self.space = ParameterSpace(
            ("s_u_max", "b", "a", "k_s", "k_f"),
            np.array([50.0, 0.1, 0.0, 1e-4, 0.1]),
            np.array([1000.0, 10.0, 1.0, 1.0, 5.0]),
        )
