"""hmodel: interception, unsaturated zone, fast and slow reservoirs.

States ``(s_i, s_u, s_f, s_s, s_q)``, parameters
``(i_max, s_max, q_max, alpha_e, alpha_f, r_f, r_s)``.

Fluxes are shaped by the smoothing function ``phi(x, y)`` of the relative
storage ``x`` and a shape parameter ``y``. Two closed forms are provided:

* ``shape`` (default): ``(1 - exp(-x y)) / (1 - exp(-y))``. Monotone on
  [0, 1] with ``phi(0, y) = 0`` and ``phi(1, y) = 1``; interception
  evaporation and excess rainfall vanish for an empty store and saturate
  for a full one.
* ``literal``: ``(1 - exp(-x y)) / (1 - exp(-x))`` (:func:`phi_smooth`).
  Kept for reference. It gives ``phi(0, y) = y``, which makes ``p_e``
  negative at the zero initial state; not usable for simulation.

Relative storages are clamped to ``[0, 1 - 1e-10]`` before entering ``phi``;
the linear reservoirs use the signed storage.

The Jacobians apply the full chain rule, including the dependence of
``e_u`` on ``s_i`` through ``e_i`` and of ``q_r`` on ``s_i`` through ``p_e``.
"""

import math
from typing import NamedTuple

import numpy as np

from .._jit import njit
from ..errors import ConfigError
from ..timeseries import ParameterSpace
from .base import ModelDynamics

__all__ = ["Hmodel", "hmodel_kernel", "hmodel_literal_kernel", "phi_smooth", "phi_shape", "SmoothingEval"]

ALPHA_I = 50.0
ALPHA_P = -50.0
SBAR_MAX = 1.0 - 1e-10
EXP_CAP = 300.0
X_SERIES = 1e-8
Y_SERIES = 1e-4


@njit(inline="always")
def _vphi(z):
    return math.exp(min(z, EXP_CAP))


@njit(inline="always")
def _vphi_prime(z):
    if z < EXP_CAP:
        return math.exp(z)
    return 0.0


@njit(inline="always")
def _phi_literal(x, y):
    """(1 - e^{-xy}) / (1 - e^{-x}) and its partials."""
    if abs(x) < X_SERIES:
        y2 = y * y
        v = y + x * (y - y2) / 2.0 + x * x * (y2 * y / 6.0 - y2 / 4.0 + y / 12.0)
        dx = (y - y2) / 2.0 + x * (y2 * y / 3.0 - y2 / 2.0 + y / 6.0)
        dy = 1.0 + x * (0.5 - y) + x * x * (y2 / 2.0 - y / 2.0 + 1.0 / 12.0)
        return v, dx, dy
    if -x * y < EXP_CAP:
        num = -math.expm1(-x * y)
    else:
        num = 1.0 - _vphi(-x * y)
    den = -math.expm1(-x)
    v = num / den
    dx = (y * _vphi_prime(-x * y) * den - num * _vphi_prime(-x)) / (den * den)
    dy = x * _vphi_prime(-x * y) / den
    return v, dx, dy


@njit(inline="always")
def _exp_pair(z):
    """Return ``(1 - phi(z), phi'(z))`` with one transcendental call when possible."""
    if z < EXP_CAP:
        a = math.expm1(z)
        e = 1.0 + a if a > -0.5 else math.exp(z)
        return -a, e
    return 1.0 - _vphi(z), 0.0


@njit(inline="always")
def _phi_shape_full(x, y, want_d, den, e_y):
    """(1 - e^{-xy}) / (1 - e^{-y}) and, if ``want_d``, its partials.

    ``den, e_y = _exp_pair(-y)`` depend on the parameter only and are passed in.
    """
    if abs(y) < Y_SERIES:
        x2 = x * x
        v = x + y * (x - x2) / 2.0 + y * y * (x2 * x / 6.0 - x2 / 4.0 + x / 12.0)
        if not want_d:
            return v, 0.0, 0.0
        dx = 1.0 + y * (0.5 - x) + y * y * (x2 / 2.0 - x / 2.0 + 1.0 / 12.0)
        dy = (x - x2) / 2.0 + y * (x2 * x / 3.0 - x2 / 2.0 + x / 6.0)
        return v, dx, dy
    num, e_xy = _exp_pair(-x * y)
    rden = 1.0 / den
    v = num * rden
    if not want_d:
        return v, 0.0, 0.0
    dx = y * e_xy * rden
    dy = (x * e_xy - v * e_y) * rden
    return v, dx, dy


@njit
def _phi_shape(x, y):
    den, e_y = _exp_pair(-y)
    return _phi_shape_full(x, y, True, den, e_y)


_E50 = math.exp(-ALPHA_I)
_DEN50 = -math.expm1(-ALPHA_I)


@njit(inline="always")
def _phi_interception(x):
    """``phi(x, 50)``, ``phi(x, -50)`` and their x-partials from one exponential.

    Uses ``phi(x, -50) = phi(x, 50) * e^{-50} / e^{-50 x}``.
    """
    num, e = _exp_pair(-ALPHA_I * x)
    v_i = num / _DEN50
    dv_i = ALPHA_I * e / _DEN50
    r = _E50 / e
    return v_i, dv_i, v_i * r, ALPHA_I * r / _DEN50


class SmoothingEval(NamedTuple):
    value: float
    d_dx: float
    d_dy: float


def phi_smooth(x: float, y: float) -> SmoothingEval:
    """Literal closed form ``(1 - e^{-xy}) / (1 - e^{-x})`` with partials.

    Uses a second-order series in ``x`` for ``|x| < 1e-8`` so that
    ``phi_smooth(0, y).value == y``.
    """
    return SmoothingEval(*_phi_literal(float(x), float(y)))


def phi_shape(x: float, y: float) -> SmoothingEval:
    """Well-posed form ``(1 - e^{-xy}) / (1 - e^{-y})`` used by :class:`Hmodel`.

    Uses a second-order series in ``y`` for ``|y| < 1e-4`` (the limit at
    ``y = 0`` is ``x``).
    """
    return SmoothingEval(*_phi_shape(float(x), float(y)))


@njit(inline="always")
def _literal_interception(x):
    v_i, dv_i, _ = _phi_literal(x, ALPHA_I)
    v_p, dv_p, _ = _phi_literal(x, ALPHA_P)
    return v_i, dv_i, v_p, dv_p


@njit(inline="always")
def _phi_literal_full(x, y, want_d, den, e_y):
    return _phi_literal(x, y)


@njit(inline="always")
def _hmodel_impl(x, theta, p, ep, f, jx, jth, want_jac, interception, shape):
    imax = theta[0]
    smax = theta[1]
    qmax = theta[2]
    ae = theta[3]
    af = theta[4]
    rf = theta[5]
    rs = theta[6]
    si = x[0]
    su = x[1]
    sf = x[2]
    ss = x[3]

    xi = si / imax
    dxi_s = 1.0 / imax
    dxi_m = -si / (imax * imax)
    if xi < 0.0:
        xi = 0.0
        dxi_s = 0.0
        dxi_m = 0.0
    elif xi > SBAR_MAX:
        xi = SBAR_MAX
        dxi_s = 0.0
        dxi_m = 0.0
    xu = su / smax
    dxu_s = 1.0 / smax
    dxu_m = -su / (smax * smax)
    if xu < 0.0:
        xu = 0.0
        dxu_s = 0.0
        dxu_m = 0.0
    elif xu > SBAR_MAX:
        xu = SBAR_MAX
        dxu_s = 0.0
        dxu_m = 0.0

    phi_i, phi_i_x, phi_p, phi_p_x = interception(xi)
    phi_e, phi_e_x, phi_e_y = shape(xu, ae, want_jac, theta[7], theta[8])
    phi_f, phi_f_x, phi_f_y = shape(xu, af, want_jac, theta[9], theta[10])

    ei = ep * phi_i
    pe = p * phi_p
    eu = (ep - ei) * phi_e
    qr = pe * phi_f
    qp = qmax * phi_f
    qf = sf / rf
    qs = ss / rs

    f[0] = p - ei - pe
    f[1] = pe - eu - qr - qp
    f[2] = qr - qf
    f[3] = qp - qs
    f[4] = qs + qf
    if not want_jac:
        return ei + eu

    for i in range(5):
        for j in range(5):
            jx[i, j] = 0.0
        for j in range(7):
            jth[i, j] = 0.0

    # flux derivatives per unit change of the relative storages
    dei = ep * phi_i_x
    dpe = p * phi_p_x
    deu = (ep - ei) * phi_e_x
    dqr = pe * phi_f_x
    dqp = qmax * phi_f_x

    # s_i moves e_i and p_e directly, and e_u, q_r through them
    g0 = dei * dxi_s
    g1 = dpe * dxi_s
    jx[0, 0] = -g0 - g1
    jx[1, 0] = g1 + g0 * phi_e - g1 * phi_f
    jx[2, 0] = g1 * phi_f
    h0 = deu * dxu_s
    h1 = dqr * dxu_s
    h2 = dqp * dxu_s
    jx[1, 1] = -h0 - h1 - h2
    jx[2, 1] = h1
    jx[3, 1] = h2
    jx[2, 2] = -1.0 / rf
    jx[4, 2] = 1.0 / rf
    jx[3, 3] = -1.0 / rs
    jx[4, 3] = 1.0 / rs

    g0 = dei * dxi_m
    g1 = dpe * dxi_m
    jth[0, 0] = -g0 - g1
    jth[1, 0] = g1 + g0 * phi_e - g1 * phi_f
    jth[2, 0] = g1 * phi_f
    h0 = deu * dxu_m
    h1 = dqr * dxu_m
    h2 = dqp * dxu_m
    jth[1, 1] = -h0 - h1 - h2
    jth[2, 1] = h1
    jth[3, 1] = h2
    jth[1, 2] = -phi_f
    jth[3, 2] = phi_f
    jth[1, 3] = -(ep - ei) * phi_e_y
    jth[1, 4] = -(pe + qmax) * phi_f_y
    jth[2, 4] = pe * phi_f_y
    jth[3, 4] = qmax * phi_f_y
    jth[2, 5] = sf / (rf * rf)
    jth[4, 5] = -sf / (rf * rf)
    jth[3, 6] = ss / (rs * rs)
    jth[4, 6] = -ss / (rs * rs)
    return ei + eu


@njit(_nrt=False)
def hmodel_kernel(x, theta, p, ep, f, jx, jth, want_jac):
    return _hmodel_impl(x, theta, p, ep, f, jx, jth, want_jac, _phi_interception, _phi_shape_full)


@njit(_nrt=False)
def hmodel_literal_kernel(x, theta, p, ep, f, jx, jth, want_jac):
    return _hmodel_impl(x, theta, p, ep, f, jx, jth, want_jac, _literal_interception, _phi_literal_full)


class Hmodel(ModelDynamics):
    name = "hmodel"
    m = 5
    state_names = ("s_i", "s_u", "s_f", "s_s", "s_q")
    capacity = {0: 0, 1: 1}

    def kernel_params(self, theta) -> np.ndarray:
        """``theta`` followed by ``1 - e^{-y}`` and ``e^{-y}`` for ``y = alpha_e, alpha_f``."""
        theta = np.asarray(theta, dtype=np.float64)
        out = np.empty(11)
        out[:7] = theta
        out[7:9] = _exp_pair(-float(theta[3]))
        out[9:11] = _exp_pair(-float(theta[4]))
        return out

    def __init__(self, smoothing: str = "shape"):
        if smoothing not in ("shape", "literal"):
            raise ConfigError("smoothing must be 'shape' or 'literal'")
        self.smoothing = smoothing
        self.kernel = hmodel_kernel if smoothing == "shape" else hmodel_literal_kernel
        self.space = ParameterSpace(
            ("i_max", "s_max", "q_max", "alpha_e", "alpha_f", "r_f", "r_s"),
            np.array([0.1, 10.0, 0.1, 0.0, -10.0, 0.1, 1.0]),
            np.array([10.0, 1000.0, 100.0, 100.0, 10.0, 10.0, 150.0]),
        )
