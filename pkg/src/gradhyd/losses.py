"""Loss functions and their sensitivities with respect to simulated discharge.

Every ``loss_*`` function returns a :class:`LossEvaluation` holding the scalar
loss and ``delta = dL/dq``. The parameter gradient then follows from the
discharge Jacobian as ``g = J_q^T delta`` (:func:`assemble_gradient`).

Residuals are ``e = y - q`` throughout.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .errors import (
    ConfigError,
    DegenerateObservations,
    DegenerateSimulation,
    LengthMismatch,
    NotSPD,
    ShapeMismatch,
    ZeroScale,
)

__all__ = [
    "LossEvaluation",
    "GlsWeights",
    "HuberConfig",
    "loss_sar",
    "loss_gls",
    "loss_nse",
    "loss_kge",
    "loss_huber",
    "loss_fdc",
    "huber_scale",
    "assemble_gradient",
    "LossFunction",
    "make_loss",
    "LOSS_NAMES",
]

LOSS_NAMES = ("sar", "gls", "nse", "kge", "huber", "fdc")


@dataclass(frozen=True)
class LossEvaluation:
    value: float
    delta: np.ndarray
    aux: dict = field(default_factory=dict)


def _pair(y, q):
    y = np.asarray(y, dtype=np.float64)
    q = np.asarray(q, dtype=np.float64)
    if y.ndim != 1 or y.shape != q.shape:
        raise LengthMismatch(f"observed and simulated lengths differ: {y.shape} vs {q.shape}")
    return y, q


def loss_sar(y, q) -> LossEvaluation:
    """Sum of absolute residuals."""
    y, q = _pair(y, q)
    e = y - q
    return LossEvaluation(float(np.abs(e).sum()), -np.sign(e))


class GlsWeights:
    """Residual covariance for generalised least squares.

    Use :meth:`identity`, :meth:`diagonal` (standard deviations) or
    :meth:`dense` (full SPD covariance, factorised once).
    """

    def __init__(self, kind: str, sigma=None, cov=None):
        self.kind = kind
        self.sigma = None
        self.cov = None
        self._linv = None
        if kind == "identity":
            pass
        elif kind == "diagonal":
            s = np.asarray(sigma, dtype=np.float64)
            if s.ndim != 1 or not np.all(np.isfinite(s)) or np.any(s <= 0):
                raise ConfigError("diagonal GLS weights need finite sigma_t > 0")
            self.sigma = s
        elif kind == "dense":
            c = np.asarray(cov, dtype=np.float64)
            if c.ndim != 2 or c.shape[0] != c.shape[1]:
                raise NotSPD("covariance must be a square matrix")
            if not np.all(np.isfinite(c)) or not np.allclose(c, c.T, rtol=1e-12, atol=0.0):
                raise NotSPD("covariance must be finite and symmetric")
            try:
                L = np.linalg.cholesky(c)
            except np.linalg.LinAlgError:
                raise NotSPD("covariance is not positive definite") from None
            self.cov = c
            self._linv = np.linalg.solve(L, np.eye(c.shape[0]))
        else:
            raise ConfigError(f"unknown GLS weight kind {kind!r}")

    @classmethod
    def identity(cls) -> "GlsWeights":
        return cls("identity")

    @classmethod
    def diagonal(cls, sigma) -> "GlsWeights":
        return cls("diagonal", sigma=sigma)

    @classmethod
    def dense(cls, cov) -> "GlsWeights":
        return cls("dense", cov=cov)

    def _check(self, n):
        size = self.sigma.size if self.kind == "diagonal" else (self.cov.shape[0] if self.kind == "dense" else n)
        if size != n:
            raise LengthMismatch(f"GLS weights cover {size} steps, residual vector has {n}")

    def whiten(self, a):
        """Apply ``L^{-1}`` where ``Sigma = L L^T`` (rows of ``a`` are time steps)."""
        a = np.asarray(a, dtype=np.float64)
        self._check(a.shape[0])
        if self.kind == "identity":
            return a
        if self.kind == "diagonal":
            return a / (self.sigma if a.ndim == 1 else self.sigma[:, None])
        return self._linv @ a

    def solve(self, e):
        """``Sigma^{-1} e``."""
        e = np.asarray(e, dtype=np.float64)
        if self.kind == "identity":
            self._check(e.size)
            return e.copy()
        if self.kind == "diagonal":
            self._check(e.size)
            return e / self.sigma**2
        return self._linv.T @ self.whiten(e)


def loss_gls(y, q, w: Optional[GlsWeights] = None) -> LossEvaluation:
    """``1/2 e^T Sigma^{-1} e``; identity weights give ordinary least squares."""
    y, q = _pair(y, q)
    w = w or GlsWeights.identity()
    e = y - q
    se = w.solve(e)
    return LossEvaluation(float(0.5 * e @ se), -se)


def loss_nse(y, q) -> LossEvaluation:
    """``SS_res / SS_tot``, i.e. one minus the Nash-Sutcliffe efficiency."""
    y, q = _pair(y, q)
    ss_t = float(((y - y.mean()) ** 2).sum())
    if ss_t == 0.0:
        raise DegenerateObservations("observations are constant (zero total sum of squares)")
    ss_r = float(((y - q) ** 2).sum())
    return LossEvaluation(ss_r / ss_t, (2.0 / ss_t) * (q - y), {"ss_t": ss_t, "ss_r": ss_r})


def loss_kge(y, q) -> LossEvaluation:
    """Kling-Gupta distance ``sqrt((r-1)^2 + (nu-1)^2 + (b-1)^2)``.

    ``r`` is the Pearson correlation, ``nu = s_q/s_y`` and ``b = m_q/m_y``
    (sample statistics with ``n - 1``). At a perfect fit the gradient is
    singular and ``delta`` is set to zero.
    """
    y, q = _pair(y, q)
    n = y.size
    if n < 2:
        raise DegenerateObservations("KGE needs at least two values")
    my, mq = y.mean(), q.mean()
    dy, dq = y - my, q - mq
    sy = np.sqrt((dy @ dy) / (n - 1))
    sq = np.sqrt((dq @ dq) / (n - 1))
    if sy == 0.0 or my == 0.0:
        raise DegenerateObservations("observations have zero variance or zero mean")
    if sq == 0.0:
        raise DegenerateSimulation("simulated discharge is constant; correlation undefined")
    r = (dq @ dy) / ((n - 1) * sq * sy)
    nu = sq / sy
    b = mq / my
    value = float(np.sqrt((r - 1) ** 2 + (nu - 1) ** 2 + (b - 1) ** 2))
    aux = {"r": float(r), "nu": float(nu), "b": float(b), "m_y": float(my), "m_q": float(mq),
           "s_y": float(sy), "s_q": float(sq)}
    if value < 1e-12:
        return LossEvaluation(value, np.zeros(n), aux)
    dr = dy / ((n - 1) * sq * sy) - r * dq / ((n - 1) * sq**2)
    dnu = dq / ((n - 1) * sq * sy)
    db = 1.0 / (n * my)
    delta = ((r - 1) * dr + (nu - 1) * dnu + (b - 1) * db) / value
    return LossEvaluation(value, delta, aux)


@dataclass(frozen=True)
class HuberConfig:
    """Huber threshold and scale.

    ``scale_mode="mad"`` uses ``xi * MAD(y)``; ``"fixed"`` uses ``sigma0``.
    """

    c: float = 1.345
    scale_mode: str = "mad"
    sigma0: Optional[float] = None
    xi: float = 1.4826

    def __post_init__(self):
        if not self.c > 0:
            raise ConfigError("Huber threshold c must be positive")
        if self.scale_mode not in ("mad", "fixed"):
            raise ConfigError(f"unknown Huber scale mode {self.scale_mode!r}")
        if self.scale_mode == "fixed" and not (self.sigma0 is not None and self.sigma0 > 0):
            raise ConfigError("fixed Huber scale needs sigma0 > 0")


def huber_scale(y, cfg: HuberConfig = HuberConfig()) -> float:
    if cfg.scale_mode == "fixed":
        return float(cfg.sigma0)
    y = np.asarray(y, dtype=np.float64)
    mad = float(np.median(np.abs(y - np.median(y))))
    if mad == 0.0:
        raise ZeroScale("median absolute deviation of the observations is zero; use a fixed scale")
    return cfg.xi * mad


def loss_huber(y, q, cfg: HuberConfig = HuberConfig(), scale: Optional[float] = None) -> LossEvaluation:
    """Huber M-estimator loss on residuals standardised by a fixed scale.

    ``scale`` overrides the scale derived from ``cfg`` (callers pass the
    value frozen at the start of an optimisation).
    """
    y, q = _pair(y, q)
    s = huber_scale(y, cfg) if scale is None else float(scale)
    u = (y - q) / s
    au = np.abs(u)
    c = cfg.c
    inner = au <= c
    value = float(np.where(inner, 0.5 * u * u, c * au - 0.5 * c * c).sum())
    psi = np.where(inner, u, c * np.sign(u))
    return LossEvaluation(value, -psi / s, {"scale": s})


def _abs_pair_sums(a, b_sorted, b_csum):
    """``sum_j |a_i - b_j|`` for each ``a_i``, via sorted ``b`` and prefix sums."""
    n_b = b_sorted.size
    k = np.searchsorted(b_sorted, a, side="left")
    below = np.where(k > 0, b_csum[np.maximum(k - 1, 0)], 0.0)
    total = b_csum[-1]
    return a * k - below + (total - below) - a * (n_b - k)


def _sign_sums(a, b_sorted):
    """``sum_j sign(a_i - b_j)`` as exact integer counts."""
    lt = np.searchsorted(b_sorted, a, side="left")
    le = np.searchsorted(b_sorted, a, side="right")
    return lt - (b_sorted.size - le)


def loss_fdc(y, q) -> LossEvaluation:
    """Energy distance between the empirical distributions of ``q`` and ``y``.

    ``value = mean|q_i - y_j| - (mean|q_i - q_j| + mean|y_i - y_j|) / 2`` over
    all pairs; runs in ``O(n log n)``.
    """
    y, q = _pair(y, q)
    n = y.size
    if n < 1:
        raise LengthMismatch("FDC loss needs at least one value")
    ys = np.sort(y)
    qs = np.sort(q)
    yc = np.cumsum(ys)
    qc = np.cumsum(qs)
    n2 = float(n * n)
    cross = _abs_pair_sums(q, ys, yc).sum()
    self_q = _abs_pair_sums(q, qs, qc).sum()
    self_y = _abs_pair_sums(y, ys, yc).sum()
    value = float(cross / n2 - (self_q + self_y) / (2.0 * n2))
    counts = _sign_sums(q, ys) - _sign_sums(q, qs)
    # the V-statistic is nonnegative; only roundoff can push it below zero
    return LossEvaluation(max(value, 0.0), counts / n2)


def assemble_gradient(J_q, ev: LossEvaluation) -> np.ndarray:
    """``g = J_q^T delta``."""
    J = np.asarray(J_q, dtype=np.float64)
    if J.ndim != 2 or J.shape[0] != ev.delta.size:
        raise ShapeMismatch(f"Jacobian has shape {J.shape}, delta has length {ev.delta.size}")
    return J.T @ ev.delta


class LossFunction:
    """A loss bound to fixed observations: ``loss(q) -> LossEvaluation``.

    Anything that must stay constant over an optimisation (Huber scale, GLS
    factorisation) is computed once here. For least-squares type losses
    :meth:`gauss_newton` returns the Gauss-Newton curvature ``J^T M J`` with
    ``L ~ 1/2 e^T M e``.
    """

    def __init__(self, name: str, y, gls_weights: Optional[GlsWeights] = None,
                 huber: Optional[HuberConfig] = None):
        if name not in LOSS_NAMES:
            raise ConfigError(f"unknown loss {name!r}; choose from {LOSS_NAMES}")
        self.name = name
        self.y = np.asarray(y, dtype=np.float64)
        self.gls_weights = gls_weights or GlsWeights.identity()
        self.huber = huber or HuberConfig()
        self.huber_scale = huber_scale(self.y, self.huber) if name == "huber" else None
        if name == "gls":
            self.gls_weights._check(self.y.size)
        if name == "nse":
            self._ss_t = float(((self.y - self.y.mean()) ** 2).sum())
            if self._ss_t == 0.0:
                raise DegenerateObservations("observations are constant (zero total sum of squares)")

    @property
    def supports_lm(self) -> bool:
        return self.name in ("gls", "nse")

    def __call__(self, q) -> LossEvaluation:
        if self.name == "sar":
            return loss_sar(self.y, q)
        if self.name == "gls":
            return loss_gls(self.y, q, self.gls_weights)
        if self.name == "nse":
            return loss_nse(self.y, q)
        if self.name == "kge":
            return loss_kge(self.y, q)
        if self.name == "huber":
            return loss_huber(self.y, q, self.huber, scale=self.huber_scale)
        return loss_fdc(self.y, q)

    def gauss_newton(self, J) -> np.ndarray:
        if self.name == "gls":
            W = self.gls_weights.whiten(J)
            return W.T @ W
        if self.name == "nse":
            return (2.0 / self._ss_t) * (J.T @ J)
        raise ConfigError(f"Levenberg-Marquardt needs a least-squares loss (gls or nse), not {self.name!r}")


def make_loss(name: str, y, gls_weights: Optional[GlsWeights] = None,
              huber: Optional[HuberConfig] = None) -> LossFunction:
    return LossFunction(name, y, gls_weights, huber)
