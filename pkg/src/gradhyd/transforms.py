"""Maps between physical, unit-cube and unconstrained parameters.

``theta = lower + theta_bar * (upper - lower)`` and
``theta_bar = 1 / (1 + exp(-vartheta))``. Optimizers work on ``vartheta``,
which removes the box constraints.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import OnBoundary, ShapeMismatch
from .timeseries import ParameterSpace

__all__ = ["TransformedPoint", "to_physical", "to_unconstrained", "from_unit_cube", "rescale_jacobian", "logit", "expit"]

_BAR_EPS = 1e-15


def expit(v):
    v = np.asarray(v, dtype=np.float64)
    # two-branch form avoids overflow in exp for large |v|
    e = np.exp(-np.abs(v))
    return np.where(v >= 0, 1.0 / (1.0 + e), e / (1.0 + e))


def logit(tb):
    tb = np.clip(np.asarray(tb, dtype=np.float64), _BAR_EPS, 1.0 - _BAR_EPS)
    return np.log(tb) - np.log1p(-tb)


@dataclass(frozen=True)
class TransformedPoint:
    theta: np.ndarray
    theta_bar: np.ndarray
    vartheta: np.ndarray
    chain: np.ndarray


def _point(space: ParameterSpace, theta_bar, vartheta) -> TransformedPoint:
    # keep theta_bar strictly inside (0, 1) when the logistic saturates
    theta_bar = np.clip(theta_bar, np.nextafter(0.0, 1.0), np.nextafter(1.0, 0.0))
    theta = np.minimum(np.maximum(space.from_unit(theta_bar), space.lower), space.upper)
    chain = space.width * theta_bar * (1.0 - theta_bar)
    return TransformedPoint(theta, theta_bar, vartheta, chain)


def to_physical(vartheta, space: ParameterSpace) -> TransformedPoint:
    v = np.asarray(vartheta, dtype=np.float64)
    if v.shape != (space.d,):
        raise ShapeMismatch(f"expected {space.d} coordinates, got shape {v.shape}")
    return _point(space, expit(v), v.copy())


def to_unconstrained(theta, space: ParameterSpace) -> TransformedPoint:
    t = np.asarray(theta, dtype=np.float64)
    if t.shape != (space.d,):
        raise ShapeMismatch(f"expected {space.d} coordinates, got shape {t.shape}")
    on_bound = (t <= space.lower) | (t >= space.upper)
    if np.any(on_bound):
        names = [space.names[j] for j in np.flatnonzero(on_bound)]
        raise OnBoundary(f"parameters {names} are not strictly inside their bounds")
    tb = space.to_unit(t)
    return TransformedPoint(t.copy(), tb, logit(tb), space.width * tb * (1.0 - tb))


def from_unit_cube(theta_bar, space: ParameterSpace) -> TransformedPoint:
    tb = np.asarray(theta_bar, dtype=np.float64)
    if tb.shape != (space.d,):
        raise ShapeMismatch(f"expected {space.d} coordinates, got shape {tb.shape}")
    v = logit(tb)
    return to_physical(v, space)


def rescale_jacobian(J_theta, point: TransformedPoint) -> np.ndarray:
    """Scale column ``j`` by ``d theta_j / d vartheta_j``; also works for gradients."""
    J = np.asarray(J_theta, dtype=np.float64)
    if J.shape[-1] != point.chain.size:
        raise ShapeMismatch(f"last axis has {J.shape[-1]} entries, expected {point.chain.size}")
    return J * point.chain
