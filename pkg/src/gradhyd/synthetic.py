"""Synthetic forcing and noise-free "observed" discharge for a known truth."""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Optional

import numpy as np

from .solver import SolverConfig, discharge_from_cumulative, integrate_states
from .timeseries import ForcingSeries

__all__ = ["SyntheticSpec", "SyntheticData", "synthetic_forcing", "generate_synthetic"]


@dataclass(frozen=True)
class SyntheticSpec:
    """Stochastic daily forcing: wet days with exponential depths, sinusoidal PET.

    ``theta_star_unit`` gives the truth in unit-cube coordinates; ``None``
    means the midpoint of the parameter box.
    """

    seed: int = 0
    n_total: int = 730
    spin_up: int = 365
    wet_probability: float = 0.4
    mean_depth: float = 8.0
    pet_mean: float = 3.0
    pet_amplitude: float = 2.0
    period: float = 365.0
    theta_star_unit: Optional[tuple] = None
    truth_tol: float = 1e-8


@dataclass(frozen=True)
class SyntheticData:
    forcing: ForcingSeries
    discharge: np.ndarray  # all n_total steps, spin-up included
    theta_star: np.ndarray
    theta_star_unit: np.ndarray

    @property
    def observed(self) -> np.ndarray:
        return self.discharge[self.forcing.spin_up:]


def synthetic_forcing(spec: SyntheticSpec) -> ForcingSeries:
    rng = np.random.default_rng(spec.seed)
    wet = rng.random(spec.n_total) < spec.wet_probability
    depth = rng.exponential(spec.mean_depth, spec.n_total)
    precip = np.where(wet, depth, 0.0)
    t = np.arange(spec.n_total, dtype=np.float64)
    pet = spec.pet_mean + spec.pet_amplitude * np.sin(2.0 * np.pi * t / spec.period)
    return ForcingSeries(precip, pet, spec.spin_up)


def generate_synthetic(spec: SyntheticSpec, model) -> SyntheticData:
    """Forcing plus the model's discharge at the truth, solved at tight tolerance."""
    forcing = synthetic_forcing(spec)
    unit = np.full(model.d, 0.5) if spec.theta_star_unit is None else np.asarray(spec.theta_star_unit, dtype=np.float64)
    theta = model.space.from_unit(unit)
    cfg = SolverConfig().with_tolerance(spec.truth_tol)
    cfg = replace(cfg, h_min=min(cfg.h_min, 1e-8))
    traj = integrate_states(model, theta, forcing, cfg)
    q = discharge_from_cumulative(traj.states[:, -1], 0)
    return SyntheticData(forcing, q, theta, unit)
