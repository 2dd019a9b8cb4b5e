"""In-memory forcing, observation and parameter-space types."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, LengthMismatch, NegativeDriver, NonFinite

__all__ = ["ForcingSeries", "ObservedDischarge", "ParameterSpace", "AlignmentReport", "validate_series"]


def _readonly(a) -> np.ndarray:
    arr = np.array(a, dtype=np.float64, copy=True)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class ForcingSeries:
    """Precipitation and potential ET per reporting step (unit step length).

    Args:
        precip: rates ``p_t`` in mm per time unit, length ``n_total``.
        pet: potential evapotranspiration rates ``e_p,t``, same length.
        spin_up: leading steps excluded from any loss.
    """

    precip: np.ndarray
    pet: np.ndarray
    spin_up: int = 0
    dt: float = field(default=1.0, init=False)

    def __post_init__(self):
        p = _readonly(self.precip)
        e = _readonly(self.pet)
        if p.ndim != 1 or e.ndim != 1:
            raise LengthMismatch("precip and pet must be 1-D")
        if p.shape != e.shape:
            raise LengthMismatch(f"precip has {p.size} entries, pet has {e.size}")
        if p.size < 2:
            raise LengthMismatch("need at least 2 reporting steps")
        if not (np.all(np.isfinite(p)) and np.all(np.isfinite(e))):
            raise NonFinite("forcing contains NaN or Inf")
        if np.any(p < 0) or np.any(e < 0):
            raise NegativeDriver("precip and pet must be >= 0")
        spin = int(self.spin_up)
        if spin != self.spin_up or not 0 <= spin < p.size:
            raise ConfigError(f"spin_up must be an integer in [0, {p.size}), got {self.spin_up}")
        object.__setattr__(self, "precip", p)
        object.__setattr__(self, "pet", e)
        object.__setattr__(self, "spin_up", spin)

    @property
    def n_total(self) -> int:
        return int(self.precip.size)

    @property
    def n(self) -> int:
        """Length of the loss window."""
        return self.n_total - self.spin_up

    def with_spin_up(self, spin_up: int) -> "ForcingSeries":
        return ForcingSeries(self.precip, self.pet, spin_up)


@dataclass(frozen=True)
class ObservedDischarge:
    """Observed discharge aligned to the post-spin-up reporting steps."""

    y: np.ndarray

    def __post_init__(self):
        y = _readonly(self.y)
        if y.ndim != 1:
            raise LengthMismatch("observations must be 1-D")
        if not np.all(np.isfinite(y)):
            raise NonFinite("observed discharge contains NaN or Inf")
        if np.any(y < 0):
            raise NegativeDriver("observed discharge must be >= 0")
        object.__setattr__(self, "y", y)

    def __len__(self) -> int:
        return int(self.y.size)


@dataclass(frozen=True)
class ParameterSpace:
    """Names and box bounds of a model's parameters."""

    names: tuple
    lower: np.ndarray
    upper: np.ndarray

    def __post_init__(self):
        names = tuple(str(n) for n in self.names)
        lo = _readonly(self.lower)
        hi = _readonly(self.upper)
        if not (lo.ndim == hi.ndim == 1 and lo.size == hi.size == len(names)):
            raise ConfigError("names, lower and upper must have the same length")
        if len(set(names)) != len(names):
            raise ConfigError("parameter names must be unique")
        if not (np.all(np.isfinite(lo)) and np.all(np.isfinite(hi))):
            raise ConfigError("bounds must be finite")
        if np.any(lo >= hi):
            bad = [names[j] for j in np.flatnonzero(lo >= hi)]
            raise ConfigError(f"lower bound must be < upper bound for {bad}")
        object.__setattr__(self, "names", names)
        object.__setattr__(self, "lower", lo)
        object.__setattr__(self, "upper", hi)

    @property
    def d(self) -> int:
        return len(self.names)

    @property
    def width(self) -> np.ndarray:
        return self.upper - self.lower

    def from_unit(self, theta_bar) -> np.ndarray:
        return self.lower + np.asarray(theta_bar, dtype=np.float64) * self.width

    def to_unit(self, theta) -> np.ndarray:
        return (np.asarray(theta, dtype=np.float64) - self.lower) / self.width

    def midpoint(self) -> np.ndarray:
        return self.from_unit(np.full(self.d, 0.5))

    def contains(self, theta) -> bool:
        t = np.asarray(theta, dtype=np.float64)
        return bool(t.shape == (self.d,) and np.all(t >= self.lower) and np.all(t <= self.upper))

    def replace_bounds(self, overrides: dict) -> "ParameterSpace":
        """Return a copy with some ``name -> (lower, upper)`` bounds replaced."""
        lo = self.lower.copy()
        hi = self.upper.copy()
        for name, (a, b) in overrides.items():
            if name not in self.names:
                raise ConfigError(f"unknown parameter {name!r}; expected one of {self.names}")
            j = self.names.index(name)
            lo[j], hi[j] = a, b
        return ParameterSpace(self.names, lo, hi)


@dataclass(frozen=True)
class AlignmentReport:
    n_total: int
    spin_up: int
    n: int
    ok: bool = True


def validate_series(forcing: ForcingSeries, obs: ObservedDischarge) -> AlignmentReport:
    """Check that observations cover exactly the post-spin-up window.

    Per-array invariants (finiteness, signs) are enforced when the objects
    are built, so only the alignment is left to check here.
    """
    n = forcing.n_total - forcing.spin_up
    if len(obs) != n:
        raise LengthMismatch(
            f"observed discharge has {len(obs)} values but the loss window has "
            f"n_total - spin_up = {forcing.n_total} - {forcing.spin_up} = {n}"
        )
    return AlignmentReport(forcing.n_total, forcing.spin_up, n)
