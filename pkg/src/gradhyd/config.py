"""Run configuration read from a flat INI file.

Example::

    [run]
    model = hymod
    loss = gls
    optimizer = lm
    spin_up = 365
    n_starts = 20
    seed = 1

    [solver]
    abstol = 1e-5
    reltol = 1e-5

    [losses]
    gls_weights = identity          # or diagonal:sigma.csv / dense:cov.csv
    huber_c = 1.345
    huber_scale_mode = mad

    [optimizers]
    k_max = 200

    [bounds]
    k_f = 0.1, 0.9

    [parameters]                    # used by simulate/jacobian/gradient
    s_u_max = 300

Relative paths are resolved against the directory of the config file.
"""

from __future__ import annotations

import configparser
from dataclasses import dataclass, field, fields, replace
from pathlib import Path
from typing import Dict, Optional, Tuple

import numpy as np

from .errors import ConfigError
from .losses import LOSS_NAMES, GlsWeights, HuberConfig
from .models import MODELS, get_model
from .optimizers import GdConfig, LmConfig
from .solver import SolverConfig

__all__ = ["OPTIMIZERS", "RunConfig", "load_config", "parse_config"]

OPTIMIZERS = ("gd", "lm")
LM_LOSSES = ("gls", "nse")


@dataclass(frozen=True)
class RunConfig:
    model: str = "hymod"
    loss: str = "gls"
    optimizer: str = "lm"
    spin_up: int = 0
    n_starts: int = 20
    seed: int = 0
    n_jobs: int = 1
    solver: SolverConfig = SolverConfig()
    gls_weights: str = "identity"
    huber: HuberConfig = HuberConfig()
    gd: GdConfig = GdConfig()
    lm: LmConfig = LmConfig()
    bounds_override: Dict[str, Tuple[float, float]] = field(default_factory=dict)
    parameters: Dict[str, float] = field(default_factory=dict)
    base_dir: Path = Path(".")

    def __post_init__(self):
        if self.model not in MODELS:
            raise ConfigError(f"unknown model {self.model!r}; choose from {sorted(MODELS)}")
        if self.loss not in LOSS_NAMES:
            raise ConfigError(f"unknown loss {self.loss!r}; choose from {LOSS_NAMES}")
        if self.optimizer not in OPTIMIZERS:
            raise ConfigError(f"unknown optimizer {self.optimizer!r}; choose from {OPTIMIZERS}")
        if self.optimizer == "lm" and self.loss not in LM_LOSSES:
            raise ConfigError(f"optimizer lm needs a least-squares loss {LM_LOSSES}, not {self.loss!r}")
        if self.spin_up < 0 or self.n_starts < 1 or self.n_jobs < 1:
            raise ConfigError("spin_up must be >= 0, n_starts and n_jobs >= 1")
        kind, _, path = self.gls_weights.partition(":")
        if kind not in ("identity", "diagonal", "dense") or (kind != "identity") != bool(path):
            raise ConfigError(f"gls_weights must be identity, diagonal:<path> or dense:<path>, got {self.gls_weights!r}")
        if path and not self.resolve(path).is_file():
            raise ConfigError(f"GLS weight file {self.resolve(path)} does not exist")
        self.theta(self.build_model().space)  # validates bounds and parameter values

    def resolve(self, path) -> Path:
        p = Path(path)
        return p if p.is_absolute() else self.base_dir / p

    def with_overrides(self, **kw) -> "RunConfig":
        return replace(self, **{k: v for k, v in kw.items() if v is not None})

    def build_model(self):
        model = get_model(self.model)
        if self.bounds_override:
            model = model.with_space(model.space.replace_bounds(self.bounds_override))
        return model

    def theta(self, space) -> np.ndarray:
        """Box midpoint with the ``[parameters]`` entries substituted."""
        theta = space.midpoint()
        for name, value in self.parameters.items():
            if name not in space.names:
                raise ConfigError(f"[parameters] unknown parameter {name!r}; expected one of {space.names}")
            theta[space.names.index(name)] = value
        if not np.all((theta > space.lower) & (theta < space.upper)):
            raise ConfigError("[parameters] values must lie strictly inside the bounds")
        return theta

    def build_gls_weights(self) -> GlsWeights:
        from .dataio import load_matrix_csv, load_vector_csv

        kind, _, path = self.gls_weights.partition(":")
        if kind == "identity":
            return GlsWeights.identity()
        if kind == "diagonal":
            return GlsWeights.diagonal(load_vector_csv(self.resolve(path)))
        return GlsWeights.dense(load_matrix_csv(self.resolve(path)))


def _typed(dc, section, name: str):
    """Rebuild dataclass instance ``dc`` with the keys present in mapping ``section``."""
    kinds = {f.name: type(getattr(dc, f.name)) for f in fields(dc)}
    out = {}
    for key, raw in section.items():
        if key not in kinds:
            raise ConfigError(f"[{name}] unknown key {key!r}")
        kind = kinds[key]
        try:
            if raw.strip().lower() == "none":
                out[key] = None
            elif kind is int:
                out[key] = int(raw)
            else:
                out[key] = float(raw)
        except ValueError:
            raise ConfigError(f"[{name}] {key} = {raw!r} is not a number") from None
    try:
        return replace(dc, **out)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"[{name}] {exc}") from None


def parse_config(text: str, base_dir=".") -> RunConfig:
    cp = configparser.ConfigParser(inline_comment_prefixes=("#", ";"), interpolation=None)
    cp.optionxform = str
    try:
        cp.read_string(text)
    except configparser.Error as exc:
        raise ConfigError(f"malformed config: {exc}") from None
    known = {"run", "solver", "losses", "optimizers", "bounds", "parameters"}
    for sec in cp.sections():
        if sec not in known:
            raise ConfigError(f"unknown config section [{sec}]")
    kw = {"base_dir": Path(base_dir)}
    if cp.has_section("run"):
        run = cp["run"]
        for key, raw in run.items():
            if key in ("model", "loss", "optimizer"):
                kw[key] = raw.strip().lower()
            elif key in ("spin_up", "n_starts", "seed", "n_jobs"):
                try:
                    kw[key] = int(raw)
                except ValueError:
                    raise ConfigError(f"[run] {key} = {raw!r} is not an integer") from None
            else:
                raise ConfigError(f"[run] unknown key {key!r}")
    if cp.has_section("solver"):
        kw["solver"] = _typed(SolverConfig(), cp["solver"], "solver")
    if cp.has_section("losses"):
        sec = dict(cp["losses"])
        if "gls_weights" in sec:
            kw["gls_weights"] = sec.pop("gls_weights").strip()
        hub = {}
        for key, raw in sec.items():
            if key == "huber_scale_mode":
                hub["scale_mode"] = raw.strip().lower()
            elif key in ("huber_c", "huber_sigma0", "huber_xi"):
                try:
                    hub[key[6:]] = float(raw)
                except ValueError:
                    raise ConfigError(f"[losses] {key} = {raw!r} is not a number") from None
            else:
                raise ConfigError(f"[losses] unknown key {key!r}")
        kw["huber"] = HuberConfig(**hub)
    if cp.has_section("optimizers"):
        sec = cp["optimizers"]
        gd_keys = {f.name for f in fields(GdConfig)}
        lm_keys = {f.name for f in fields(LmConfig)}
        gd, lm = {}, {}
        for key, raw in sec.items():
            if key not in gd_keys | lm_keys:
                raise ConfigError(f"[optimizers] unknown key {key!r}")
            if key in gd_keys:
                gd[key] = raw
            if key in lm_keys:
                lm[key] = raw
        kw["gd"] = _typed(GdConfig(), gd, "optimizers")
        kw["lm"] = _typed(LmConfig(), lm, "optimizers")
    if cp.has_section("bounds"):
        bounds = {}
        for key, raw in cp["bounds"].items():
            try:
                lo, hi = (float(v) for v in raw.split(","))
            except ValueError:
                raise ConfigError(f"[bounds] {key} must be 'lower, upper'") from None
            bounds[key] = (lo, hi)
        kw["bounds_override"] = bounds
    if cp.has_section("parameters"):
        params = {}
        for key, raw in cp["parameters"].items():
            try:
                params[key] = float(raw)
            except ValueError:
                raise ConfigError(f"[parameters] {key} = {raw!r} is not a number") from None
        kw["parameters"] = params
    return RunConfig(**kw)


def load_config(path: Optional[str]) -> RunConfig:
    if path is None:
        return RunConfig()
    p = Path(path)
    if not p.is_file():
        raise ConfigError(f"config file {p} does not exist")
    return parse_config(p.read_text(encoding="utf-8"), p.parent)
