"""Model registry."""

from .base import DynamicsEval, ModelDynamics
from .consistency import ConsistencyReport, check_dynamics_consistency
from .hmodel import Hmodel, phi_shape, phi_smooth
from .hymod import Hymod
from .linres import LinearReservoir
from ..errors import ConfigError

__all__ = ["DynamicsEval", "ModelDynamics", "Hymod", "Hmodel", "LinearReservoir",
           "phi_smooth", "phi_shape", "MODELS", "get_model",
           "ConsistencyReport", "check_dynamics_consistency"]

MODELS = {"hymod": Hymod, "hmodel": Hmodel}


def get_model(name: str) -> ModelDynamics:
    try:
        return MODELS[name]()
    except KeyError:
        raise ConfigError(f"unknown model {name!r}; choose from {sorted(MODELS)}") from None
