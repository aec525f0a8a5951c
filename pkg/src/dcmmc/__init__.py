"""Diode-clamped MMC simulator and module-voltage estimation workbench.

The switched plant runs on a compiled kernel when available and falls back to
a numpy kernel otherwise; `dcmmc.active_backend_name()` reports which one is
live.
"""

__version__ = "0.1.0"

from ._backend import active_backend_name, available_backends, get_backend
from .config import (ConverterConfig, ModuleParams, ToleranceSpec,
                     apply_tolerances, derive_load, peak_clamp_current_bound,
                     size_clamping_inductor)
from .errors import ConfigError, EstimatorFault, SimulationFault

__all__ = [
    "__version__",
    "active_backend_name",
    "available_backends",
    "get_backend",
    "ConverterConfig",
    "ModuleParams",
    "ToleranceSpec",
    "apply_tolerances",
    "derive_load",
    "peak_clamp_current_bound",
    "size_clamping_inductor",
    "ConfigError",
    "SimulationFault",
    "EstimatorFault",
]
