"""Seamless two-stage dose-optimization trial engine and simulator."""

__version__ = "0.1.0"

from .boin import BoinParams, boin_boundaries
from .blrm import BlrmParams
from .config import DesignConfig, TimingModel, comparator_designs, load_sim_config
from .scenarios import PRESETS, ScenarioTruth, get_scenario
from .sim import OcReport, replicate, run_trial

__all__ = [
    "BoinParams",
    "BlrmParams",
    "DesignConfig",
    "TimingModel",
    "OcReport",
    "PRESETS",
    "ScenarioTruth",
    "boin_boundaries",
    "comparator_designs",
    "get_scenario",
    "load_sim_config",
    "replicate",
    "run_trial",
]
