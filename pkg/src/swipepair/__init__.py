"""Swipe-motion RSSI proximity pairing: simulator and security test bench."""

from .channel import ChannelParams, Trajectory, deterministic_pathloss, fading_sigma_for
from .config import ScenarioConfig, load_config
from .detect import GeometryGates, ValleyDetectionParams
from .harness import monte_carlo, roc_curve, run_scenario
from .presets import environment_preset, trajectory_preset
from .protocol import PairingSettings, pair

__version__ = "0.1.0"

__all__ = [
    "ChannelParams",
    "GeometryGates",
    "PairingSettings",
    "ScenarioConfig",
    "Trajectory",
    "ValleyDetectionParams",
    "deterministic_pathloss",
    "environment_preset",
    "fading_sigma_for",
    "load_config",
    "monte_carlo",
    "pair",
    "roc_curve",
    "run_scenario",
    "trajectory_preset",
    "__version__",
]
