"""Persistent monitoring of a 1-D mission space by a single agent.

Exact event-driven simulation, perturbation-analysis gradients over the
switching locations of a bang-bang patrol, projected-gradient optimization
and a receding-horizon controller.
"""

from .hybrid_sim import Event, Trajectory, simulate, simulate_team
from .ipa import finite_difference_gradient, general_ipa_gradient, ipa_gradient
from .model import (ConfigError, MissionConfig, SamplePoint, SwitchingSchedule,
                    detection_probability, joint_detection_probability, uniform_config)
from .optimizer import OptimizerReport, OptimizerSettings, optimize
from .receding_horizon import RhSettings, rh_run, rh_step

__all__ = [
    "ConfigError", "Event", "MissionConfig", "OptimizerReport", "OptimizerSettings",
    "RhSettings", "SamplePoint", "SwitchingSchedule", "Trajectory",
    "detection_probability", "finite_difference_gradient", "general_ipa_gradient",
    "ipa_gradient", "joint_detection_probability", "optimize", "rh_run", "rh_step",
    "simulate", "simulate_team", "uniform_config",
]
__version__ = "0.1.0"
