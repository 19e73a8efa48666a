"""Adaptive deep-network RISE position control for a multirotor carrying two arms."""

from .config import ConfigError, SimConfig, load_config, scenario_preset
from .controllers import (BaselinePD, ControllerGains, DnnRiseController, GainCertificate, Verdict,
                          check_gain_conditions, rise_step)
from .dnn import DeepFeedforward, DnnParameters
from .harness import SimTrace, compare_controllers, compute_metrics, export, run_scenario
from .kinematics import ArmGeometry, JointState, com_offset, forward_kinematics, jacobian
from .plant import Plant, PlantParams

__all__ = [
    "ArmGeometry", "BaselinePD", "ConfigError", "ControllerGains", "DeepFeedforward", "DnnParameters",
    "DnnRiseController", "GainCertificate", "JointState", "Plant", "PlantParams", "SimConfig", "SimTrace",
    "Verdict", "check_gain_conditions", "com_offset", "compare_controllers", "compute_metrics", "export",
    "forward_kinematics", "jacobian", "load_config", "rise_step", "run_scenario", "scenario_preset",
]
