"""pogosim: hybrid flight/contact simulator and energy study harness for a
spring-legged quadrotor."""

from .params import (RobotParams, ControlGains, BhcConfig, NoiseConfig,
                     TrialConfig, SweepSpec, Mode, Factor, ConfigError,
                     SimulationFault)
from .dynamics import RigidState, PogoState, ControlCommand
from .control import BhcPhase
from .metrics import TrialMetrics
from .harness import (run_trial, compare_modes, sweep, TrialResult,
                      ModeComparison, SweepResult)

__all__ = [
    "RobotParams", "ControlGains", "BhcConfig", "NoiseConfig", "TrialConfig",
    "SweepSpec", "Mode", "Factor", "ConfigError", "SimulationFault",
    "RigidState", "PogoState", "ControlCommand", "BhcPhase", "TrialMetrics",
    "run_trial", "compare_modes", "sweep", "TrialResult", "ModeComparison",
    "SweepResult",
]

__version__ = "0.1.0"
