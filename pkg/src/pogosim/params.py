"""Configuration dataclasses and validation for the simulator.

All quantities are SI. Defaults describe a ~31 g quadrotor with a 55 mm
spring leg; every value can be overridden from a JSON config file.
"""

from dataclasses import dataclass, field, replace
from enum import Enum

import numpy as np


class ConfigError(ValueError):
    """Invalid configuration or CLI usage (exit code 1 at the CLI)."""


class SimulationFault(RuntimeError):
    """Numerical fault during a run (exit code 2 at the CLI).

    Carries the step index at which the state diverged or the contact
    geometry collapsed.
    """

    def __init__(self, message, step=None):
        super().__init__(message)
        self.step = step


DEFAULT_INERTIA_DIAG = (1.4e-5, 1.4e-5, 2.2e-5)


@dataclass
class RobotParams:
    """Physical constants of the vehicle and its spring leg."""

    m: float = 0.031              # kg, vehicle + leg
    k: float = 400.0              # N/m spring constant
    b: float = 1.0                # N*s/m damping factor
    l0: float = 0.055             # m natural leg length
    l_min: float = 0.040          # m leg length at the mechanical stop
    g: float = 9.81               # m/s^2
    arm: float = 0.046            # m center-to-rotor distance (X layout)
    k_yaw: float = 0.006          # m yaw torque per unit thrust
    f_rotor_max: float = 0.15     # N per-rotor force ceiling
    k_stop_ratio: float = 50.0    # hard-stop stiffness as a multiple of k
    freeze_contact_inertia: bool = False  # pivot inertia from l0 instead of l
    inertia_diag: tuple = DEFAULT_INERTIA_DIAG

    def __post_init__(self):
        if self.m <= 0:
            raise ConfigError("robot.m must be > 0")
        if self.k <= 0:
            raise ConfigError("robot.k must be > 0")
        if self.b < 0:
            raise ConfigError("robot.b must be >= 0")
        if not (0 < self.l_min < self.l0):
            raise ConfigError("robot lengths must satisfy 0 < l_min < l0")
        if self.arm <= 0:
            raise ConfigError("robot.arm must be > 0")
        if self.k_yaw <= 0:
            raise ConfigError("robot.k_yaw must be > 0")
        if self.f_rotor_max <= 0:
            raise ConfigError("robot.f_rotor_max must be > 0")
        if self.k_stop_ratio < 10.0:
            raise ConfigError("robot.k_stop_ratio must be >= 10")
        if self.g < 0:
            raise ConfigError("robot.g must be >= 0")
        I = self.inertia()
        if np.max(np.abs(I - I.T)) > 1e-12:
            raise ConfigError("robot inertia must be symmetric")
        if np.min(np.linalg.eigvalsh(I)) <= 0:
            raise ConfigError("robot inertia must be positive definite")

    def inertia(self):
        """Body inertia tensor as a (3, 3) array."""
        d = np.asarray(self.inertia_diag, dtype=float)
        if d.shape == (3,):
            return np.diag(d)
        if d.shape == (3, 3):
            return d.copy()
        raise ConfigError("robot.inertia_diag must have 3 or 3x3 entries")

    @property
    def k_stop(self):
        """Hard-stop penalty stiffness engaged below l_min."""
        return self.k_stop_ratio * self.k

    @property
    def c_stop(self):
        """Hard-stop damping: stiffness-proportional, so a lossless
        spring (b = 0) also has a lossless stop."""
        return self.b * self.k_stop_ratio

    @property
    def f_hover(self):
        """Per-rotor force at hover, the actuation-noise scale."""
        return self.m * self.g / 4.0


@dataclass
class ControlGains:
    """Geometric controller gains (position/velocity, attitude/rate)."""

    kx: float = 6.0      # N/m
    kv: float = 4.0      # N*s/m
    kR: float = 5.0e-3   # N*m
    kw: float = 2.5e-4   # N*m*s

    def __post_init__(self):
        if min(self.kx, self.kv, self.kR, self.kw) <= 0:
            raise ConfigError("all controller gains must be > 0")


@dataclass
class BhcConfig:
    """Setpoint and thresholds of the bounce-hover supervisor."""

    r_d: tuple = (0.0, 0.0, 0.8)  # m desired position
    psi_d: float = 0.0            # rad desired yaw
    sphere_radius: float = 0.05   # m acceptance sphere around r_d
    w_thresh: float = 0.5         # rad/s angular-rate gate for descending
    epsilon: float = 1.0e-4       # N attitude-only thrust floor
    dwell_time: float = 0.0       # s minimum settling time before a drop

    def __post_init__(self):
        if self.sphere_radius <= 0:
            raise ConfigError("bhc.sphere_radius must be > 0")
        if self.w_thresh <= 0:
            raise ConfigError("bhc.w_thresh must be > 0")
        if not (0 < self.epsilon <= 1e-3):
            raise ConfigError("bhc.epsilon must be in (0, 1e-3] N")
        if self.dwell_time < 0:
            raise ConfigError("bhc.dwell_time must be >= 0")
        if len(self.r_d) != 3:
            raise ConfigError("bhc.r_d must have 3 components")

    def r_d_array(self):
        return np.asarray(self.r_d, dtype=float)


@dataclass
class NoiseConfig:
    """Disturbance model: rotor-force noise plus a per-touchdown ground tilt.

    sigma is dimensionless; rotor forces receive additive Gaussian noise with
    standard deviation sigma times the per-rotor hover force, and each
    touchdown draws one ground-tilt angle from N(0, (5*sigma)^2) radians,
    clamped to +-max_ground_tilt so the contact force can never point into
    the floor.
    """

    sigma: float = 0.2
    seed: int = 0
    max_ground_tilt: float = 1.2  # rad

    def __post_init__(self):
        if self.sigma < 0:
            raise ConfigError("noise.sigma must be >= 0")
        if not (0 < self.max_ground_tilt <= np.pi / 2):
            raise ConfigError("noise.max_ground_tilt must be in (0, pi/2]")
        if not (-(2**63) <= int(self.seed) < 2**64):
            raise ConfigError("noise.seed must fit in 64 bits")


class Mode(str, Enum):
    HOVER = "hover"
    BOUNCE = "bounce"


class Factor(str, Enum):
    NOISE_LEVEL = "noise_level"
    SPRING_CONSTANT = "spring_constant"
    DAMPING_FACTOR = "damping_factor"
    DESIRED_HEIGHT = "desired_height"


@dataclass
class TrialConfig:
    """Everything needed to run one closed-loop trial."""

    mode: Mode = Mode.BOUNCE
    params: RobotParams = field(default_factory=RobotParams)
    gains: ControlGains = field(default_factory=ControlGains)
    bhc: BhcConfig = field(default_factory=BhcConfig)
    noise: NoiseConfig = field(default_factory=NoiseConfig)
    t_f: float = 18.0
    dt: float = 1.0e-3
    record_trajectory: bool = False

    def __post_init__(self):
        if isinstance(self.mode, str):
            self.mode = Mode(self.mode)
        if self.t_f <= 0 or self.dt <= 0:
            raise ConfigError("trial.t_f and trial.dt must be > 0")
        n = self.t_f / self.dt
        if abs(n - round(n)) > 1e-9:
            raise ConfigError("trial.t_f must be an integer number of steps")

    @property
    def n_steps(self):
        return int(round(self.t_f / self.dt))


# Sweep grids mirroring the visible ranges of the batch study figures.
DEFAULT_SWEEP_VALUES = {
    Factor.NOISE_LEVEL: [0.0, 0.1, 0.2, 0.3, 0.4, 0.5, 0.6],
    Factor.SPRING_CONSTANT: [100.0, 200.0, 300.0, 400.0, 500.0, 600.0,
                             700.0, 800.0, 900.0, 1000.0, 1100.0],
    Factor.DAMPING_FACTOR: [0.01, 0.1, 0.25, 0.5, 1.0, 2.0, 4.0],
    Factor.DESIRED_HEIGHT: [0.5, 0.8, 1.0, 1.5, 2.0, 2.5, 3.0],
}


@dataclass
class SweepSpec:
    """One-factor batch study: hover vs bounce at each grid value."""

    factor: Factor = Factor.NOISE_LEVEL
    values: list = None
    trials_per_value: int = 20
    base: TrialConfig = field(default_factory=TrialConfig)

    def __post_init__(self):
        if isinstance(self.factor, str):
            try:
                self.factor = Factor(self.factor)
            except ValueError:
                names = ", ".join(f.value for f in Factor)
                raise ConfigError(
                    f"sweep.factor must be one of: {names}") from None
        if self.values is None:
            self.values = list(DEFAULT_SWEEP_VALUES[self.factor])
        self.values = [float(v) for v in self.values]
        if not self.values:
            raise ConfigError("sweep.values must be non-empty")
        if any(b <= a for a, b in zip(self.values, self.values[1:])):
            raise ConfigError("sweep.values must be strictly increasing")
        if self.trials_per_value < 1:
            raise ConfigError("sweep.trials_per_value must be >= 1")

    def config_for(self, value):
        """Base config with the swept factor overridden to `value`."""
        base = self.base
        if self.factor is Factor.NOISE_LEVEL:
            return replace(base, noise=replace(base.noise, sigma=value))
        if self.factor is Factor.SPRING_CONSTANT:
            return replace(base, params=replace(base.params, k=value))
        if self.factor is Factor.DAMPING_FACTOR:
            return replace(base, params=replace(base.params, b=value))
        if self.factor is Factor.DESIRED_HEIGHT:
            r_d = list(base.bhc.r_d)
            r_d[2] = value
            return replace(base, bhc=replace(base.bhc, r_d=tuple(r_d)))
        raise ConfigError(f"unknown sweep factor {self.factor}")
