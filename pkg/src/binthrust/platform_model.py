"""Rigid-body model of the free-floating thruster platform.

State vector layout (length 7, SI units, angles in radians):
    x[0:2] = [x, y]        world position          (m)
    x[2]   = theta         yaw in world frame      (rad, NOT wrapped)
    x[3:5] = [vx, vy]      world velocity          (m/s)
    x[5]   = theta_dot     yaw rate                (rad/s)
    x[6]   = omega_rw      reaction wheel speed    (rad/s)

Input vector layout (length 9):
    u[0]   = reaction wheel torque (N*m), continuous
    u[1:9] = thruster commands, [0,1] continuous or {0,1} binary

Thrusters are mounted in four force-opposed pairs (1,2), (3,4), (5,6),
(7,8); within a pair the force columns are exact negations and the
torque contributions alternate +F*r/I, -F*r/I.  Positive wheel torque
spins the wheel up and reacts negatively on the body.
"""

from __future__ import annotations

import configparser
import math
from dataclasses import dataclass

import numpy as np

N_STATES = 7
N_INPUTS = 9
N_THRUSTERS = 8

RPM_TO_RAD_S = 2.0 * math.pi / 60.0


@dataclass
class PlatformParams:
    """Physical constants of the platform (SI units)."""

    mass: float = 202.81              # kg
    radius: float = 0.35              # m, thruster mounting radius
    inertia: float = 12.22            # kg*m^2, body yaw inertia
    wheel_inertia: float = 0.047      # kg*m^2
    wheel_speed_limit: float = 250.0 * RPM_TO_RAD_S   # rad/s, symmetric
    thrust: float = 10.36             # N, nominal force of one thruster
    wheel_torque_limit: float = 1.44  # N*m, symmetric
    t_on_min: float = 0.1             # s, minimum firing time
    t_on_max: float = 0.3             # s, maximum firing time
    t_off_min: float = 0.2            # s, cool-down between firings

    def validate(self) -> None:
        for name in ("mass", "radius", "inertia", "wheel_inertia", "thrust"):
            if not getattr(self, name) > 0.0:
                raise ValueError(f"{name} must be strictly positive")
        for name in ("wheel_speed_limit", "wheel_torque_limit"):
            if not getattr(self, name) > 0.0:
                raise ValueError(f"{name} must be positive")
        if not (0.0 < self.t_on_min <= self.t_on_max):
            raise ValueError("need 0 < t_on_min <= t_on_max")
        if not self.t_off_min > 0.0:
            raise ValueError("t_off_min must be positive")

    # Config keys use the conventional symbol names; angles/rates are SI
    # (rad/s) except omega_RW_max_rpm which is accepted as a convenience.
    _CONFIG_KEYS = {
        "m": "mass",
        "r": "radius",
        "I_S": "inertia",
        "I_RW": "wheel_inertia",
        "omega_RW_max": "wheel_speed_limit",
        "F_n": "thrust",
        "tau_max": "wheel_torque_limit",
        "t_on_min": "t_on_min",
        "t_on_max": "t_on_max",
        "t_off_min": "t_off_min",
    }

    @classmethod
    def from_config(cls, path_or_parser) -> "PlatformParams":
        """Load parameters from the [platform] section of an INI file.

        Recognized keys: m, r, I_S, I_RW, omega_RW_max (rad/s) or
        omega_RW_max_rpm, F_n, tau_max, t_on_min, t_on_max, t_off_min.
        Missing keys keep their defaults.
        """
        if isinstance(path_or_parser, configparser.ConfigParser):
            cfg = path_or_parser
        else:
            cfg = configparser.ConfigParser()
            with open(path_or_parser) as fh:
                cfg.read_file(fh)
        params = cls()
        if cfg.has_section("platform"):
            section = cfg["platform"]
            for key, field in cls._CONFIG_KEYS.items():
                if key in section:
                    setattr(params, field, float(section[key]))
            if "omega_RW_max_rpm" in section:
                params.wheel_speed_limit = float(section["omega_RW_max_rpm"]) * RPM_TO_RAD_S
        params.validate()
        return params


@dataclass
class LinearizedDynamics:
    """Constant A and the input matrix B evaluated at a fixed yaw angle."""

    A: np.ndarray       # 7x7
    B: np.ndarray       # 7x9, depends on theta through sin/cos only
    dt: float           # discretization step used by step_euler
    theta: float        # linearization angle


def _input_matrix(params: PlatformParams, theta: float) -> np.ndarray:
    s = math.sin(theta)
    c = math.cos(theta)
    f = params.thrust / params.mass
    g = params.thrust * params.radius / params.inertia
    B = np.zeros((N_STATES, N_INPUTS))
    B[3, 1:9] = (-s * f, s * f, -c * f, c * f, s * f, -s * f, c * f, -c * f)
    B[4, 1:9] = (c * f, -c * f, -s * f, s * f, -c * f, c * f, s * f, -s * f)
    B[5, 0] = -1.0 / params.inertia
    B[5, 1:9] = (g, -g, g, -g, g, -g, g, -g)
    B[6, 0] = 1.0 / params.wheel_inertia
    return B


def system_matrices(params: PlatformParams, theta: float, dt: float = 0.1) -> LinearizedDynamics:
    """Continuous-time system matrices at yaw angle theta.

    A couples pose rates to velocities and is otherwise zero; B carries
    the thruster force/torque pattern and the wheel torque channel.
    """
    A = np.zeros((N_STATES, N_STATES))
    A[0, 3] = A[1, 4] = A[2, 5] = 1.0
    return LinearizedDynamics(A=A, B=_input_matrix(params, theta), dt=dt, theta=theta)


def step_euler(dyn: LinearizedDynamics, x: np.ndarray, u: np.ndarray) -> np.ndarray:
    """One forward-Euler step with B frozen at the linearization angle."""
    if not dyn.dt > 0.0:
        raise ValueError("dt must be positive")
    return x + dyn.dt * (dyn.A @ x + dyn.B @ u)


def _deriv(params: PlatformParams, x, u):
    """Nonlinear state derivative; B re-evaluated at the instantaneous yaw."""
    s = math.sin(x[2])
    c = math.cos(x[2])
    f = params.thrust / params.mass
    u1, u2, u3, u4, u5, u6, u7, u8 = u[1:9]
    ax = f * (s * (-u1 + u2 + u5 - u6) + c * (-u3 + u4 + u7 - u8))
    ay = f * (c * (u1 - u2 - u5 + u6) + s * (-u3 + u4 + u7 - u8))
    spin = (u1 - u2 + u3 - u4 + u5 - u6 + u7 - u8)
    alpha = (-u[0] + params.thrust * params.radius * spin) / params.inertia
    return np.array([x[3], x[4], x[5], ax, ay, alpha, u[0] / params.wheel_inertia])


def step_plant(params: PlatformParams, x: np.ndarray, u: np.ndarray, dt_plant: float) -> np.ndarray:
    """Ground-truth integrator: one classical RK4 step of the nonlinear plant.

    The input is held constant over the step; sin/cos of the yaw angle are
    re-evaluated at every stage.  Intended for dt_plant <= 10 ms.
    """
    if not 0.0 < dt_plant <= 0.010 + 1e-12:
        raise ValueError("dt_plant must be in (0, 10 ms]")
    k1 = _deriv(params, x, u)
    k2 = _deriv(params, x + 0.5 * dt_plant * k1, u)
    k3 = _deriv(params, x + 0.5 * dt_plant * k2, u)
    k4 = _deriv(params, x + dt_plant * k3, u)
    return x + (dt_plant / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def wrap_angle(angle):
    """Wrap an angle difference into (-pi, pi]; used only in error metrics."""
    wrapped = math.remainder(angle, 2.0 * math.pi)
    if wrapped <= -math.pi:
        wrapped += 2.0 * math.pi
    return wrapped


def spin_momentum(params: PlatformParams, x: np.ndarray) -> float:
    """Total angular momentum of body plus wheel about the body axis."""
    return params.inertia * x[5] + params.wheel_inertia * x[6]
