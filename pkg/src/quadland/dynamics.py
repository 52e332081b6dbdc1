"""Rigid-body model of a nano quadrotor driven by its onboard controller.

The vehicle is commanded with (pwm, roll_cmd, pitch_cmd, yaw_rate_cmd).
Translational motion follows Newton-Euler with thrust rotated into the
inertial frame; the commanded PWM maps to total thrust through a
first-order filter state; roll and pitch track their commands through
identified first-order closed loops; yaw rate passes through directly.

Everything here is a pure function over value types.  The hot path
(`state_derivative` / `rk4_step`) runs through numba-compiled kernels so
a single integration step costs microseconds.

State vector layout (float64, length 10):
    [x, y, z, vx, vy, vz, roll, pitch, yaw, thrust_filter]
positions in m (inertial, z up), velocities in m/s, angles in rad.
"""

import math
from dataclasses import dataclass
from typing import NamedTuple, Optional, Tuple

import numpy as np
from numba import njit

from .errors import IntegrationError

# state vector indices
PX, PY, PZ, VX, VY, VZ, ROLL, PITCH, YAW, THRUST_FILTER = range(10)
STATE_DIM = 10

# command bounds accepted by the onboard controller
PWM_MIN = 10000.0
PWM_MAX = 60000.0
ANGLE_CMD_MAX = math.radians(30.0)
YAW_RATE_CMD_MAX = math.radians(200.0)

# action scaling: pwm = HOVER_PWM + PWM_SCALE * raw, angles = ANGLE_CMD_MAX * raw
HOVER_PWM = 42000.0
PWM_SCALE = 16500.0

# control sampling period (50 Hz zero-order hold)
CONTROL_DT = 0.02

# thrust filter: d(filter)/dt = -THRUST_POLE * filter + pwm,
# thrust = THRUST_GAIN_FILTER * filter + THRUST_GAIN_DIRECT * pwm
THRUST_POLE = 15.467
THRUST_GAIN_FILTER = 1.425e-4
THRUST_GAIN_DIRECT = 2.894e-7

# steady-state thrust per PWM count, N
THRUST_PER_PWM = THRUST_GAIN_FILTER / THRUST_POLE + THRUST_GAIN_DIRECT

GRAVITY = 9.81

# mass chosen so the steady-state hover command is exactly HOVER_PWM
DEFAULT_MASS = HOVER_PWM * THRUST_PER_PWM / GRAVITY

# identified attitude-loop constants (shared by roll and pitch)
ATTITUDE_GAIN = 1.1094
ATTITUDE_TAU = 0.1838


class ControlInput(NamedTuple):
    """Command vector for the onboard controller, within the bounds above."""

    pwm: float
    roll_cmd: float
    pitch_cmd: float
    yaw_rate_cmd: float


@dataclass(frozen=True)
class ModelParams:
    """Physical constants of the simulated vehicle.

    ``drag_coeffs`` is the diagonal of the body-frame drag matrix (negative
    entries oppose motion); drag also needs ``rotor_curve``, the (a, b, c)
    coefficients of the per-rotor thrust curve f(w) = a*w^2 + b*w + c used
    to reconstruct the summed rotor speed from total thrust.  With
    ``rotor_curve=None`` the summed rotor speed falls back to the total
    thrust itself.  Drag ships disabled: the drag constants are not public
    and must be supplied by the user.
    """

    mass: float = DEFAULT_MASS
    gravity: float = GRAVITY
    attitude_gain: float = ATTITUDE_GAIN
    attitude_tau: float = ATTITUDE_TAU
    thrust_pole: float = THRUST_POLE
    thrust_gain_filter: float = THRUST_GAIN_FILTER
    thrust_gain_direct: float = THRUST_GAIN_DIRECT
    drag_enabled: bool = False
    drag_coeffs: Tuple[float, float, float] = (0.0, 0.0, 0.0)
    rotor_curve: Optional[Tuple[float, float, float]] = None

    def __post_init__(self):
        if self.mass < 0:
            raise ValueError("mass must be >= 0")
        if self.attitude_tau <= 0:
            raise ValueError("attitude_tau must be > 0")
        if self.thrust_pole <= 0:
            raise ValueError("thrust_pole must be > 0")

    def packed(self) -> np.ndarray:
        """Flat float64 view consumed by the numba kernels."""
        rc = self.rotor_curve
        return np.array(
            [
                self.mass,
                self.gravity,
                self.attitude_gain,
                self.attitude_tau,
                self.thrust_pole,
                self.thrust_gain_filter,
                self.thrust_gain_direct,
                1.0 if self.drag_enabled else 0.0,
                self.drag_coeffs[0],
                self.drag_coeffs[1],
                self.drag_coeffs[2],
                rc[0] if rc is not None else 0.0,
                rc[1] if rc is not None else 0.0,
                rc[2] if rc is not None else 0.0,
                1.0 if rc is not None else 0.0,
            ]
        )


def rotation_matrix(roll: float, pitch: float, yaw: float) -> np.ndarray:
    """Body-to-inertial rotation for the yaw(z) * roll(x) * pitch(y) composition.

    Positive pitch tilts the thrust axis toward +x (nose-down forward
    flight); positive roll tilts it toward +y.
    """
    cph, sph = math.cos(roll), math.sin(roll)
    cth, sth = math.cos(pitch), math.sin(pitch)
    cps, sps = math.cos(yaw), math.sin(yaw)
    return np.array(
        [
            [cps * cth - sph * sps * sth, -cph * sps, cps * sth + cth * sph * sps],
            [cth * sps + cps * sph * sth, cph * cps, sps * sth - cps * cth * sph],
            [-cph * sth, sph, cph * cth],
        ]
    )


def thrust_dynamics(thrust_filter: float, pwm: float,
                    params: ModelParams) -> Tuple[float, float]:
    """Filter-state derivative and total thrust for the commanded PWM."""
    d_filter = -params.thrust_pole * thrust_filter + pwm
    thrust = params.thrust_gain_filter * thrust_filter + params.thrust_gain_direct * pwm
    return d_filter, thrust


def rotor_speed_sum(total_thrust: float, params: ModelParams) -> float:
    """Summed rotor speed reconstructed from total thrust.

    Inverts the per-rotor curve at thrust/4 (positive root) and sums over
    four rotors; identity fallback when no curve is configured.
    """
    if params.rotor_curve is None:
        return total_thrust
    a, b, c = params.rotor_curve
    per_rotor = 0.25 * total_thrust
    if a != 0.0:
        disc = b * b - 4.0 * a * (c - per_rotor)
        if disc <= 0.0:
            return 0.0
        return 4.0 * (-b + math.sqrt(disc)) / (2.0 * a)
    return 4.0 * (per_rotor - c) / b


def drag_force(velocity_body: np.ndarray, total_thrust: float,
               params: ModelParams) -> np.ndarray:
    """Body-frame aerodynamic drag, proportional to summed rotor speed."""
    if not params.drag_enabled:
        return np.zeros(3)
    w_sum = rotor_speed_sum(total_thrust, params)
    return np.asarray(params.drag_coeffs) * w_sum * np.asarray(velocity_body)


def attitude_rate(attitude: np.ndarray, cmd: ControlInput,
                  params: ModelParams) -> np.ndarray:
    """First-order closed-loop attitude response; yaw rate passes through."""
    roll, pitch, _ = attitude
    return np.array(
        [
            (params.attitude_gain * cmd.roll_cmd - roll) / params.attitude_tau,
            (params.attitude_gain * cmd.pitch_cmd - pitch) / params.attitude_tau,
            cmd.yaw_rate_cmd,
        ]
    )


@njit(cache=True)
def _derivative_kernel(out, s, pwm, roll_cmd, pitch_cmd, yaw_rate_cmd, pv):
    mass = pv[0]
    g = pv[1]
    gain = pv[2]
    tau = pv[3]
    pole = pv[4]
    gf = pv[5]
    gd = pv[6]

    roll = s[6]
    pitch = s[7]
    yaw = s[8]
    cph = math.cos(roll)
    sph = math.sin(roll)
    cth = math.cos(pitch)
    sth = math.sin(pitch)
    cps = math.cos(yaw)
    sps = math.sin(yaw)

    r11 = cps * cth - sph * sps * sth
    r12 = -cph * sps
    r13 = cps * sth + cth * sph * sps
    r21 = cth * sps + cps * sph * sth
    r22 = cph * cps
    r23 = sps * sth - cps * cth * sph
    r31 = -cph * sth
    r32 = sph
    r33 = cph * cth

    thrust = gf * s[9] + gd * pwm
    fx = 0.0
    fy = 0.0
    fz = thrust
    if pv[7] != 0.0:
        vbx = r11 * s[3] + r21 * s[4] + r31 * s[5]
        vby = r12 * s[3] + r22 * s[4] + r32 * s[5]
        vbz = r13 * s[3] + r23 * s[4] + r33 * s[5]
        if pv[14] != 0.0:
            a = pv[11]
            b = pv[12]
            c = pv[13]
            per_rotor = 0.25 * thrust
            if a != 0.0:
                disc = b * b - 4.0 * a * (c - per_rotor)
                w_sum = 4.0 * (-b + math.sqrt(disc)) / (2.0 * a) if disc > 0.0 else 0.0
            else:
                w_sum = 4.0 * (per_rotor - c) / b
        else:
            w_sum = thrust
        fx = pv[8] * w_sum * vbx
        fy = pv[9] * w_sum * vby
        fz = thrust + pv[10] * w_sum * vbz

    if mass > 0.0:
        out[3] = (r11 * fx + r12 * fy + r13 * fz) / mass
        out[4] = (r21 * fx + r22 * fy + r23 * fz) / mass
        out[5] = (r31 * fx + r32 * fy + r33 * fz) / mass - g
    else:
        out[3] = 0.0
        out[4] = 0.0
        out[5] = -g
    out[0] = s[3]
    out[1] = s[4]
    out[2] = s[5]
    out[6] = (gain * roll_cmd - roll) / tau
    out[7] = (gain * pitch_cmd - pitch) / tau
    out[8] = yaw_rate_cmd
    out[9] = -pole * s[9] + pwm


@njit(cache=True)
def _rk4_kernel(s, pwm, roll_cmd, pitch_cmd, yaw_rate_cmd, pv, dt):
    k1 = np.empty(10)
    k2 = np.empty(10)
    k3 = np.empty(10)
    k4 = np.empty(10)
    tmp = np.empty(10)
    out = np.empty(10)
    _derivative_kernel(k1, s, pwm, roll_cmd, pitch_cmd, yaw_rate_cmd, pv)
    for i in range(10):
        tmp[i] = s[i] + 0.5 * dt * k1[i]
    _derivative_kernel(k2, tmp, pwm, roll_cmd, pitch_cmd, yaw_rate_cmd, pv)
    for i in range(10):
        tmp[i] = s[i] + 0.5 * dt * k2[i]
    _derivative_kernel(k3, tmp, pwm, roll_cmd, pitch_cmd, yaw_rate_cmd, pv)
    for i in range(10):
        tmp[i] = s[i] + dt * k3[i]
    _derivative_kernel(k4, tmp, pwm, roll_cmd, pitch_cmd, yaw_rate_cmd, pv)
    for i in range(10):
        out[i] = s[i] + (dt / 6.0) * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i])
    return out


def state_derivative(state: np.ndarray, cmd: ControlInput,
                     params: ModelParams) -> np.ndarray:
    """Time derivative of the full state under a held command."""
    out = np.empty(STATE_DIM)
    _derivative_kernel(out, np.asarray(state, dtype=np.float64), cmd.pwm,
                       cmd.roll_cmd, cmd.pitch_cmd, cmd.yaw_rate_cmd,
                       params.packed())
    return out


def rk4_step(state: np.ndarray, cmd: ControlInput, params: ModelParams,
             dt: float = CONTROL_DT) -> np.ndarray:
    """One classic Runge-Kutta step with the command held over the interval."""
    state = np.asarray(state, dtype=np.float64)
    if not np.all(np.isfinite(state)):
        raise IntegrationError("non-finite state handed to rk4_step")
    return _rk4_kernel(state, cmd.pwm, cmd.roll_cmd, cmd.pitch_cmd,
                       cmd.yaw_rate_cmd, params.packed(), dt)


def denormalize_action(raw, mode: str) -> ControlInput:
    """Map a policy output in [-1, 1]^n to a bounded control command.

    ``mode='2d'`` takes (pwm, pitch) and leaves roll at zero; ``mode='3d'``
    takes (pwm, roll, pitch).  Yaw rate is always zero.
    """
    if mode == "2d":
        pwm = HOVER_PWM + PWM_SCALE * raw[0]
        roll_cmd = 0.0
        pitch_cmd = ANGLE_CMD_MAX * raw[1]
    elif mode == "3d":
        pwm = HOVER_PWM + PWM_SCALE * raw[0]
        roll_cmd = ANGLE_CMD_MAX * raw[1]
        pitch_cmd = ANGLE_CMD_MAX * raw[2]
    else:
        raise ValueError(f"unknown action mode {mode!r}")
    pwm = min(max(pwm, PWM_MIN), PWM_MAX)
    return ControlInput(pwm, roll_cmd, pitch_cmd, 0.0)


def hover_pwm(params: ModelParams) -> float:
    """PWM whose steady-state thrust balances the weight (not clipped)."""
    gain = params.thrust_gain_filter / params.thrust_pole + params.thrust_gain_direct
    return params.mass * params.gravity / gain


def hover_state(x: float, y: float, z: float, params: ModelParams) -> np.ndarray:
    """Resting state at a position with the thrust filter settled at hover."""
    state = np.zeros(STATE_DIM)
    state[PX] = x
    state[PY] = y
    state[PZ] = z
    state[THRUST_FILTER] = hover_pwm(params) / params.thrust_pole
    return state
