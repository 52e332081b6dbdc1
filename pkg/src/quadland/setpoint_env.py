"""Full 3D set-point tracking with a dense shaped reward.

The vehicle spawns anywhere in the arena (minus a wall margin) and is
rewarded for closing the distance to a fixed hover point while keeping
velocity, attitude, and attitude-channel control effort small.  Episodes
always run their full length; there is no goal termination.
"""

import math
from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np

from . import dynamics as dyn
from .arena import Arena
from .dynamics import ModelParams, denormalize_action, hover_state, rk4_step
from .errors import IntegrationError

# floor on the position error in the action-penalty denominator
ACTION_PENALTY_FLOOR = 0.001


def shaped_reward(s: np.ndarray, goal: np.ndarray, raw_action: np.ndarray) -> float:
    """Distance-shaped reward with an attitude-effort penalty.

    ``s`` and ``goal`` are 8-vectors (x, y, z, vx, vy, vz, roll, pitch);
    ``raw_action`` is the normalized (pwm, roll, pitch) command.  The
    effort term divides by the position error so that hovering on the
    goal with aggressive attitude commands is discouraged hardest.
    """
    dx, dy, dz = s[0] - goal[0], s[1] - goal[1], s[2] - goal[2]
    dvx, dvy, dvz = s[3] - goal[3], s[4] - goal[4], s[5] - goal[5]
    dr, dp = s[6] - goal[6], s[7] - goal[7]
    e_pos = math.sqrt(dx * dx + dy * dy + dz * dz)
    e_vel = math.sqrt(dvx * dvx + dvy * dvy + dvz * dvz)
    e_att = math.sqrt(dr * dr + dp * dp)
    effort = raw_action[1] * raw_action[1] + raw_action[2] * raw_action[2]
    return (-e_pos - 0.2 * e_vel - 0.1 * e_att
            - 0.1 * effort / max(e_pos, ACTION_PENALTY_FLOOR))


@dataclass(frozen=True)
class SetpointConfig:
    goal_x: float = 0.0
    goal_y: float = 0.0
    goal_z: float = 1.2
    episode_steps: int = 300
    reset_margin: float = 0.2
    # an episode counts as a success when the position error stays under
    # hold_radius for the final hold_steps control steps (2 s at 50 Hz)
    hold_radius: float = 0.15
    hold_steps: int = 100

    def __post_init__(self):
        if self.episode_steps <= 0:
            raise ValueError("episode_steps must be positive")
        if self.hold_steps > self.episode_steps:
            raise ValueError("hold_steps cannot exceed episode_steps")


class SetpointEnv:
    """Episodic environment; observed position is relative to the goal.

    The 8-vector observation is (x, y, z) - goal followed by velocity and
    (roll, pitch); actions are (pwm, roll, pitch) in [-1, 1] each.
    """

    observation_dim = 8
    action_dim = 3
    task_name = "setpoint3d"

    def __init__(self, config: SetpointConfig = SetpointConfig(),
                 params: ModelParams = ModelParams(),
                 arena: Arena = Arena(),
                 seed: Optional[int] = None):
        self.config = config
        self.params = params
        self.arena = arena
        self._rng = np.random.default_rng(seed)
        self.goal = np.array([config.goal_x, config.goal_y, config.goal_z,
                              0.0, 0.0, 0.0, 0.0, 0.0])
        self._goal_offset = np.zeros(8)
        self._goal_offset[:3] = self.goal[:3]
        self._state = hover_state(0.0, 0.0, config.goal_z, params)
        self._step_count = 0
        self._hold_count = 0
        self._done = True

    def reset(self, position: Optional[Tuple[float, float, float]] = None) -> np.ndarray:
        if position is None:
            m, a = self.config.reset_margin, self.arena
            x = self._rng.uniform(a.x_min + m, a.x_max - m)
            y = self._rng.uniform(a.y_min + m, a.y_max - m)
            z = self._rng.uniform(a.z_min + m, a.z_max - m)
        else:
            x, y, z = position
        self._state = hover_state(x, y, z, self.params)
        self._step_count = 0
        self._hold_count = 0
        self._done = False
        return self._observe()

    def _observe(self) -> np.ndarray:
        s = self._state
        absolute = np.array([s[dyn.PX], s[dyn.PY], s[dyn.PZ], s[dyn.VX],
                             s[dyn.VY], s[dyn.VZ], s[dyn.ROLL], s[dyn.PITCH]])
        return absolute - self._goal_offset

    def _absolute_obs(self) -> np.ndarray:
        s = self._state
        return np.array([s[dyn.PX], s[dyn.PY], s[dyn.PZ], s[dyn.VX],
                         s[dyn.VY], s[dyn.VZ], s[dyn.ROLL], s[dyn.PITCH]])

    def _clamp_to_arena(self):
        s, a = self._state, self.arena
        for pos, vel, lo, hi in ((dyn.PX, dyn.VX, a.x_min, a.x_max),
                                 (dyn.PY, dyn.VY, a.y_min, a.y_max),
                                 (dyn.PZ, dyn.VZ, a.z_min, a.z_max)):
            if s[pos] < lo:
                s[pos], s[vel] = lo, 0.0
            elif s[pos] > hi:
                s[pos], s[vel] = hi, 0.0

    def step(self, raw_action: np.ndarray):
        if self._done:
            raise RuntimeError("episode is over; call reset() first")
        raw = np.clip(raw_action, -1.0, 1.0)
        cmd = denormalize_action(raw, "3d")
        try:
            nxt = rk4_step(self._state, cmd, self.params)
        except IntegrationError:
            nxt = None
        info = {"failure": False, "pwm_cmd": cmd.pwm,
                "roll_cmd": cmd.roll_cmd, "pitch_cmd": cmd.pitch_cmd}
        if nxt is None or not np.all(np.isfinite(nxt)):
            self._done = True
            info["failure"] = True
            info["success"] = False
            return self._observe(), shaped_reward(self._absolute_obs(),
                                                  self.goal, raw), True, info
        self._state = nxt
        self._clamp_to_arena()
        self._step_count += 1
        absolute = self._absolute_obs()
        dx, dy, dz = absolute[:3] - self.goal[:3]
        if math.sqrt(dx * dx + dy * dy + dz * dz) < self.config.hold_radius:
            self._hold_count += 1
        else:
            self._hold_count = 0
        reward = shaped_reward(absolute, self.goal, raw)
        self._done = self._step_count >= self.config.episode_steps
        if self._done:
            info["success"] = self._hold_count >= self.config.hold_steps
        return self._observe(), reward, self._done, info

    @property
    def state(self) -> np.ndarray:
        """Full internal vehicle state (read-only copy)."""
        return self._state.copy()

    @property
    def steps_taken(self) -> int:
        return self._step_count
