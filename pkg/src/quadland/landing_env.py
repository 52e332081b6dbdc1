"""Planar inclined-landing task in the xz slice of the arena.

The vehicle starts near an elevated goal pose and must end an episode
inside a shrinking tolerance box around it: position on the platform
surface, low velocity, pitch matched to the platform inclination.  The
reward is sparse with four levels: goal 0, platform interior -7, near a
wall -2, free space -1.  Platform presence, goal tilt, tolerance size,
and the start-state spread all come from the training schedule.

Motion stays in the xz-plane: the roll command is pinned to zero and no
force component ever acts along y.
"""

import math
from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np

from . import dynamics as dyn
from .arena import Arena
from .curriculum import (
    EVAL_GOAL_TOLERANCE,
    GOAL_PITCH_FINAL,
    CurriculumState,
    goal_tolerance,
)
from .dynamics import ModelParams, denormalize_action, hover_state, rk4_step
from .errors import ConfigError, IntegrationError

GOAL_REWARD = 0.0
OBSTACLE_REWARD = -7.0
BOUNDARY_REWARD = -2.0
FREE_REWARD = -1.0

BOUNDARY_MARGIN = 0.05

# absolute distance below which a point counts as on a polygon edge, and
# therefore outside: touching the surface is not a collision
EDGE_SKIN = 1e-9


@dataclass(frozen=True)
class GoalBox:
    """Axis-aligned tolerance region around a landing state.

    Both arrays run over (x, z, vx, vz, pitch).
    """

    center: np.ndarray
    tolerance: np.ndarray


@dataclass(frozen=True)
class Platform:
    """Landing platform polygon in the xz-plane."""

    vertices: np.ndarray
    active: bool


def make_platform(goal_x: float, goal_z: float, tilt: float, active: bool,
                  top_length: float = 0.6, base_depth: float = 0.5) -> Platform:
    """Trapezoid with its inclined top edge through the goal position.

    The top edge runs along the body-x axis of a vehicle pitched at
    ``tilt``, so a flush touchdown has matching pitch; vertical sides
    drop to a flat base ``base_depth`` below the goal.
    """
    ux, uz = math.cos(tilt), -math.sin(tilt)
    half = 0.5 * top_length
    base_z = goal_z - base_depth
    vertices = np.array(
        [
            [goal_x - half * ux, goal_z - half * uz],
            [goal_x + half * ux, goal_z + half * uz],
            [goal_x + half * ux, base_z],
            [goal_x - half * ux, base_z],
        ]
    )
    return Platform(vertices=vertices, active=active)


def _near_segment(x: float, z: float, ax: float, az: float, bx: float,
                  bz: float, skin: float) -> bool:
    dx, dz = bx - ax, bz - az
    length_sq = dx * dx + dz * dz
    if length_sq == 0.0:
        px, pz = x - ax, z - az
        return px * px + pz * pz <= skin * skin
    t = ((x - ax) * dx + (z - az) * dz) / length_sq
    t = min(1.0, max(0.0, t))
    px, pz = x - (ax + t * dx), z - (az + t * dz)
    return px * px + pz * pz <= skin * skin


def point_in_polygon(x: float, z: float, vertices: np.ndarray) -> bool:
    """Even-odd membership test; points on an edge count as outside."""
    n = len(vertices)
    if n < 3:
        raise ConfigError("polygon needs at least 3 vertices")
    for i in range(n):
        ax, az = vertices[i]
        bx, bz = vertices[(i + 1) % n]
        if _near_segment(x, z, ax, az, bx, bz, EDGE_SKIN):
            return False
    inside = False
    j = n - 1
    for i in range(n):
        zi, zj = vertices[i][1], vertices[j][1]
        if (zi > z) != (zj > z):
            x_cross = vertices[i][0] + (z - zi) / (zj - zi) * (vertices[j][0] - vertices[i][0])
            if x < x_cross:
                inside = not inside
        j = i
    return inside


def in_goal_box(s: np.ndarray, goal: GoalBox) -> bool:
    """Strict component-wise membership |s_i - center_i| < tolerance_i."""
    return bool(np.all(np.abs(s - goal.center) < goal.tolerance))


def platform_collision(s: np.ndarray, platform: Platform) -> bool:
    """Whether the vehicle position point penetrates the platform."""
    return platform.active and point_in_polygon(s[0], s[1], platform.vertices)


def sparse_reward(s: np.ndarray, goal: GoalBox, platform: Platform,
                  arena: Arena, boundary_margin: float = BOUNDARY_MARGIN) -> float:
    """Four-level reward; precedence goal, then obstacle, then boundary."""
    if in_goal_box(s, goal):
        return GOAL_REWARD
    if platform.active and point_in_polygon(s[0], s[1], platform.vertices):
        return OBSTACLE_REWARD
    if arena.near_xz_wall(s[0], s[1], boundary_margin):
        return BOUNDARY_REWARD
    return FREE_REWARD


@dataclass(frozen=True)
class LandingConfig:
    goal_x: float = 0.0
    goal_z: float = 1.25
    episode_steps: int = 300
    boundary_margin: float = BOUNDARY_MARGIN
    platform_top_length: float = 0.6
    platform_base_depth: float = 0.5

    def __post_init__(self):
        if self.episode_steps <= 0:
            raise ValueError("episode_steps must be positive")


class InclinedLandingEnv:
    """Episodic environment; observations are positions relative to the goal.

    The 5-vector observation is (x - goal_x, z - goal_z, vx, vz, pitch);
    actions are (pwm, pitch) in [-1, 1] each.
    """

    observation_dim = 5
    action_dim = 2
    task_name = "landing2d"

    def __init__(self, config: LandingConfig = LandingConfig(),
                 params: ModelParams = ModelParams(),
                 arena: Arena = Arena(),
                 seed: Optional[int] = None):
        self.config = config
        self.params = params
        self.arena = arena
        self._rng = np.random.default_rng(seed)
        self._goal_offset = np.array([config.goal_x, config.goal_z, 0.0, 0.0, 0.0])
        self.goal = GoalBox(
            center=np.array([config.goal_x, config.goal_z, 0.0, 0.0, 0.0]),
            tolerance=goal_tolerance(0.25),
        )
        self.platform = make_platform(config.goal_x, config.goal_z, 0.0, False,
                                      config.platform_top_length,
                                      config.platform_base_depth)
        self.init_halfwidths = (0.1, 0.1)
        self._state = hover_state(config.goal_x, 0.0, config.goal_z, params)
        self._step_count = 0
        self._done = True

    def configure_goal(self, tilt: float, tolerance: np.ndarray,
                       platform_active: bool,
                       init_halfwidths: Optional[Tuple[float, float]] = None):
        """Point the episode logic at a new goal pose and tolerance."""
        cfg = self.config
        self.goal = GoalBox(
            center=np.array([cfg.goal_x, cfg.goal_z, 0.0, 0.0, tilt]),
            tolerance=np.asarray(tolerance, dtype=np.float64),
        )
        self.platform = make_platform(cfg.goal_x, cfg.goal_z, tilt,
                                      platform_active, cfg.platform_top_length,
                                      cfg.platform_base_depth)
        if init_halfwidths is not None:
            self.init_halfwidths = tuple(init_halfwidths)

    def apply_curriculum(self, schedule: CurriculumState):
        self.configure_goal(schedule.goal_tilt, goal_tolerance(schedule.d),
                            schedule.platform_active,
                            schedule.init_box_halfwidths)

    def configure_eval(self, tilt: Optional[float] = None):
        """Final-task goal: full tilt, platform on, fixed eval tolerances."""
        tilt = GOAL_PITCH_FINAL if tilt is None else tilt
        self.configure_goal(tilt, EVAL_GOAL_TOLERANCE, True)

    def _sample_position(self) -> Tuple[float, float]:
        cfg, arena = self.config, self.arena
        hx, hz = self.init_halfwidths
        x_lo = max(arena.x_min, cfg.goal_x - hx)
        x_hi = min(arena.x_max, cfg.goal_x + hx)
        z_lo = max(arena.z_min, cfg.goal_z - hz)
        z_hi = min(arena.z_max, cfg.goal_z + hz)
        for _ in range(1000):
            x = self._rng.uniform(x_lo, x_hi)
            z = self._rng.uniform(z_lo, z_hi)
            if not (self.platform.active
                    and point_in_polygon(x, z, self.platform.vertices)):
                return x, z
        raise RuntimeError("could not sample a start outside the platform")

    def reset(self, position: Optional[Tuple[float, float]] = None) -> np.ndarray:
        if position is None:
            x, z = self._sample_position()
        else:
            x, z = position
        self._state = hover_state(x, 0.0, z, self.params)
        self._step_count = 0
        self._done = False
        return self._observe()

    def _observe(self) -> np.ndarray:
        s = self._state
        absolute = np.array([s[dyn.PX], s[dyn.PZ], s[dyn.VX], s[dyn.VZ],
                             s[dyn.PITCH]])
        return absolute - self._goal_offset

    def _absolute_obs(self) -> np.ndarray:
        s = self._state
        return np.array([s[dyn.PX], s[dyn.PZ], s[dyn.VX], s[dyn.VZ],
                         s[dyn.PITCH]])

    def _clamp_to_arena(self):
        s, arena = self._state, self.arena
        if s[dyn.PX] < arena.x_min:
            s[dyn.PX], s[dyn.VX] = arena.x_min, 0.0
        elif s[dyn.PX] > arena.x_max:
            s[dyn.PX], s[dyn.VX] = arena.x_max, 0.0
        if s[dyn.PZ] < arena.z_min:
            s[dyn.PZ], s[dyn.VZ] = arena.z_min, 0.0
        elif s[dyn.PZ] > arena.z_max:
            s[dyn.PZ], s[dyn.VZ] = arena.z_max, 0.0

    def step(self, raw_action: np.ndarray):
        if self._done:
            raise RuntimeError("episode is over; call reset() first")
        raw = np.clip(raw_action, -1.0, 1.0)
        cmd = denormalize_action(raw, "2d")
        try:
            nxt = rk4_step(self._state, cmd, self.params)
        except IntegrationError:
            nxt = None
        if nxt is None or not np.all(np.isfinite(nxt)):
            self._done = True
            info = {"goal": False, "success": False, "failure": True,
                    "pwm_cmd": cmd.pwm, "pitch_cmd": cmd.pitch_cmd}
            return self._observe(), FREE_REWARD, True, info
        self._state = nxt
        self._clamp_to_arena()
        self._step_count += 1
        absolute = self._absolute_obs()
        reward = sparse_reward(absolute, self.goal, self.platform, self.arena,
                               self.config.boundary_margin)
        reached = in_goal_box(absolute, self.goal)
        self._done = reached or self._step_count >= self.config.episode_steps
        info = {"goal": reached, "success": reached, "failure": False,
                "pwm_cmd": cmd.pwm, "pitch_cmd": cmd.pitch_cmd}
        return self._observe(), reward, self._done, info

    @property
    def state(self) -> np.ndarray:
        """Full internal vehicle state (read-only copy)."""
        return self._state.copy()

    @property
    def steps_taken(self) -> int:
        return self._step_count
