"""Training schedules that reshape the landing task as learning progresses.

Four quantities evolve: the goal-tolerance scalar shrinks per episode, the
start-state box grows per episode, the platform tilt ramps in per episode
once enough total steps have elapsed, and the platform obstacle itself
appears after a step threshold.  The discount factor ramps separately on
the trainer's iteration counter.

Every schedule value is a pure closed-form function of the episode and
step counters, so replaying the same counter sequence reproduces the same
schedule bit for bit.
"""

import math
from dataclasses import dataclass, replace
from typing import Tuple

import numpy as np

GOAL_PITCH_FINAL = -math.pi / 7.0

# success thresholds used for deterministic evaluation, fixed regardless of
# where the training schedule stopped: (x, z, vx, vz, pitch)
EVAL_GOAL_TOLERANCE = np.array([0.10, 0.10, 1.5, 1.5, 0.025])


@dataclass(frozen=True)
class CurriculumConfig:
    """Schedule endpoints and durations.

    Rates implied: tolerance shrinks by (start-final)/episodes = 0.15/5000
    per episode, tilt by |final|/episodes = (pi/7)/6000 per episode, the
    start box grows by (1/6000, 1/8000) m per episode.  Durations are
    stored instead of rates so the endpoints land exactly.
    """

    d_start: float = 0.25
    d_final: float = 0.10
    d_episodes: int = 5000
    tilt_final: float = GOAL_PITCH_FINAL
    tilt_episodes: int = 6000
    tilt_start_timesteps: int = 400_000
    platform_timesteps: int = 800_000
    init_halfwidths: Tuple[float, float] = (0.1, 0.1)
    init_growth: Tuple[float, float] = (1.0 / 6000.0, 1.0 / 8000.0)
    init_max: Tuple[float, float] = (3.4, 1.2)
    gamma_start: float = 0.97
    gamma_final: float = 0.99
    gamma_ramp_start: int = 300
    gamma_ramp_length: int = 200

    def __post_init__(self):
        if self.d_episodes <= 0 or self.tilt_episodes <= 0:
            raise ValueError("schedule durations must be positive")
        if self.gamma_ramp_length <= 0:
            raise ValueError("gamma_ramp_length must be positive")


DEFAULT_CURRICULUM = CurriculumConfig()


@dataclass(frozen=True)
class CurriculumState:
    """Snapshot of every schedule value plus the counters that drive them."""

    episode_index: int
    timestep_total: int
    tilt_episode_count: int
    d: float
    goal_tilt: float
    init_box_halfwidths: Tuple[float, float]
    platform_active: bool
    gamma: float


def _tolerance_at(episode: int, config: CurriculumConfig) -> float:
    frac = min(1.0, episode / config.d_episodes)
    return config.d_start + (config.d_final - config.d_start) * frac


def _tilt_at(tilt_episodes: int, config: CurriculumConfig) -> float:
    return config.tilt_final * min(1.0, tilt_episodes / config.tilt_episodes)


def _box_at(episode: int, config: CurriculumConfig) -> Tuple[float, float]:
    gx, gz = config.init_growth
    hx, hz = config.init_halfwidths
    mx, mz = config.init_max
    return (min(mx, hx + episode * gx), min(mz, hz + episode * gz))


def initial_state(config: CurriculumConfig = DEFAULT_CURRICULUM) -> CurriculumState:
    return CurriculumState(
        episode_index=0,
        timestep_total=0,
        tilt_episode_count=0,
        d=config.d_start,
        goal_tilt=0.0,
        init_box_halfwidths=config.init_halfwidths,
        platform_active=False,
        gamma=config.gamma_start,
    )


def advance_episode(state: CurriculumState, steps_in_episode: int,
                    config: CurriculumConfig = DEFAULT_CURRICULUM) -> CurriculumState:
    """Fold one finished episode of the given length into the schedule."""
    episode = state.episode_index + 1
    total = state.timestep_total + steps_in_episode
    tilt_episodes = state.tilt_episode_count
    if total > config.tilt_start_timesteps:
        tilt_episodes += 1
    return CurriculumState(
        episode_index=episode,
        timestep_total=total,
        tilt_episode_count=tilt_episodes,
        d=_tolerance_at(episode, config),
        goal_tilt=_tilt_at(tilt_episodes, config),
        init_box_halfwidths=_box_at(episode, config),
        platform_active=total > config.platform_timesteps,
        gamma=state.gamma,
    )


def with_gamma(state: CurriculumState, gamma: float) -> CurriculumState:
    return replace(state, gamma=gamma)


def gamma_schedule(training_iteration: int,
                   config: CurriculumConfig = DEFAULT_CURRICULUM) -> float:
    """Discount factor for a given trainer iteration (flat, ramp, flat)."""
    offset = training_iteration - config.gamma_ramp_start
    if offset <= 0:
        return config.gamma_start
    if offset >= config.gamma_ramp_length:
        return config.gamma_final
    frac = offset / config.gamma_ramp_length
    return config.gamma_start + (config.gamma_final - config.gamma_start) * frac


def goal_tolerance(d: float) -> np.ndarray:
    """Per-component goal half-widths (x, z, vx, vz, pitch) for one scalar."""
    v = min(10.0 * d, 1.5)
    return np.array([d, d, v, v, 0.25 * d])
