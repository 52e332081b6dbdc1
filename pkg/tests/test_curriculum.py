"""Schedule tests: exact checkpoint values, decrement oracle, monotonicity."""

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from quadland.curriculum import (
    DEFAULT_CURRICULUM,
    EVAL_GOAL_TOLERANCE,
    CurriculumConfig,
    advance_episode,
    gamma_schedule,
    goal_tolerance,
    initial_state,
    with_gamma,
)

EPISODE_STEPS = 300


def run_episodes(n, steps=EPISODE_STEPS, state=None):
    state = initial_state() if state is None else state
    for _ in range(n):
        state = advance_episode(state, steps)
    return state


class TestToleranceSchedule:
    def test_initial_value(self):
        s = initial_state()
        assert s.d == 0.25
        assert s.goal_tilt == 0.0
        assert s.platform_active is False
        assert s.init_box_halfwidths == (0.1, 0.1)
        assert s.gamma == 0.97

    def test_halfway_checkpoint(self):
        assert run_episodes(2500).d == 0.175

    def test_floor_reached_at_5000(self):
        assert run_episodes(5000).d == 0.10
        assert run_episodes(5200).d == 0.10

    def test_matches_per_episode_decrement(self):
        state = initial_state()
        expected = 0.25
        for _ in range(6000):
            state = advance_episode(state, EPISODE_STEPS)
            expected = max(0.10, expected - 0.15 / 5000.0)
            assert abs(state.d - expected) < 1e-12


class TestTiltSchedule:
    def test_frozen_before_step_gate(self):
        state = initial_state()
        while state.timestep_total + EPISODE_STEPS <= 400_000:
            state = advance_episode(state, EPISODE_STEPS)
            assert state.goal_tilt == 0.0
        assert state.tilt_episode_count == 0
        state = advance_episode(state, EPISODE_STEPS)
        assert state.timestep_total > 400_000
        assert state.tilt_episode_count == 1
        assert state.goal_tilt < 0.0

    def test_boundary_is_strict(self):
        state = advance_episode(initial_state(), 400_000)
        assert state.goal_tilt == 0.0
        state = advance_episode(state, 1)
        assert state.goal_tilt < 0.0

    def test_per_episode_rate(self):
        state = advance_episode(initial_state(), 400_001)
        assert abs(state.goal_tilt + (math.pi / 7.0) / 6000.0) < 1e-15

    def test_floor_reached_exactly_at_6000(self):
        state = advance_episode(initial_state(), 400_001)
        for _ in range(5999):
            state = advance_episode(state, EPISODE_STEPS)
        assert state.tilt_episode_count == 6000
        assert state.goal_tilt == -math.pi / 7.0
        state = advance_episode(state, EPISODE_STEPS)
        assert state.goal_tilt == -math.pi / 7.0


class TestPlatformActivation:
    def test_strict_threshold(self):
        state = advance_episode(initial_state(), 800_000)
        assert state.platform_active is False
        state = advance_episode(state, 1)
        assert state.platform_active is True

    def test_latched_on(self):
        state = advance_episode(initial_state(), 800_001)
        for _ in range(50):
            state = advance_episode(state, EPISODE_STEPS)
            assert state.platform_active is True


class TestInitBox:
    def test_growth_rates(self):
        one = run_episodes(1)
        assert abs(one.init_box_halfwidths[0] - (0.1 + 1.0 / 6000.0)) < 1e-15
        assert abs(one.init_box_halfwidths[1] - (0.1 + 1.0 / 8000.0)) < 1e-15

    def test_x_growth_after_6000(self):
        assert run_episodes(6000).init_box_halfwidths[0] == 1.1

    def test_caps_at_arena_halfextents(self):
        far = run_episodes(25000, steps=1)
        assert far.init_box_halfwidths == (3.4, 1.2)


class TestGammaSchedule:
    @pytest.mark.parametrize("iteration,value", [
        (0, 0.97), (100, 0.97), (300, 0.97),
        (400, 0.98), (500, 0.99), (1000, 0.99),
    ])
    def test_checkpoints(self, iteration, value):
        assert gamma_schedule(iteration) == value

    def test_monotone_and_bounded(self):
        prev = 0.97
        for it in range(0, 800):
            g = gamma_schedule(it)
            assert 0.97 <= g <= 0.99
            assert g >= prev
            prev = g

    def test_with_gamma_updates_snapshot(self):
        state = with_gamma(initial_state(), 0.98)
        assert state.gamma == 0.98
        assert state.d == 0.25


class TestGoalTolerance:
    @pytest.mark.parametrize("d,want", [
        (0.25, [0.25, 0.25, 1.5, 1.5, 0.0625]),
        (0.10, [0.10, 0.10, 1.0, 1.0, 0.025]),
        (0.15, [0.15, 0.15, 1.5, 1.5, 0.0375]),
    ])
    def test_checkpoints_exact(self, d, want):
        assert np.array_equal(goal_tolerance(d), np.array(want))

    @given(d_lo=st.floats(0.05, 0.30), d_hi=st.floats(0.05, 0.30))
    @settings(max_examples=200)
    def test_componentwise_monotone(self, d_lo, d_hi):
        if d_lo > d_hi:
            d_lo, d_hi = d_hi, d_lo
        assert np.all(goal_tolerance(d_lo) <= goal_tolerance(d_hi))

    def test_eval_override_value(self):
        assert np.array_equal(EVAL_GOAL_TOLERANCE,
                              np.array([0.10, 0.10, 1.5, 1.5, 0.025]))


@given(lengths=st.lists(st.integers(1, 300), min_size=1, max_size=400))
@settings(max_examples=100, deadline=None)
def test_monotone_over_any_episode_sequence(lengths):
    state = initial_state()
    prev = state
    for n in lengths:
        state = advance_episode(prev, n)
        assert state.d <= prev.d
        assert state.goal_tilt <= prev.goal_tilt
        assert state.init_box_halfwidths[0] >= prev.init_box_halfwidths[0]
        assert state.init_box_halfwidths[1] >= prev.init_box_halfwidths[1]
        assert state.platform_active >= prev.platform_active
        assert 0.10 <= state.d <= 0.25
        assert -math.pi / 7.0 <= state.goal_tilt <= 0.0
        prev = state


def test_same_sequence_reproduces_states():
    a = run_episodes(137)
    b = run_episodes(137)
    assert a == b


def test_bad_config_rejected():
    with pytest.raises(ValueError):
        CurriculumConfig(d_episodes=0)
    with pytest.raises(ValueError):
        CurriculumConfig(gamma_ramp_length=0)


def test_default_rates_match_stated_constants():
    cfg = DEFAULT_CURRICULUM
    assert abs((cfg.d_start - cfg.d_final) / cfg.d_episodes - 0.15 / 5000.0) < 1e-18
    assert abs(-cfg.tilt_final / cfg.tilt_episodes - (math.pi / 7.0) / 6000.0) < 1e-18
    assert cfg.init_growth == (1.0 / 6000.0, 1.0 / 8000.0)
