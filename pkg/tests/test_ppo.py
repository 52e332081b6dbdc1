"""Trainer tests: GAE against brute force, loss gradients against finite
differences, optimizer arithmetic, and a short end-to-end training run."""

import csv
import math

import numpy as np
import pytest

import oracles
from quadland.curriculum import DEFAULT_CURRICULUM
from quadland.errors import TrainingError
from quadland.policy import (
    forward_actor,
    forward_critic,
    gaussian_log_prob,
    init_params,
)
from quadland.ppo import (
    Adam,
    EvalReport,
    Minibatch,
    PpoConfig,
    RolloutBuffer,
    TrainResult,
    clip_grad_norm,
    compute_gae,
    evaluate_policy,
    evaluate_setpoint,
    normalize_advantages,
    ppo_loss,
    ppo_loss_grads,
    ppo_update,
    run_episode,
    train,
)
from quadland.landing_env import InclinedLandingEnv
from quadland.setpoint_env import SetpointEnv

EVAL_POSITIONS = [(0.0, 2.0), (-1.5, 1.6), (1.5, 1.8)]


def filled_buffer(rng, n=16, obs_dim=5, act_dim=2, episodic=True):
    buf = RolloutBuffer(n, obs_dim, act_dim)
    dones = np.zeros(n)
    if episodic:
        cuts = rng.choice(np.arange(1, n), size=3, replace=False)
        dones[cuts] = 1.0
        dones[-1] = 1.0
    for i in range(n):
        buf.add(rng.standard_normal(obs_dim), rng.standard_normal(act_dim),
                rng.standard_normal(), rng.standard_normal(), dones[i])
    buf.set_values(rng.standard_normal(n))
    return buf


def random_batch(rng, params, n=8, spread_ratios=True):
    obs = rng.standard_normal((n, params.obs_dim))
    mean = forward_actor(params, obs)
    actions = mean + np.exp(params.log_std) * rng.standard_normal(
        (n, params.act_dim))
    log_probs = gaussian_log_prob(actions, mean, params.log_std)
    if spread_ratios:
        # exercise both surrogate branches, but keep every ratio well away
        # from the clip boundaries where min() kinks would break finite
        # differences
        ratios = rng.uniform(0.7, 1.35, size=n)
        ratios = np.where(np.abs(ratios - 0.8) < 0.02, ratios + 0.05, ratios)
        ratios = np.where(np.abs(ratios - 1.2) < 0.02, ratios + 0.05, ratios)
        old_log_probs = log_probs - np.log(ratios)
    else:
        old_log_probs = log_probs
    return Minibatch(
        observations=obs,
        actions=actions,
        old_log_probs=old_log_probs,
        advantages=rng.standard_normal(n),
        returns=rng.standard_normal(n),
    )


class TestGae:
    def test_lambda_zero_is_one_step_td(self):
        rng = np.random.default_rng(0)
        buf = filled_buffer(rng)
        bootstrap = rng.standard_normal()
        compute_gae(buf, 0.97, 0.0, bootstrap)
        for t in range(buf.capacity):
            nonterminal = 1.0 - buf.dones[t]
            next_v = bootstrap if t == buf.capacity - 1 else buf.values[t + 1]
            delta = buf.rewards[t] + 0.97 * next_v * nonterminal - buf.values[t]
            assert abs(buf.advantages[t] - delta) < 1e-12

    def test_lambda_one_is_discounted_return_minus_value(self):
        rng = np.random.default_rng(1)
        n = 12
        buf = RolloutBuffer(n, 3, 2)
        for i in range(n):
            buf.add(np.zeros(3), np.zeros(2), 0.0, rng.standard_normal(),
                    i == n - 1)
        buf.set_values(rng.standard_normal(n))
        compute_gae(buf, 0.97, 1.0, rng.standard_normal())
        for t in range(n):
            discounted = sum(0.97 ** (k - t) * buf.rewards[k]
                             for k in range(t, n))
            assert abs(buf.advantages[t] - (discounted - buf.values[t])) < 1e-10

    def test_three_step_hand_example(self):
        buf = RolloutBuffer(3, 1, 1)
        for reward, done in ((-1.0, False), (-1.0, False), (0.0, True)):
            buf.add(np.zeros(1), np.zeros(1), 0.0, reward, done)
        buf.set_values(np.zeros(3))
        compute_gae(buf, 0.97, 0.95, 5.0)
        want = oracles.gae_reference([-1.0, -1.0, 0.0], [0.0, 0.0, 0.0], 5.0,
                                     [False, False, True], 0.97, 0.95)
        assert buf.advantages[2] == 0.0
        np.testing.assert_allclose(buf.advantages, want, atol=1e-12)

    def test_matches_brute_force_reference(self):
        rng = np.random.default_rng(2)
        for _ in range(20):
            buf = filled_buffer(rng, n=24)
            bootstrap = rng.standard_normal()
            compute_gae(buf, 0.99, 0.95, bootstrap)
            want = oracles.gae_reference(buf.rewards, buf.values, bootstrap,
                                         buf.dones.astype(bool), 0.99, 0.95)
            np.testing.assert_allclose(buf.advantages, want, atol=1e-10)
            np.testing.assert_allclose(buf.returns,
                                       buf.advantages + buf.values, atol=1e-12)

    def test_requires_full_buffer(self):
        buf = RolloutBuffer(8, 3, 2)
        buf.add(np.zeros(3), np.zeros(2), 0.0, 0.0, False)
        with pytest.raises(TrainingError):
            compute_gae(buf, 0.99, 0.95, 0.0)


class TestBuffer:
    def test_overflow_rejected(self):
        buf = RolloutBuffer(2, 3, 2)
        buf.add(np.zeros(3), np.zeros(2), 0.0, 0.0, False)
        buf.add(np.zeros(3), np.zeros(2), 0.0, 0.0, False)
        with pytest.raises(TrainingError):
            buf.add(np.zeros(3), np.zeros(2), 0.0, 0.0, False)

    def test_clear_resets(self):
        rng = np.random.default_rng(3)
        buf = filled_buffer(rng, n=8)
        compute_gae(buf, 0.99, 0.95, 0.0)
        buf.clear()
        assert buf.position == 0 and not buf.full and not buf.ready


def test_advantage_normalization_invariants():
    rng = np.random.default_rng(4)
    for scale in (1.0, 50.0, 1e-3):
        adv = scale * rng.standard_normal(2048) + rng.standard_normal()
        normed = normalize_advantages(adv)
        assert abs(normed.mean()) < 1e-10
        # the 1e-8 denominator guard biases the std low by about eps/scale
        assert abs(normed.std() - 1.0) < 1e-6 + 1e-8 / scale
        shifted = normalize_advantages(adv + 123.4)
        np.testing.assert_allclose(shifted, normed, atol=1e-6)


class TestLossGradients:
    def test_matches_finite_differences(self):
        rng = np.random.default_rng(5)
        params = init_params(rng, 5, 2)
        for _ in range(5):
            batch = random_batch(rng, params)

            def f(vec):
                return ppo_loss(params.from_vector(vec), batch, 0.2, 0.5, 0.01)

            loss, grads, _ = ppo_loss_grads(params, batch, 0.2, 0.5, 0.01)
            assert abs(loss - f(params.to_vector())) < 1e-12
            flat = np.concatenate([g.ravel() for g in grads])
            numeric = oracles.central_difference_gradient(f, params.to_vector())
            rel = np.linalg.norm(flat - numeric) / np.linalg.norm(numeric)
            assert rel < 1e-4

    def test_unit_ratio_equals_vanilla_policy_gradient(self):
        rng = np.random.default_rng(6)
        params = init_params(rng, 5, 2)
        batch = random_batch(rng, params, spread_ratios=False)

        def vanilla(vec):
            p = params.from_vector(vec)
            mean = forward_actor(p, batch.observations)
            lp = gaussian_log_prob(batch.actions, mean, p.log_std)
            return -float(np.mean(batch.advantages * lp))

        _, grads, _ = ppo_loss_grads(params, batch, 0.2, 0.0, 0.0)
        flat = np.concatenate([g.ravel() for g in grads])
        numeric = oracles.central_difference_gradient(vanilla,
                                                      params.to_vector())
        rel = np.linalg.norm(flat - numeric) / np.linalg.norm(numeric)
        assert rel < 1e-4

    def test_zero_advantages_freeze_actor(self):
        rng = np.random.default_rng(7)
        params = init_params(rng, 5, 2)
        batch = random_batch(rng, params)._replace(advantages=np.zeros(8))
        _, grads, _ = ppo_loss_grads(params, batch, 0.2, 0.5, 0.01)
        names = params.leaf_names()
        for name, g in zip(names, grads):
            if name.startswith("v"):
                assert np.any(g != 0.0)
            elif name == "log_std":
                np.testing.assert_allclose(g, -0.01, atol=1e-15)
            else:
                assert not g.any()

    def test_single_sample_hand_computed(self):
        rng = np.random.default_rng(8)
        params = init_params(rng, 5, 2)
        obs = rng.standard_normal((1, 5))
        mean = forward_actor(params, obs)
        action = mean + 0.3
        log_prob = gaussian_log_prob(action, mean, params.log_std)
        batch = Minibatch(observations=obs, actions=action,
                          old_log_probs=log_prob - math.log(1.3),
                          advantages=np.array([2.0]),
                          returns=np.array([0.7]))
        value = forward_critic(params, obs)[0]
        hand = -1.2 * 2.0 + 0.5 * (value - 0.7) ** 2
        assert abs(ppo_loss(params, batch, 0.2, 0.5, 0.0) - hand) < 1e-10

    def test_nonfinite_loss_aborts_update(self):
        rng = np.random.default_rng(9)
        params = init_params(rng, 5, 2)
        buf = filled_buffer(rng, n=8)
        compute_gae(buf, 0.99, 0.95, 0.0)
        buf.returns[:] = np.inf
        config = PpoConfig(n_steps=8, minibatch_size=8, epochs=1,
                           total_timesteps=8)
        with np.errstate(invalid="ignore"), pytest.raises(TrainingError):
            ppo_update(params, buf, config, Adam(params, 3e-4),
                       np.random.default_rng(0))


class TestOptimizer:
    def test_clip_rescales_large_gradients(self):
        grads = [np.array([3.0, 4.0])]
        norm = clip_grad_norm(grads, 0.5)
        assert abs(norm - 5.0) < 1e-12
        assert abs(np.linalg.norm(grads[0]) - 0.5) < 1e-6

    def test_clip_leaves_small_gradients(self):
        grads = [np.array([0.3, 0.0])]
        clip_grad_norm(grads, 0.5)
        assert np.array_equal(grads[0], [0.3, 0.0])

    def test_adam_matches_reference_formula(self):
        rng = np.random.default_rng(10)
        params = init_params(rng, 5, 2)
        adam = Adam(params, 3e-4)
        m = [np.zeros_like(l) for l in params.leaves()]
        v = [np.zeros_like(l) for l in params.leaves()]
        current = params
        for t in range(1, 6):
            grads = [rng.standard_normal(l.shape) for l in current.leaves()]
            expect = []
            for i, leaf in enumerate(current.leaves()):
                m[i] = 0.9 * m[i] + 0.1 * grads[i]
                v[i] = 0.999 * v[i] + 0.001 * grads[i] ** 2
                m_hat = m[i] / (1 - 0.9 ** t)
                v_hat = v[i] / (1 - 0.999 ** t)
                expect.append(leaf - 3e-4 * m_hat / (np.sqrt(v_hat) + 1e-5))
            current = adam.step(current, grads)
            for got, want in zip(current.leaves(), expect):
                np.testing.assert_allclose(got, want, atol=1e-12)


class TestUpdate:
    def make_inputs(self, seed=11):
        rng = np.random.default_rng(seed)
        params = init_params(rng, 5, 2)
        buf = filled_buffer(rng, n=32)
        compute_gae(buf, 0.99, 0.95, 0.0)
        config = PpoConfig(n_steps=32, minibatch_size=8, epochs=2,
                           total_timesteps=32)
        return params, buf, config

    def test_changes_params_and_clears_buffer(self):
        params, buf, config = self.make_inputs()
        new_params, diag = ppo_update(params, buf, config,
                                      Adam(params, 3e-4),
                                      np.random.default_rng(1))
        assert not np.array_equal(new_params.to_vector(), params.to_vector())
        assert buf.position == 0 and not buf.ready
        for key in ("loss", "policy_loss", "value_loss", "grad_norm"):
            assert key in diag

    def test_deterministic_given_seed(self):
        out = []
        for _ in range(2):
            params, buf, config = self.make_inputs()
            new_params, _ = ppo_update(params, buf, config,
                                       Adam(params, 3e-4),
                                       np.random.default_rng(2))
            out.append(new_params.to_vector())
        assert np.array_equal(out[0], out[1])


class TestConfigValidation:
    def test_minibatch_must_divide(self):
        with pytest.raises(ValueError):
            PpoConfig(n_steps=100, minibatch_size=64)

    def test_clip_range_bounds(self):
        with pytest.raises(ValueError):
            PpoConfig(clip_range=0.0)

    def test_single_worker_only(self):
        with pytest.raises(ValueError):
            PpoConfig(n_envs=2)


class TestTrainLoop:
    def small_config(self, seed=0):
        return PpoConfig(n_steps=256, minibatch_size=64, epochs=2,
                         total_timesteps=512, seed=seed,
                         stop_success_rate=None)

    def test_runs_and_writes_metrics(self, tmp_path):
        metrics = tmp_path / "metrics.csv"
        result = train(lambda seed: SetpointEnv(seed=seed),
                       self.small_config(), metrics_path=str(metrics),
                       checkpoint_dir=str(tmp_path / "ckpt"))
        assert isinstance(result, TrainResult)
        assert result.timesteps == 512 and result.iterations == 2
        assert not result.stopped_early
        with open(metrics) as fh:
            rows = list(csv.reader(fh))
        assert rows[0] == list(("iteration", "timesteps",
                                "mean_episode_return", "mean_episode_length",
                                "success_rate"))
        assert len(rows) == 3
        assert (tmp_path / "ckpt" / "final.npz").exists()

    def test_metrics_byte_identical_across_runs(self, tmp_path):
        contents = []
        for run in range(2):
            path = tmp_path / f"metrics_{run}.csv"
            train(lambda seed: SetpointEnv(seed=seed), self.small_config(7),
                  metrics_path=str(path))
            contents.append(path.read_bytes())
        assert contents[0] == contents[1]

    def test_curriculum_trainer_advances_schedule(self, tmp_path):
        config = PpoConfig(n_steps=256, minibatch_size=64, epochs=1,
                           total_timesteps=512, seed=3,
                           stop_success_rate=None)
        result = train(lambda seed: InclinedLandingEnv(seed=seed), config,
                       curriculum_config=DEFAULT_CURRICULUM)
        assert result.final_schedule is not None
        assert result.final_schedule.episode_index == result.episodes
        assert result.final_schedule.timestep_total <= result.timesteps


class TestEvaluation:
    def test_eval_report_arithmetic(self):
        report = EvalReport(positions=EVAL_POSITIONS, successes=[9, 9, 10],
                            n_trials=10)
        assert report.per_position_pct == [90.0, 90.0, 100.0]
        assert abs(report.total_pct - 93.33333333333333) < 1e-10

    def test_untrained_policy_fails_landing_eval(self):
        params = init_params(np.random.default_rng(30), 5, 2)
        env = InclinedLandingEnv(seed=1)
        report = evaluate_policy(params, env, EVAL_POSITIONS, n_trials=2)
        assert report.total_pct <= 20.0

    def test_run_episode_caps_steps(self):
        params = init_params(np.random.default_rng(31), 8, 3)
        env = SetpointEnv(seed=2)
        success, total, steps = run_episode(params, env)
        assert steps == 300 and isinstance(success, bool) and total < 0.0

    def test_untrained_policy_fails_setpoint_eval(self):
        params = init_params(np.random.default_rng(32), 8, 3)
        env = SetpointEnv(seed=3)
        assert evaluate_setpoint(params, env, n_trials=5) <= 0.2
