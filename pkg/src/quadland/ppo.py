"""Clipped-surrogate on-policy trainer with GAE and Adam.

One iteration collects a fixed number of environment steps with the
current stochastic policy, estimates advantages, then runs several
epochs of shuffled minibatch updates.  The buffer is cleared after every
update; no transition is ever reused.  All randomness flows from a
single seed, so a run is reproducible bit for bit.

Episode ends are treated two ways: reaching the landing goal is a true
terminal state (bootstrap value zero), while running out the episode
clock is a truncation, handled by folding the discounted terminal value
into the final reward before advantage estimation.
"""

import csv
import math
import os
from collections import deque
from dataclasses import dataclass
from typing import Callable, List, NamedTuple, Optional, Sequence, Tuple

import numpy as np

from .curriculum import (
    CurriculumConfig,
    CurriculumState,
    advance_episode,
    gamma_schedule,
    initial_state,
    with_gamma,
)
from .errors import TrainingError
from .policy import (
    MlpParams,
    actor_forward_cached,
    critic_forward_cached,
    deterministic_action,
    entropy,
    forward_critic,
    gaussian_log_prob,
    gaussian_sample,
    init_params,
    mlp_backward,
    save_checkpoint,
)

METRICS_COLUMNS = ("iteration", "timesteps", "mean_episode_return",
                   "mean_episode_length", "success_rate")


@dataclass(frozen=True)
class PpoConfig:
    n_steps: int = 2048
    n_envs: int = 1
    minibatch_size: int = 64
    epochs: int = 10
    clip_range: float = 0.2
    learning_rate: float = 3e-4
    gamma: float = 0.99
    gae_lambda: float = 0.95
    value_coef: float = 0.5
    entropy_coef: float = 0.0
    max_grad_norm: float = 0.5
    total_timesteps: int = 1_000_000
    seed: int = 0
    # early stop once the last 100 episodes succeed at this rate (and the
    # curriculum, if any, is fully mature); None trains the full budget
    stop_success_rate: Optional[float] = 0.95

    def __post_init__(self):
        if self.n_envs != 1:
            raise ValueError("only single-worker rollouts are supported")
        if (self.n_steps * self.n_envs) % self.minibatch_size != 0:
            raise ValueError("minibatch_size must divide n_steps * n_envs")
        if not 0.0 < self.clip_range < 1.0:
            raise ValueError("clip_range must be in (0, 1)")
        if self.learning_rate <= 0 or self.gae_lambda < 0 or self.gamma <= 0:
            raise ValueError("rates must be positive")
        if self.epochs <= 0 or self.n_steps <= 0 or self.total_timesteps <= 0:
            raise ValueError("counts must be positive")


class RolloutBuffer:
    """Fixed-capacity per-step storage for one on-policy rollout."""

    def __init__(self, n_steps: int, obs_dim: int, act_dim: int):
        self.capacity = n_steps
        self.observations = np.zeros((n_steps, obs_dim))
        self.actions = np.zeros((n_steps, act_dim))
        self.log_probs = np.zeros(n_steps)
        self.rewards = np.zeros(n_steps)
        self.values = np.zeros(n_steps)
        self.dones = np.zeros(n_steps)
        self.advantages = np.zeros(n_steps)
        self.returns = np.zeros(n_steps)
        self.position = 0
        self.ready = False

    @property
    def full(self) -> bool:
        return self.position == self.capacity

    def add(self, obs, action, log_prob, reward, done):
        if self.full:
            raise TrainingError("rollout buffer overflow")
        i = self.position
        self.observations[i] = obs
        self.actions[i] = action
        self.log_probs[i] = log_prob
        self.rewards[i] = reward
        self.dones[i] = 1.0 if done else 0.0
        self.position = i + 1

    def set_values(self, values: np.ndarray):
        self.values[:] = values

    def clear(self):
        self.position = 0
        self.ready = False


def compute_gae(buffer: RolloutBuffer, gamma: float, lam: float,
                bootstrap_value: float):
    """Backward-recursive advantage estimate over a full buffer.

    ``bootstrap_value`` closes the final step when the rollout stopped
    mid-episode; a done flag cuts both bootstrap and accumulation.
    """
    if not buffer.full:
        raise TrainingError("advantages requested before the buffer is full")
    last_adv = 0.0
    next_value = bootstrap_value
    for t in range(buffer.capacity - 1, -1, -1):
        nonterminal = 1.0 - buffer.dones[t]
        delta = (buffer.rewards[t] + gamma * next_value * nonterminal
                 - buffer.values[t])
        last_adv = delta + gamma * lam * nonterminal * last_adv
        buffer.advantages[t] = last_adv
        next_value = buffer.values[t]
    buffer.returns[:] = buffer.advantages + buffer.values
    buffer.ready = True


class Minibatch(NamedTuple):
    observations: np.ndarray
    actions: np.ndarray
    old_log_probs: np.ndarray
    advantages: np.ndarray
    returns: np.ndarray


def ppo_loss(params: MlpParams, batch: Minibatch, clip_range: float,
             value_coef: float, entropy_coef: float) -> float:
    """Scalar minimization objective; the gradient routine must match it."""
    mean, _ = actor_forward_cached(params, batch.observations)
    log_probs = gaussian_log_prob(batch.actions, mean, params.log_std)
    ratio = np.exp(log_probs - batch.old_log_probs)
    surr1 = ratio * batch.advantages
    surr2 = np.clip(ratio, 1.0 - clip_range, 1.0 + clip_range) * batch.advantages
    policy_loss = -np.mean(np.minimum(surr1, surr2))
    values, _ = critic_forward_cached(params, batch.observations)
    value_loss = np.mean((values - batch.returns) ** 2)
    return float(policy_loss + value_coef * value_loss
                 - entropy_coef * entropy(params.log_std))


def ppo_loss_grads(params: MlpParams, batch: Minibatch, clip_range: float,
                   value_coef: float, entropy_coef: float):
    """Loss, per-leaf gradients (MlpParams order), and diagnostics."""
    n = batch.observations.shape[0]
    mean, actor_cache = actor_forward_cached(params, batch.observations)
    sigma = np.exp(params.log_std)
    z = (batch.actions - mean) / sigma
    log_probs = np.sum(-0.5 * z * z - params.log_std - 0.5 * math.log(2 * math.pi),
                       axis=-1)
    ratio = np.exp(log_probs - batch.old_log_probs)
    surr1 = ratio * batch.advantages
    clipped = np.clip(ratio, 1.0 - clip_range, 1.0 + clip_range)
    surr2 = clipped * batch.advantages
    policy_loss = -np.mean(np.minimum(surr1, surr2))

    values, critic_cache = critic_forward_cached(params, batch.observations)
    value_err = values - batch.returns
    value_loss = np.mean(value_err ** 2)
    loss = (policy_loss + value_coef * value_loss
            - entropy_coef * entropy(params.log_std))

    # the min() picks the unclipped branch wherever surr1 <= surr2; only
    # that branch carries a nonzero derivative through log_probs
    active = (surr1 <= surr2).astype(np.float64)
    d_log_probs = -(ratio * batch.advantages * active) / n
    d_mean = d_log_probs[:, None] * (z / sigma)
    d_log_std = np.sum(d_log_probs[:, None] * (z * z - 1.0), axis=0)
    d_log_std = d_log_std - entropy_coef
    actor_grads = mlp_backward(actor_cache, params.w2, params.w_out, d_mean)

    d_values = value_coef * 2.0 * value_err / n
    critic_grads = mlp_backward(critic_cache, params.vw2, params.vw_out,
                                d_values[:, None])

    grads = actor_grads + critic_grads + [d_log_std]
    diagnostics = {
        "loss": float(loss),
        "policy_loss": float(policy_loss),
        "value_loss": float(value_loss),
        "entropy": entropy(params.log_std),
        "clip_fraction": float(np.mean((np.abs(ratio - 1.0) > clip_range))),
    }
    return float(loss), grads, diagnostics


def clip_grad_norm(grads: List[np.ndarray], max_norm: float) -> float:
    """Scale gradients in place to a global norm cap; returns the norm."""
    total = math.sqrt(sum(float(np.sum(g * g)) for g in grads))
    coef = max_norm / (total + 1e-6)
    if coef < 1.0:
        for g in grads:
            g *= coef
    return total


class Adam:
    """Moment-tracking optimizer over the parameter leaves."""

    def __init__(self, template: MlpParams, learning_rate: float,
                 beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-5):
        self.learning_rate = learning_rate
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.m = [np.zeros_like(leaf) for leaf in template.leaves()]
        self.v = [np.zeros_like(leaf) for leaf in template.leaves()]
        self.t = 0

    def step(self, params: MlpParams, grads: List[np.ndarray]) -> MlpParams:
        self.t += 1
        bias1 = 1.0 - self.beta1 ** self.t
        bias2 = 1.0 - self.beta2 ** self.t
        new_leaves = []
        for i, (leaf, g) in enumerate(zip(params.leaves(), grads)):
            self.m[i] = self.beta1 * self.m[i] + (1.0 - self.beta1) * g
            self.v[i] = self.beta2 * self.v[i] + (1.0 - self.beta2) * g * g
            step = (self.learning_rate * (self.m[i] / bias1)
                    / (np.sqrt(self.v[i] / bias2) + self.eps))
            new_leaves.append(leaf - step)
        return MlpParams(*new_leaves)


def normalize_advantages(advantages: np.ndarray) -> np.ndarray:
    return (advantages - advantages.mean()) / (advantages.std() + 1e-8)


def ppo_update(params: MlpParams, buffer: RolloutBuffer, config: PpoConfig,
               adam: Adam, rng: np.random.Generator):
    """Several epochs of shuffled minibatch steps; clears the buffer."""
    if not buffer.ready:
        raise TrainingError("advantages must be computed before the update")
    advantages = normalize_advantages(buffer.advantages)
    total = buffer.capacity
    diagnostics = {}
    for _ in range(config.epochs):
        perm = rng.permutation(total)
        for start in range(0, total, config.minibatch_size):
            idx = perm[start:start + config.minibatch_size]
            batch = Minibatch(
                observations=buffer.observations[idx],
                actions=buffer.actions[idx],
                old_log_probs=buffer.log_probs[idx],
                advantages=advantages[idx],
                returns=buffer.returns[idx],
            )
            loss, grads, diagnostics = ppo_loss_grads(
                params, batch, config.clip_range, config.value_coef,
                config.entropy_coef)
            if not math.isfinite(loss):
                raise TrainingError("non-finite loss; aborting",
                                    diagnostics=diagnostics)
            diagnostics["grad_norm"] = clip_grad_norm(grads,
                                                      config.max_grad_norm)
            params = adam.step(params, grads)
    buffer.clear()
    return params, diagnostics


def _curriculum_mature(state: Optional[CurriculumState],
                       config: Optional[CurriculumConfig]) -> bool:
    if state is None:
        return True
    return (state.d == config.d_final
            and state.goal_tilt == config.tilt_final
            and state.platform_active)


class _MetricsWriter:
    def __init__(self, path: Optional[str]):
        self.path = path
        self._file = None
        self._writer = None
        if path is not None:
            self._file = open(path, "w", newline="")
            self._writer = csv.writer(self._file, lineterminator="\n")
            self._writer.writerow(METRICS_COLUMNS)

    def row(self, iteration: int, timesteps: int, mean_return: float,
            mean_length: float, success_rate: float):
        if self._writer is None:
            return
        self._writer.writerow([iteration, timesteps, repr(float(mean_return)),
                               repr(float(mean_length)),
                               repr(float(success_rate))])
        self._file.flush()

    def close(self):
        if self._file is not None:
            self._file.close()


@dataclass
class TrainResult:
    params: MlpParams
    iterations: int
    timesteps: int
    episodes: int
    stopped_early: bool
    aborted_episodes: int
    final_schedule: Optional[CurriculumState]


def train(make_env: Callable[[int], object], config: PpoConfig,
          curriculum_config: Optional[CurriculumConfig] = None, *,
          metrics_path: Optional[str] = None,
          checkpoint_dir: Optional[str] = None,
          checkpoint_every: int = 100,
          progress: Optional[Callable[[dict], None]] = None) -> TrainResult:
    """Full training loop over a single environment worker.

    ``make_env`` receives a derived seed and must return a fresh
    environment.  With a curriculum config the environment is reshaped
    after every episode and the discount follows the iteration schedule;
    without one the discount is fixed at ``config.gamma``.
    """
    env_seed, init_seed, action_seed, shuffle_seed = \
        np.random.SeedSequence(config.seed).generate_state(4)
    env = make_env(int(env_seed))
    params = init_params(np.random.default_rng(init_seed),
                         env.observation_dim, env.action_dim)
    action_rng = np.random.default_rng(action_seed)
    shuffle_rng = np.random.default_rng(shuffle_seed)
    adam = Adam(params, config.learning_rate)
    buffer = RolloutBuffer(config.n_steps, env.observation_dim, env.action_dim)

    schedule = None
    if curriculum_config is not None:
        schedule = initial_state(curriculum_config)
        env.apply_curriculum(schedule)
    obs = env.reset()

    recent = deque(maxlen=100)
    metrics = _MetricsWriter(metrics_path)
    if checkpoint_dir is not None:
        os.makedirs(checkpoint_dir, exist_ok=True)
    task = getattr(env, "task_name", "")

    timesteps = 0
    iteration = 0
    episodes = 0
    aborted = 0
    episode_return = 0.0
    episode_length = 0
    stopped_early = False

    try:
        while timesteps < config.total_timesteps:
            iteration += 1
            if curriculum_config is not None:
                gamma = gamma_schedule(iteration, curriculum_config)
                schedule = with_gamma(schedule, gamma)
            else:
                gamma = config.gamma

            pending_timeouts = []
            for t in range(config.n_steps):
                action, log_prob = gaussian_sample(params, obs, action_rng)
                next_obs, reward, done, info = env.step(action)
                buffer.add(obs, action, log_prob, reward, done)
                episode_return += reward
                episode_length += 1
                if done:
                    if info["failure"]:
                        aborted += 1
                    elif not info.get("goal", False):
                        pending_timeouts.append((t, next_obs.copy()))
                    episodes += 1
                    recent.append((episode_return, episode_length,
                                   bool(info["success"])))
                    if schedule is not None:
                        schedule = advance_episode(schedule, episode_length,
                                                   curriculum_config)
                        env.apply_curriculum(schedule)
                    obs = env.reset()
                    episode_return = 0.0
                    episode_length = 0
                else:
                    obs = next_obs
            timesteps += config.n_steps

            buffer.set_values(forward_critic(params, buffer.observations))
            if pending_timeouts:
                terminal_obs = np.stack([o for _, o in pending_timeouts])
                terminal_values = forward_critic(params, terminal_obs)
                for (idx, _), value in zip(pending_timeouts, terminal_values):
                    buffer.rewards[idx] += gamma * value
            if buffer.dones[-1]:
                bootstrap = 0.0
            else:
                bootstrap = float(forward_critic(params, obs))
            compute_gae(buffer, gamma, config.gae_lambda, bootstrap)
            params, diagnostics = ppo_update(params, buffer, config, adam,
                                             shuffle_rng)

            if recent:
                mean_return = sum(r for r, _, _ in recent) / len(recent)
                mean_length = sum(l for _, l, _ in recent) / len(recent)
                success_rate = sum(s for _, _, s in recent) / len(recent)
            else:
                mean_return = mean_length = success_rate = float("nan")
            metrics.row(iteration, timesteps, mean_return, mean_length,
                        success_rate)
            if progress is not None:
                progress({"iteration": iteration, "timesteps": timesteps,
                          "mean_return": mean_return,
                          "success_rate": success_rate,
                          **diagnostics})
            if checkpoint_dir is not None and iteration % checkpoint_every == 0:
                save_checkpoint(params, os.path.join(
                    checkpoint_dir, f"checkpoint_{iteration:06d}.npz"), task)

            if (config.stop_success_rate is not None
                    and len(recent) == recent.maxlen
                    and success_rate >= config.stop_success_rate
                    and _curriculum_mature(schedule, curriculum_config)):
                stopped_early = True
                break
    finally:
        metrics.close()
    if checkpoint_dir is not None:
        save_checkpoint(params, os.path.join(checkpoint_dir, "final.npz"),
                        task)
    return TrainResult(params=params, iterations=iteration,
                       timesteps=timesteps, episodes=episodes,
                       stopped_early=stopped_early, aborted_episodes=aborted,
                       final_schedule=schedule)


@dataclass
class EvalReport:
    """Success percentages per start position plus the overall rate."""

    positions: List[Tuple[float, ...]]
    successes: List[int]
    n_trials: int

    @property
    def per_position_pct(self) -> List[float]:
        return [100.0 * s / self.n_trials for s in self.successes]

    @property
    def total_pct(self) -> float:
        return 100.0 * sum(self.successes) / (self.n_trials * len(self.positions))


def run_episode(params: MlpParams, env, position=None) -> Tuple[bool, float, int]:
    """One deterministic (mean-action) episode; returns (success, return, steps)."""
    obs = env.reset(position=position)
    total = 0.0
    steps = 0
    while True:
        obs, reward, done, info = env.step(deterministic_action(params, obs))
        total += reward
        steps += 1
        if done:
            return bool(info["success"]), total, steps


def evaluate_policy(params: MlpParams, env,
                    initial_positions: Sequence[Tuple[float, float]],
                    n_trials: int = 10) -> EvalReport:
    """Deterministic landing evaluation from fixed start positions."""
    env.configure_eval()
    successes = []
    for position in initial_positions:
        wins = 0
        for _ in range(n_trials):
            success, _, _ = run_episode(params, env, position=position)
            wins += success
        successes.append(wins)
    return EvalReport(positions=[tuple(p) for p in initial_positions],
                      successes=successes, n_trials=n_trials)


def evaluate_setpoint(params: MlpParams, env, n_trials: int = 20) -> float:
    """Fraction of random-start episodes that reach and hold the set point."""
    wins = 0
    for _ in range(n_trials):
        success, _, _ = run_episode(params, env)
        wins += success
    return wins / n_trials
