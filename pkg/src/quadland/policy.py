"""Actor-critic multilayer perceptron with hand-written reverse mode.

Two independent 64x64 tanh networks with linear heads: the actor outputs
the mean of a diagonal Gaussian over normalized actions (a shared
state-independent log standard deviation completes the distribution),
the critic outputs a scalar value.  Forward passes accept a single
observation or a batch.  Gradients are assembled by the trainer from the
cached layer activations; no autodiff framework is involved.
"""

import math
from dataclasses import dataclass, fields
from typing import List, Tuple

import numpy as np

from .errors import CheckpointError, ConfigError

HIDDEN = 64

# differential entropy of a unit Gaussian, per dimension
ENTROPY_CONST = 0.5 * math.log(2.0 * math.pi * math.e)
LOG_2PI = math.log(2.0 * math.pi)

CHECKPOINT_VERSION = 1


@dataclass
class MlpParams:
    """All learnable arrays; field order defines the flattening order."""

    w1: np.ndarray
    b1: np.ndarray
    w2: np.ndarray
    b2: np.ndarray
    w_out: np.ndarray
    b_out: np.ndarray
    vw1: np.ndarray
    vb1: np.ndarray
    vw2: np.ndarray
    vb2: np.ndarray
    vw_out: np.ndarray
    vb_out: np.ndarray
    log_std: np.ndarray

    def leaves(self) -> List[np.ndarray]:
        return [getattr(self, f.name) for f in fields(self)]

    def leaf_names(self) -> List[str]:
        return [f.name for f in fields(self)]

    @property
    def obs_dim(self) -> int:
        return self.w1.shape[0]

    @property
    def act_dim(self) -> int:
        return self.w_out.shape[1]

    def copy(self) -> "MlpParams":
        return MlpParams(*[leaf.copy() for leaf in self.leaves()])

    def to_vector(self) -> np.ndarray:
        return np.concatenate([leaf.ravel() for leaf in self.leaves()])

    def from_vector(self, vec: np.ndarray) -> "MlpParams":
        out = []
        offset = 0
        for leaf in self.leaves():
            out.append(vec[offset:offset + leaf.size].reshape(leaf.shape))
            offset += leaf.size
        if offset != vec.size:
            raise ConfigError("parameter vector has the wrong length")
        return MlpParams(*out)


def orthogonal(rng: np.random.Generator, shape: Tuple[int, int],
               gain: float) -> np.ndarray:
    """Orthogonal matrix scaled by gain; rows or columns orthonormal."""
    flat = rng.standard_normal(shape)
    mat = flat.T if shape[0] < shape[1] else flat
    q, r = np.linalg.qr(mat)
    q = q * np.where(np.diag(r) >= 0.0, 1.0, -1.0)
    if shape[0] < shape[1]:
        q = q.T
    return gain * q


def init_params(rng: np.random.Generator, obs_dim: int, act_dim: int) -> MlpParams:
    """Orthogonal weights (gain sqrt2 hidden, 0.01 actor head, 1.0 critic
    head), zero biases, zero log_std."""
    if obs_dim <= 0 or act_dim <= 0:
        raise ConfigError("obs_dim and act_dim must be positive")
    root2 = math.sqrt(2.0)
    return MlpParams(
        w1=orthogonal(rng, (obs_dim, HIDDEN), root2),
        b1=np.zeros(HIDDEN),
        w2=orthogonal(rng, (HIDDEN, HIDDEN), root2),
        b2=np.zeros(HIDDEN),
        w_out=orthogonal(rng, (HIDDEN, act_dim), 0.01),
        b_out=np.zeros(act_dim),
        vw1=orthogonal(rng, (obs_dim, HIDDEN), root2),
        vb1=np.zeros(HIDDEN),
        vw2=orthogonal(rng, (HIDDEN, HIDDEN), root2),
        vb2=np.zeros(HIDDEN),
        vw_out=orthogonal(rng, (HIDDEN, 1), 1.0),
        vb_out=np.zeros(1),
        log_std=np.zeros(act_dim),
    )


def _check_obs(params: MlpParams, obs: np.ndarray) -> np.ndarray:
    obs = np.asarray(obs, dtype=np.float64)
    if obs.shape[-1] != params.obs_dim:
        raise ConfigError(
            f"observation dim {obs.shape[-1]} does not match network "
            f"input dim {params.obs_dim}")
    return obs


def actor_forward_cached(params: MlpParams, obs: np.ndarray):
    """Batched mean-action forward pass keeping layer activations."""
    x = np.atleast_2d(_check_obs(params, obs))
    h1 = np.tanh(x @ params.w1 + params.b1)
    h2 = np.tanh(h1 @ params.w2 + params.b2)
    mean = h2 @ params.w_out + params.b_out
    return mean, (x, h1, h2)


def critic_forward_cached(params: MlpParams, obs: np.ndarray):
    """Batched value forward pass keeping layer activations."""
    x = np.atleast_2d(_check_obs(params, obs))
    h1 = np.tanh(x @ params.vw1 + params.vb1)
    h2 = np.tanh(h1 @ params.vw2 + params.vb2)
    value = h2 @ params.vw_out + params.vb_out
    return value[:, 0], (x, h1, h2)


def forward_actor(params: MlpParams, obs: np.ndarray) -> np.ndarray:
    """Mean action for one observation or a batch; not clipped."""
    mean, _ = actor_forward_cached(params, obs)
    return mean[0] if np.asarray(obs).ndim == 1 else mean


def forward_critic(params: MlpParams, obs: np.ndarray):
    """Value estimate for one observation or a batch."""
    value, _ = critic_forward_cached(params, obs)
    return float(value[0]) if np.asarray(obs).ndim == 1 else value


def mlp_backward(cache, w2: np.ndarray, w_out: np.ndarray,
                 d_out: np.ndarray) -> List[np.ndarray]:
    """Gradients of a scalar loss w.r.t. one network's six arrays.

    ``d_out`` is the loss gradient at the linear output, shape (n, out).
    """
    x, h1, h2 = cache
    g_w_out = h2.T @ d_out
    g_b_out = d_out.sum(axis=0)
    d_h2 = (d_out @ w_out.T) * (1.0 - h2 * h2)
    g_w2 = h1.T @ d_h2
    g_b2 = d_h2.sum(axis=0)
    d_h1 = (d_h2 @ w2.T) * (1.0 - h1 * h1)
    g_w1 = x.T @ d_h1
    g_b1 = d_h1.sum(axis=0)
    return [g_w1, g_b1, g_w2, g_b2, g_w_out, g_b_out]


def gaussian_log_prob(actions: np.ndarray, mean: np.ndarray,
                      log_std: np.ndarray) -> np.ndarray:
    """Per-sample log density of a diagonal Gaussian, shape (n,)."""
    z = (actions - mean) * np.exp(-log_std)
    return np.sum(-0.5 * z * z - log_std - 0.5 * LOG_2PI, axis=-1)


def entropy(log_std: np.ndarray) -> float:
    """Distribution entropy; state-independent for this action head."""
    return float(np.sum(log_std + ENTROPY_CONST))


def gaussian_sample(params: MlpParams, obs: np.ndarray,
                    rng: np.random.Generator):
    """Unclipped Gaussian draw and its log probability for one observation."""
    mean = forward_actor(params, obs)
    sample = mean + np.exp(params.log_std) * rng.standard_normal(params.act_dim)
    log_prob = float(gaussian_log_prob(sample, mean, params.log_std))
    return sample, log_prob


def sample_action(params: MlpParams, obs: np.ndarray,
                  rng: np.random.Generator):
    """Clipped action for the environment; log_prob is of the unclipped
    draw, since clipping belongs to the action interpretation."""
    sample, log_prob = gaussian_sample(params, obs, rng)
    return np.clip(sample, -1.0, 1.0), log_prob


def deterministic_action(params: MlpParams, obs: np.ndarray) -> np.ndarray:
    """Mean action clipped to the valid range; used for evaluation."""
    return np.clip(forward_actor(params, obs), -1.0, 1.0)


def save_checkpoint(params: MlpParams, path, task: str = ""):
    """Write all arrays plus shape metadata to a single npz file."""
    arrays = {name: leaf for name, leaf in zip(params.leaf_names(),
                                               params.leaves())}
    np.savez(
        path,
        version=np.int64(CHECKPOINT_VERSION),
        obs_dim=np.int64(params.obs_dim),
        act_dim=np.int64(params.act_dim),
        task=np.str_(task),
        **arrays,
    )


def load_checkpoint(path) -> Tuple[MlpParams, str]:
    """Read a checkpoint; any missing array or shape mismatch is an error."""
    try:
        data = np.load(path, allow_pickle=False)
    except (OSError, ValueError) as exc:
        raise CheckpointError(f"cannot read checkpoint {path}: {exc}") from exc
    with data:
        try:
            version = int(data["version"])
            obs_dim = int(data["obs_dim"])
            act_dim = int(data["act_dim"])
            task = str(data["task"])
            leaves = {name: data[name] for name in
                      [f.name for f in fields(MlpParams)]}
        except KeyError as exc:
            raise CheckpointError(f"checkpoint {path} is missing {exc}") from exc
    if version != CHECKPOINT_VERSION:
        raise CheckpointError(f"unsupported checkpoint version {version}")
    params = MlpParams(**leaves)
    reference = init_params(np.random.default_rng(0), obs_dim, act_dim)
    for got, want, name in zip(params.leaves(), reference.leaves(),
                               params.leaf_names()):
        if got.shape != want.shape:
            raise CheckpointError(
                f"checkpoint {path}: array {name} has shape {got.shape}, "
                f"expected {want.shape}")
    return params, task
