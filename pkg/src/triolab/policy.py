"""Belief- and task-conditioned Gaussian policies trained with clipped PPO.

Two actor modes share one architecture: the Bayes actor sees the full belief
(mean and std) next to the state, the Thompson actor sees a single latent
vector (the true one at training time, a fresh posterior sample per step at
test time).  Actions are sampled from a diagonal Gaussian with a learned,
state-independent log-std; log-probabilities are taken before clipping to the
action bounds so the density stays well defined.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import neural as nn
from .envs import EnvSpec
from .latent import GaussianBelief

LOG_STD_MIN = -5.0
LOG_STD_MAX = 2.0
_LOG_2PI = math.log(2.0 * math.pi)

MODE_BAYES = "bayes"
MODE_THOMPSON = "thompson"


@dataclass(frozen=True)
class PpoConfig:
    lr: float = 5e-5
    clip: float = 0.1
    epochs: int = 4
    minibatches: int = 8
    entropy_coef: float = 0.0
    value_coef: float = 0.5
    gamma: float = 0.99
    gae_lambda: float = 0.95
    max_grad_norm: float = 0.5
    batch_size: int = 1280

    def __post_init__(self):
        if self.clip <= 0:
            raise ValueError("clip must be > 0")
        if not 0.0 < self.gamma <= 1.0:
            raise ValueError("gamma must be in (0, 1]")


class PolicyBundle:
    """Actor + critic over [state, context] inputs, in one parameter store.

    The networks act in a normalized action space: the Gaussian the actor
    defines over raw actions has mean = mid + half * mean_net and
    std = half * exp(log_std), with (mid, half) from the action bounds.  The
    affine map is a constant-Jacobian reparameterization, so likelihood ratios
    and gradients are the same as acting in raw units, but head weights stay
    O(1) regardless of the action range.
    """

    def __init__(self, env_spec: EnvSpec, mode: str, rng: np.random.Generator,
                 hidden_dim: int = 16, init_log_std: float = 0.0,
                 init_action_bias: float = 0.0, dtype=np.float32):
        if mode not in (MODE_BAYES, MODE_THOMPSON):
            raise ValueError(f"unknown policy mode {mode!r}")
        self.env_spec = env_spec
        self.mode = mode
        self.hidden_dim = hidden_dim
        d = env_spec.latent_dim
        self.context_dim = 2 * d if mode == MODE_BAYES else d
        self.input_dim = env_spec.state_dim + self.context_dim
        a = env_spec.action_dim
        self.action_mid = (env_spec.action_hi + env_spec.action_lo) / 2.0
        self.action_half = (env_spec.action_hi - env_spec.action_lo) / 2.0
        self.store = nn.ParamStore(dtype)
        s = self.store
        self.actor_fc1 = nn.Dense(s, "actor.fc1", self.input_dim, hidden_dim, rng, activation="tanh")
        self.actor_fc2 = nn.Dense(s, "actor.fc2", hidden_dim, hidden_dim, rng, activation="tanh")
        self.actor_mean = nn.Dense(s, "actor.mean", hidden_dim, a, rng, w_scale=0.01)
        self.actor_mean.b.data[...] = init_action_bias
        init = float(np.clip(init_log_std, LOG_STD_MIN, LOG_STD_MAX))
        self.log_std = s.add("actor.log_std", np.full(a, init))
        self.critic_fc1 = nn.Dense(s, "critic.fc1", self.input_dim, hidden_dim, rng, activation="tanh")
        self.critic_fc2 = nn.Dense(s, "critic.fc2", hidden_dim, hidden_dim, rng, activation="tanh")
        self.critic_value = nn.Dense(s, "critic.value", hidden_dim, 1, rng)

    @classmethod
    def from_arrays(cls, env_spec: EnvSpec, arrays: dict[str, np.ndarray],
                    rng: np.random.Generator | None = None) -> "PolicyBundle":
        """Rebuild a bundle matching a checkpoint; the mode is read off the input width."""
        try:
            fc1 = arrays["actor.fc1.w"]
        except KeyError as exc:
            raise nn.CheckpointError(f"policy checkpoint missing tensor: {exc}") from exc
        in_dim, hidden = fc1.shape
        d = env_spec.latent_dim
        if in_dim == env_spec.state_dim + 2 * d:
            mode = MODE_BAYES
        elif in_dim == env_spec.state_dim + d:
            mode = MODE_THOMPSON
        else:
            raise nn.CheckpointError(
                f"policy input dim {in_dim} fits neither mode for this environment "
                f"(state {env_spec.state_dim}, latent {d})")
        bundle = cls(env_spec, mode, rng or np.random.default_rng(0), hidden_dim=hidden)
        bundle.store.load_arrays(arrays)
        return bundle

    # --- forward passes ------------------------------------------------

    def actor_forward(self, x: nn.Tensor) -> tuple[nn.Tensor, nn.Tensor]:
        mean = self.actor_mean(self.actor_fc2(self.actor_fc1(x)))
        return mean, self.log_std

    def critic_forward(self, x: nn.Tensor) -> nn.Tensor:
        return self.critic_value(self.critic_fc2(self.critic_fc1(x)))

    def build_input(self, state, context) -> np.ndarray:
        s = self.env_spec.scale_obs(np.asarray(state, dtype=np.float64))
        x = np.concatenate([s, np.asarray(context, dtype=np.float64)])
        return x.astype(self.store.dtype)

    def to_raw_action(self, net_action: np.ndarray) -> np.ndarray:
        return self.action_mid + self.action_half * net_action

    @property
    def log_prob_jacobian(self) -> float:
        """Additive correction from normalized-space to raw-space log density."""
        return -float(self.env_spec.action_dim * np.log(self.action_half))

    def act_batch(self, inputs: np.ndarray, rng: np.random.Generator):
        """Sample actions for a (B, input_dim) batch.

        Returns (normalized-space samples, env-clipped raw actions,
        normalized-space log-probs, values).  The normalized quantities are
        what PPO consumes; raw-space densities differ by `log_prob_jacobian`.
        """
        with nn.no_grad():
            mean, log_std = self.actor_forward(nn.Tensor(inputs))
            value = self.critic_forward(nn.Tensor(inputs))
        mean = mean.data.astype(np.float64)
        std = np.exp(log_std.data.astype(np.float64))
        net_sample = mean + std * rng.standard_normal(mean.shape)
        logp_net = gaussian_log_prob(net_sample, mean, std)
        clipped = np.clip(self.to_raw_action(net_sample),
                          self.env_spec.action_lo, self.env_spec.action_hi)
        return net_sample, clipped, logp_net, value.data[:, 0].astype(np.float64)


@dataclass
class ActResult:
    action: np.ndarray  # clipped to the action bounds, what the env executes
    raw_action: np.ndarray  # pre-clip sample, what the density refers to
    log_prob: float
    value: float
    context: np.ndarray  # actor context vector actually used
    latent_sample: np.ndarray | None = None  # Thompson draw, if any


def gaussian_log_prob(x: np.ndarray, mean: np.ndarray, std: np.ndarray) -> np.ndarray:
    z = (x - mean) / std
    return np.sum(-0.5 * z**2 - np.log(std) - 0.5 * _LOG_2PI, axis=-1)


def act_bayes(bundle: PolicyBundle, state, belief: GaussianBelief,
              rng: np.random.Generator) -> ActResult:
    if bundle.mode != MODE_BAYES:
        raise ValueError("bundle is not in bayes mode")
    ctx = belief.as_features()
    x = bundle.build_input(state, ctx)
    net, clipped, logp, value = bundle.act_batch(x.reshape(1, -1), rng)
    return ActResult(action=clipped[0], raw_action=bundle.to_raw_action(net[0]),
                     log_prob=float(logp[0]) + bundle.log_prob_jacobian,
                     value=float(value[0]), context=ctx)


def act_thompson(bundle: PolicyBundle, state, belief: GaussianBelief,
                 rng: np.random.Generator, latent: np.ndarray | None = None) -> ActResult:
    """Act on a latent sampled fresh from the belief (or on `latent` when given,
    e.g. the true task parameters during multi-task training)."""
    if bundle.mode != MODE_THOMPSON:
        raise ValueError("bundle is not in thompson mode")
    omega = rng.normal(belief.mean, belief.std) if latent is None else np.asarray(latent, dtype=np.float64)
    x = bundle.build_input(state, omega)
    net, clipped, logp, value = bundle.act_batch(x.reshape(1, -1), rng)
    return ActResult(action=clipped[0], raw_action=bundle.to_raw_action(net[0]),
                     log_prob=float(logp[0]) + bundle.log_prob_jacobian,
                     value=float(value[0]), context=omega, latent_sample=omega)


def compute_gae(rewards: np.ndarray, values: np.ndarray, dones: np.ndarray,
                gamma: float, gae_lambda: float, last_value: float = 0.0):
    """Generalized advantage estimation over a flat buffer of whole episodes.

    `dones[t]` marks the last step of an episode, which resets the recursion;
    `last_value` bootstraps only a trailing unfinished episode.
    Returns (advantages, returns) with returns = advantages + values.
    """
    n = len(rewards)
    adv = np.zeros(n, dtype=np.float64)
    gae = 0.0
    next_value = last_value
    for t in range(n - 1, -1, -1):
        if dones[t]:
            next_value = 0.0
            gae = 0.0
        delta = rewards[t] + gamma * next_value - values[t]
        gae = delta + gamma * gae_lambda * gae
        adv[t] = gae
        next_value = values[t]
    return adv, adv + values


@dataclass
class RolloutBuffer:
    """Flat on-policy buffer; episodes are concatenated in worker-index order."""

    inputs: np.ndarray  # (N, input_dim) actor/critic inputs as seen at act time
    actions: np.ndarray  # (N, action_dim) pre-clip samples, normalized action space
    log_probs: np.ndarray  # (N,) normalized-space log densities
    rewards: np.ndarray  # (N,) training-scaled rewards
    values: np.ndarray  # (N,)
    dones: np.ndarray  # (N,) bool, last step of each episode
    advantages: np.ndarray = field(default=None)
    returns: np.ndarray = field(default=None)

    def __len__(self) -> int:
        return len(self.rewards)

    def finalize(self, gamma: float, gae_lambda: float) -> None:
        self.advantages, self.returns = compute_gae(
            self.rewards, self.values, self.dones, gamma, gae_lambda)


def normalized_advantages(adv: np.ndarray) -> np.ndarray:
    a = np.asarray(adv, dtype=np.float64)
    centered = a - a.mean()
    s = a.std()
    return centered if s < 1e-12 else centered / s


def ppo_update(bundle: PolicyBundle, buffer: RolloutBuffer, cfg: PpoConfig,
               optimizer: nn.Adam, rng: np.random.Generator) -> dict:
    """Clipped-surrogate update with entropy bonus and value regression."""
    n = len(buffer)
    if n < cfg.batch_size:
        raise ValueError(f"buffer holds {n} steps, fewer than batch size {cfg.batch_size}")
    if buffer.advantages is None:
        buffer.finalize(cfg.gamma, cfg.gae_lambda)
    adv = normalized_advantages(buffer.advantages)
    dtype = bundle.store.dtype
    inputs = buffer.inputs.astype(dtype)
    actions = buffer.actions.astype(dtype)
    old_logp = buffer.log_probs.astype(dtype)
    returns = buffer.returns.astype(dtype)
    adv = adv.astype(dtype)

    stats = {"policy_loss": 0.0, "value_loss": 0.0, "entropy": 0.0, "clip_fraction": 0.0}
    updates = 0
    for _ in range(cfg.epochs):
        perm = rng.permutation(n)
        for chunk in np.array_split(perm, cfg.minibatches):
            if len(chunk) == 0:
                continue
            x = nn.Tensor(inputs[chunk])
            mean, log_std = bundle.actor_forward(x)
            a = nn.Tensor(actions[chunk])
            z = (a - mean) * nn.exp(-log_std)
            logp = nn.tsum(nn.square(z) * -0.5 - log_std - 0.5 * _LOG_2PI, axis=1)
            ratio = nn.exp(logp - nn.Tensor(old_logp[chunk]))
            adv_t = nn.Tensor(adv[chunk])
            surrogate = nn.minimum(ratio * adv_t, nn.clip(ratio, 1.0 - cfg.clip, 1.0 + cfg.clip) * adv_t)
            entropy = nn.tsum(log_std + 0.5 * (_LOG_2PI + 1.0))
            policy_loss = -nn.tmean(surrogate) - cfg.entropy_coef * entropy
            value = bundle.critic_forward(x)
            verr = value - nn.Tensor(returns[chunk].reshape(-1, 1))
            value_loss = nn.tmean(nn.square(verr))
            loss = policy_loss + cfg.value_coef * value_loss

            bundle.store.zero_grad()
            nn.backward(loss)
            grads = bundle.store.grads()
            nn.clip_global_norm(grads, cfg.max_grad_norm)
            optimizer.step(grads)
            bundle.log_std.data[...] = np.clip(bundle.log_std.data, LOG_STD_MIN, LOG_STD_MAX)

            stats["policy_loss"] += float(policy_loss.data)
            stats["value_loss"] += float(value_loss.data)
            stats["entropy"] += float(entropy.data)
            stats["clip_fraction"] += float(np.mean(np.abs(ratio.data - 1.0) > cfg.clip))
            updates += 1
    for key in stats:
        stats[key] /= max(updates, 1)
    return stats
