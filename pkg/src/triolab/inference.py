"""Variational task inference: recurrent posterior over latent task parameters.

The network consumes one transition per step, encoded together with the prior
it was collected under, and emits a diagonal-Gaussian belief after every step.
Training minimizes, per trajectory, the mean over steps of

    ||posterior mean - true latent||^2 + sum(posterior variance)
        + (kl_weight / H) * KL(posterior || prior)

which combines a squared-error likelihood surrogate, a pressure toward
confident predictions, and a prior-anchoring term whose weight shrinks with
the trajectory length H.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import neural as nn
from .envs import EnvSpec, Transition
from .latent import GaussianBelief

PREFIX = "inference."

# Priors handed to the networks at test time (GP predictions, chained
# posteriors, the oracle's narrow sampling distribution, the wide ablation
# prior) can sit outside the std range the hyperprior spans in training.
# Their std is conditioned into the trained band; recorded priors stay
# untouched.
PRIOR_STD_MIN = 0.1
PRIOR_STD_MAX = 1.0


def condition_prior(belief: GaussianBelief, lo=PRIOR_STD_MIN, hi=PRIOR_STD_MAX) -> GaussianBelief:
    """Clip the belief's std into [lo, hi] (scalars or per-dimension vectors)."""
    std = np.clip(belief.std, lo, hi)
    if np.array_equal(std, belief.std):
        return belief
    return GaussianBelief(mean=belief.mean, std=std)


def hyperprior_std_band(hp) -> tuple[np.ndarray, np.ndarray]:
    """Per-dimension std range a hyperprior can produce."""
    return np.sqrt(hp.var_lo), np.sqrt(hp.var_hi)


@dataclass
class InferenceEpisode:
    """One trajectory prepared for inference training."""

    features: np.ndarray  # (H, feature_dim) per-step encoder inputs
    omega: np.ndarray  # (d,) true latent, normalized units
    prior: GaussianBelief
    on_prior: bool = True

    def __post_init__(self):
        if self.features.ndim != 2 or self.features.shape[0] < 1:
            raise ValueError("episode features must be (H, F) with H >= 1")


class InferenceNetwork:
    """Encoder + gated recurrent cell + Gaussian belief heads."""

    def __init__(self, env_spec: EnvSpec, rng: np.random.Generator,
                 hidden_dim: int = 64, encoder_dim: int = 64, dtype=np.float32):
        self.env_spec = env_spec
        self.latent_dim = env_spec.latent_dim
        self.hidden_dim = hidden_dim
        self.feature_dim = env_spec.state_dim + env_spec.action_dim + 1 + 2 * env_spec.latent_dim
        self.store = nn.ParamStore(dtype)
        self.encoder = nn.Dense(self.store, PREFIX + "encoder", self.feature_dim, encoder_dim, rng, activation="tanh")
        self.gru = nn.GruCell(self.store, PREFIX + "gru", encoder_dim, hidden_dim, rng)
        self.head = nn.GaussianHead(self.store, PREFIX + "head", hidden_dim, env_spec.latent_dim, rng)

    @classmethod
    def from_arrays(cls, env_spec: EnvSpec, arrays: dict[str, np.ndarray],
                    rng: np.random.Generator | None = None) -> "InferenceNetwork":
        """Rebuild a network whose dimensions match a checkpoint, then load it."""
        try:
            enc_w = arrays[PREFIX + "encoder.w"]
            gru_w = arrays[PREFIX + "gru.wz"]
        except KeyError as exc:
            raise nn.CheckpointError(f"inference checkpoint missing tensor: {exc}") from exc
        net = cls(env_spec, rng or np.random.default_rng(0),
                  hidden_dim=gru_w.shape[1], encoder_dim=enc_w.shape[1])
        if enc_w.shape[0] != net.feature_dim:
            raise nn.CheckpointError(
                f"inference input dim mismatch: checkpoint {enc_w.shape[0]}, "
                f"environment expects {net.feature_dim}")
        net.store.load_arrays(arrays)
        return net

    def features(self, state, action, reward, prior: GaussianBelief) -> np.ndarray:
        """Scaled per-step encoder input [s, a, r, prior mean, prior std]."""
        spec = self.env_spec
        s = spec.scale_obs(np.asarray(state, dtype=np.float64))
        a = spec.scale_action(np.asarray(action, dtype=np.float64))
        r = np.asarray([reward], dtype=np.float64) / spec.reward_scale
        return np.concatenate([s, a, r, prior.mean, prior.std]).astype(self.store.dtype)

    def step_tensors(self, h: nn.Tensor, x: nn.Tensor) -> tuple[nn.Tensor, nn.Tensor, nn.Tensor]:
        """One recurrent step over a (B, F) feature batch -> (h', mean, std)."""
        h_next = self.gru(self.encoder(x), h)
        mean, std = self.head(h_next)
        return h_next, mean, std

    def posterior_init(self, prior: GaussianBelief) -> tuple[np.ndarray, GaussianBelief]:
        """Before any observation the posterior is the prior; hidden state is zero."""
        if prior.dim != self.latent_dim:
            raise ValueError(f"prior dim {prior.dim} != network latent dim {self.latent_dim}")
        return np.zeros(self.hidden_dim, dtype=self.store.dtype), prior

    def posterior_step(self, h: np.ndarray, transition: Transition,
                       prior: GaussianBelief) -> tuple[np.ndarray, GaussianBelief]:
        x = self.features(transition.state, transition.action, transition.reward, prior)
        return self.posterior_step_features(h, x, prior)

    def posterior_step_features(self, h: np.ndarray, feats: np.ndarray,
                                prior: GaussianBelief) -> tuple[np.ndarray, GaussianBelief]:
        if prior.dim != self.latent_dim:
            raise ValueError(f"prior dim {prior.dim} != network latent dim {self.latent_dim}")
        with nn.no_grad():
            h_next, mean, std = self.step_tensors(
                nn.Tensor(h.reshape(1, -1)), nn.Tensor(feats.reshape(1, -1)))
        if not np.all(np.isfinite(h_next.data)):
            raise nn.NonFiniteLossError("inference hidden state is not finite")
        belief = GaussianBelief(mean=mean.data[0].astype(np.float64),
                                std=std.data[0].astype(np.float64))
        return h_next.data[0], belief

    def step_batch(self, h: np.ndarray, feats: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """no-grad batched rollout step: (B, hidden), (B, F) -> h', means, stds."""
        with nn.no_grad():
            h_next, mean, std = self.step_tensors(nn.Tensor(h), nn.Tensor(feats))
        return h_next.data, mean.data, std.data


def _kl_terms(mean: nn.Tensor, std: nn.Tensor, prior_mean: np.ndarray,
              prior_std: np.ndarray) -> nn.Tensor:
    """Per-row KL(q || prior) for a (B, d) belief batch; returns (B,)."""
    pm = nn.Tensor(prior_mean)
    inv_2var = nn.Tensor(1.0 / (2.0 * prior_std**2))
    log_pstd = nn.Tensor(np.log(prior_std))
    diff = mean - pm
    per_dim = log_pstd - nn.log(std) + (nn.square(std) + nn.square(diff)) * inv_2var - 0.5
    return nn.tsum(per_dim, axis=1)


def elbo_loss(beliefs: list[tuple], omega, prior: GaussianBelief, kl_weight: float, h_len: int) -> float:
    """Reference per-trajectory loss over a list of (mean, std) belief steps."""
    if h_len < 1:
        raise ValueError("trajectory length must be >= 1")
    if not beliefs:
        raise ValueError("need at least one belief step")
    omega = np.asarray(omega, dtype=np.float64)
    total = 0.0
    for mean, std in beliefs:
        mean = np.asarray(mean, dtype=np.float64)
        std = np.asarray(std, dtype=np.float64)
        mse = float(np.sum((mean - omega) ** 2))
        trace = float(np.sum(std**2))
        kl = float(np.sum(np.log(prior.std / std)
                          + (std**2 + (mean - prior.mean) ** 2) / (2.0 * prior.std**2) - 0.5))
        total += mse + trace + (kl_weight / h_len) * kl
    return total / len(beliefs)


def batch_elbo(net: InferenceNetwork, episodes: list[InferenceEpisode],
               kl_weight: float) -> tuple[nn.Tensor, dict]:
    """Differentiable mean trajectory loss over a padded episode batch."""
    if not episodes:
        raise ValueError("empty inference batch")
    b = len(episodes)
    d = net.latent_dim
    lengths = np.array([ep.features.shape[0] for ep in episodes])
    t_max = int(lengths.max())
    dtype = net.store.dtype
    feats = np.zeros((t_max, b, net.feature_dim), dtype=dtype)
    mask = np.zeros((t_max, b), dtype=dtype)
    for i, ep in enumerate(episodes):
        feats[: lengths[i], i] = ep.features
        mask[: lengths[i], i] = 1.0
    omegas = np.stack([ep.omega for ep in episodes]).astype(dtype)
    prior_means = np.stack([ep.prior.mean for ep in episodes]).astype(dtype)
    prior_stds = np.stack([ep.prior.std for ep in episodes]).astype(dtype)
    inv_h = (1.0 / lengths).astype(dtype)
    kl_w = (kl_weight / lengths).astype(dtype)

    omega_t = nn.Tensor(omegas)
    h = net.gru.initial_state(b)
    per_ep_loss = nn.Tensor(np.zeros(b, dtype=dtype))
    mse_acc = trace_acc = kl_acc = 0.0
    for t in range(t_max):
        h, mean, std = net.step_tensors(h, nn.Tensor(feats[t]))
        m = nn.Tensor(mask[t])
        mse = nn.tsum(nn.square(mean - omega_t), axis=1)
        trace = nn.tsum(nn.square(std), axis=1)
        kl = _kl_terms(mean, std, prior_means, prior_stds)
        step_loss = (mse + trace + nn.Tensor(kl_w) * kl) * m
        per_ep_loss = per_ep_loss + step_loss
        mse_acc += float(np.sum(mse.data * mask[t]))
        trace_acc += float(np.sum(trace.data * mask[t]))
        kl_acc += float(np.sum(kl.data * mask[t]))
    loss = nn.tmean(per_ep_loss * nn.Tensor(inv_h))
    n_steps = float(lengths.sum())
    stats = {"mse": mse_acc / n_steps, "trace": trace_acc / n_steps, "kl": kl_acc / n_steps}
    return loss, stats


def train_inference(net: InferenceNetwork, episodes: list[InferenceEpisode],
                    optimizer: nn.Adam, kl_weight: float,
                    max_grad_norm: float = 0.5) -> dict:
    """One gradient step of the trajectory loss over the episode batch."""
    loss, stats = batch_elbo(net, episodes, kl_weight)
    net.store.zero_grad()
    nn.backward(loss)
    grads = net.store.grads()
    nn.clip_global_norm(grads, max_grad_norm)
    optimizer.step(grads)
    stats["loss"] = float(loss.data)
    stats["episodes"] = len(episodes)
    return stats
