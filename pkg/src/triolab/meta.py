"""Meta-training and meta-testing of the full agent.

Training iterates: sample prior parameters from the hyperprior, sample task
latents from those priors, roll out the policy (conditioned on the live
posterior in bayes mode, on the true latent in thompson mode), then update the
policy with PPO on on-prior data and the inference network on everything.
Optionally each on-prior episode is paired with an off-prior episode on the
same task but a freshly drawn wrong prior, which robustifies inference against
the imperfect priors seen at test time.

Testing walks a latent drift sequence: before each task the agent receives a
prior (GP one-step-ahead prediction, the true sampling distribution for the
oracle, or a fixed wide Gaussian), interacts for a fixed number of episodes
with per-step posterior refinement, and feeds the final posterior mean to the
per-dimension GP tracker.
"""

from __future__ import annotations

import os
from dataclasses import dataclass, field

import numpy as np

from . import neural as nn
from .envs import BatchedEnv, Env, EnvSpec
from .inference import (
    InferenceEpisode,
    InferenceNetwork,
    condition_prior,
    hyperprior_std_band,
    train_inference,
)
from .latent import (
    GaussianBelief,
    HyperpriorSpec,
    normalize_from_task,
    rescale_to_task,
    sample_latent,
    sample_prior,
)
from .policy import (
    MODE_BAYES,
    MODE_THOMPSON,
    ActResult,
    PolicyBundle,
    PpoConfig,
    RolloutBuffer,
    act_bayes,
    act_thompson,
    ppo_update,
)
from .seeding import stream
from .sequences import SequenceSpec, get_sequence, sample_test_task, sequence_mean_normalized
from .tracking import GpSearchConfig, LatentTracker

PRIOR_GP = "gp"
PRIOR_ORACLE = "oracle"
PRIOR_UNINFORMATIVE = "uninformative"

POLICY_CHECKPOINT = "policy.trio"
INFERENCE_CHECKPOINT = "inference.trio"


class DivergenceError(RuntimeError):
    """Training hit a non-finite loss; carries the last finite parameters."""

    def __init__(self, message, policy_arrays, inference_arrays, iteration):
        super().__init__(message)
        self.policy_arrays = policy_arrays
        self.inference_arrays = inference_arrays
        self.iteration = iteration


def default_hyperprior(family: str) -> HyperpriorSpec:
    if family == "minigolf":
        return HyperpriorSpec(mean_lo=[-1.0], mean_hi=[1.0], var_lo=[0.01], var_hi=[0.2])
    if family == "velocity1d":
        return HyperpriorSpec(mean_lo=[-1.0], mean_hi=[1.0], var_lo=[0.01], var_hi=[0.3])
    if family == "goalreacher2d":
        return HyperpriorSpec(mean_lo=[-1.0, -1.0], mean_hi=[1.0, 1.0],
                              var_lo=[0.1, 0.1], var_hi=[0.4, 0.4])
    raise KeyError(f"unknown task family {family!r}")


@dataclass
class TrainConfig:
    env: EnvSpec
    hyperprior: HyperpriorSpec
    mode: str = MODE_BAYES
    iterations: int = 500
    inference_warmup: int = 0
    # episodes per sampled task during collection; 1 keeps every loss prior a
    # hyperprior sample, which the KL anchor assumes
    train_episodes_per_task: int = 1
    ppo: PpoConfig = field(default_factory=PpoConfig)
    inference_lr: float = 1e-3
    inference_epochs: int = 4
    kl_weight: float = 1.0
    off_prior: bool = True
    parallel_envs: int = 64
    policy_hidden: int = 16
    init_log_std: float = 0.0
    init_action_bias: float = 0.0
    inference_hidden: int = 64
    inference_encoder: int = 64
    seed: int = 0

    def __post_init__(self):
        if self.iterations < 0 or self.parallel_envs < 1:
            raise ValueError("iterations must be >= 0 and parallel_envs >= 1")
        if self.kl_weight < 0:
            raise ValueError("kl_weight must be >= 0")
        if self.hyperprior.dim != self.env.latent_dim:
            raise ValueError("hyperprior dimension does not match the environment")


@dataclass
class ModelSet:
    bundle: PolicyBundle
    net: InferenceNetwork

    def save(self, out_dir: str) -> tuple[str, str]:
        os.makedirs(out_dir, exist_ok=True)
        policy_path = os.path.join(out_dir, POLICY_CHECKPOINT)
        inference_path = os.path.join(out_dir, INFERENCE_CHECKPOINT)
        nn.save_checkpoint(policy_path, self.bundle.store.arrays())
        nn.save_checkpoint(inference_path, self.net.store.arrays())
        return policy_path, inference_path

    @classmethod
    def load(cls, models_dir: str, env_spec: EnvSpec) -> "ModelSet":
        policy = nn.load_checkpoint(os.path.join(models_dir, POLICY_CHECKPOINT))
        inference = nn.load_checkpoint(os.path.join(models_dir, INFERENCE_CHECKPOINT))
        return cls(bundle=PolicyBundle.from_arrays(env_spec, policy),
                   net=InferenceNetwork.from_arrays(env_spec, inference))


@dataclass
class TrainResult:
    models: ModelSet
    log: list[dict]
    diverged: bool = False


def _task_units(omega_norm: np.ndarray, spec: EnvSpec) -> tuple[np.ndarray, np.ndarray]:
    """Map a normalized latent to task units; minigolf friction is floored at
    the range minimum because non-positive friction has no physics."""
    task = rescale_to_task(omega_norm, spec.latent_range)
    if spec.family == "minigolf":
        task = np.maximum(task, spec.latent_range.lo)
        omega_norm = normalize_from_task(task, spec.latent_range)
    return task, omega_norm


class _SlotState:
    """Per-slot accumulators for the batched collector."""

    def __init__(self):
        self.omega = None
        self.task_units = None
        self.episode_idx = 0
        self.begin_episode(None)

    def new_task(self, prior: GaussianBelief | None, omega, task_units):
        self.omega = omega
        self.task_units = task_units
        self.episode_idx = 0
        self.begin_episode(prior)

    def begin_episode(self, prior: GaussianBelief | None):
        self.prior = prior
        self.inputs = []
        self.actions = []
        self.log_probs = []
        self.rewards_scaled = []
        self.rewards_raw = []
        self.values = []
        self.features = []


def _collect(bundle: PolicyBundle, net: InferenceNetwork, benv: BatchedEnv,
             hyperprior: HyperpriorSpec, rngs: dict, *, min_steps: int | None,
             omega_queue: list[np.ndarray] | None = None,
             episodes_per_task: int = 1):
    """Roll complete tasks until `min_steps` env steps (or queue exhaustion).

    A task is `episodes_per_task` episodes on one latent: the hidden state
    resets per episode while the belief at the end of an episode becomes the
    prior of the next.  With `omega_queue` given, slots replay those task
    latents under freshly drawn (wrong) priors instead of sampling new tasks:
    the off-prior pass.
    Returns (inference episodes, rollout segments, raw episode returns).
    """
    spec = benv.spec
    b = benv.batch
    d = spec.latent_dim
    bayes = bundle.mode == MODE_BAYES
    # thompson actors ignore beliefs, but episode chaining still needs them
    track_beliefs = bayes or episodes_per_task > 1
    slots = [_SlotState() for _ in range(b)]
    hidden = np.zeros((b, net.hidden_dim), dtype=net.store.dtype)
    belief_mean = np.zeros((b, d))
    belief_std = np.ones((b, d))
    prior_feats = np.zeros((b, 2 * d))
    active = np.zeros(b, dtype=bool)
    queue_pos = 0
    total_steps = 0
    episodes: list[tuple[int, int, InferenceEpisode, dict]] = []
    tasks_done: list[tuple[int, int, np.ndarray]] = []
    per_slot_count = [0] * b

    def set_prior(i: int, prior: GaussianBelief) -> None:
        hidden[i] = 0.0
        belief_mean[i] = prior.mean
        belief_std[i] = prior.std
        prior_feats[i] = prior.as_features()

    def start_task(i: int) -> bool:
        nonlocal queue_pos
        prior = sample_prior(hyperprior, rngs["hyperprior"])
        if omega_queue is not None:
            if queue_pos >= len(omega_queue):
                return False
            omega = omega_queue[queue_pos]
            queue_pos += 1
        else:
            omega = sample_latent(prior, rngs["task"])
        task, omega = _task_units(omega, spec)
        benv.reset_slots(np.array([i]), task.reshape(1, -1))
        slots[i].new_task(prior, omega, task.reshape(1, -1))
        set_prior(i, prior)
        return True

    for i in range(b):
        active[i] = start_task(i)

    while active.any():
        states = benv.state.copy()
        scaled_states = spec.scale_obs(states)
        if bayes:
            ctx = np.concatenate([belief_mean, belief_std], axis=1)
        else:
            ctx = np.stack([s.omega if s.omega is not None else np.zeros(d) for s in slots])
        inputs = np.concatenate([scaled_states, ctx], axis=1).astype(bundle.store.dtype)
        net_actions, clipped, logp, values = bundle.act_batch(inputs, rngs["policy"])
        next_states, rewards, dones = benv.step(clipped)
        feats = np.concatenate(
            [scaled_states, spec.scale_action(clipped), rewards[:, None] / spec.reward_scale, prior_feats],
            axis=1).astype(net.store.dtype)
        if track_beliefs:
            hidden, means, stds = net.step_batch(hidden, feats)
            belief_mean[:] = means
            belief_std[:] = stds
        for i in np.flatnonzero(active):
            s = slots[i]
            s.inputs.append(inputs[i])
            s.actions.append(net_actions[i])
            s.log_probs.append(logp[i])
            s.rewards_scaled.append(rewards[i] / spec.reward_scale)
            s.rewards_raw.append(rewards[i])
            s.values.append(values[i])
            s.features.append(feats[i])
            if dones[i]:
                total_steps += len(s.rewards_raw)
                segment = {
                    "inputs": np.stack(s.inputs),
                    "actions": np.stack(s.actions),
                    "log_probs": np.array(s.log_probs),
                    "rewards": np.array(s.rewards_scaled),
                    "values": np.array(s.values),
                    "return_raw": float(np.sum(s.rewards_raw)),
                }
                ep = InferenceEpisode(features=np.stack(s.features), omega=s.omega,
                                      prior=s.prior, on_prior=omega_queue is None)
                episodes.append((i, per_slot_count[i], ep, segment))
                per_slot_count[i] += 1
                if s.episode_idx + 1 < episodes_per_task:
                    # same task: evidence carries over as the next episode's prior
                    chained = condition_prior(
                        GaussianBelief(mean=belief_mean[i].copy(), std=belief_std[i].copy()),
                        *hyperprior_std_band(hyperprior))
                    benv.reset_slots(np.array([i]), s.task_units)
                    s.episode_idx += 1
                    s.begin_episode(chained)
                    set_prior(i, chained)
                else:
                    tasks_done.append((i, per_slot_count[i], s.omega))
                    keep_going = omega_queue is not None or total_steps < min_steps
                    active[i] = start_task(i) if keep_going else False

    episodes.sort(key=lambda item: (item[0], item[1]))
    tasks_done.sort(key=lambda item: (item[0], item[1]))
    inf_episodes = [item[2] for item in episodes]
    segments = [item[3] for item in episodes]
    returns = [seg["return_raw"] for seg in segments]
    task_omegas = [item[2] for item in tasks_done]
    return inf_episodes, segments, returns, task_omegas


def _segments_to_buffer(segments: list[dict]) -> RolloutBuffer:
    dones = []
    for seg in segments:
        flags = np.zeros(len(seg["rewards"]), dtype=bool)
        flags[-1] = True
        dones.append(flags)
    return RolloutBuffer(
        inputs=np.concatenate([s["inputs"] for s in segments]),
        actions=np.concatenate([s["actions"] for s in segments]),
        log_probs=np.concatenate([s["log_probs"] for s in segments]),
        rewards=np.concatenate([s["rewards"] for s in segments]),
        values=np.concatenate([s["values"] for s in segments]),
        dones=np.concatenate(dones),
    )


def meta_train(cfg: TrainConfig) -> TrainResult:
    """Full training loop; returns trained models plus a per-iteration log."""
    rngs = {name: stream(cfg.seed, name) for name in ("env", "task", "policy", "hyperprior")}
    # The off-prior pass draws from its own substreams so enabling it leaves
    # the on-prior data, and hence the PPO update, bit-identical.
    off_rngs = {name: stream(cfg.seed, name, index=1) for name in ("env", "task", "policy", "hyperprior")}
    bundle = PolicyBundle(cfg.env, cfg.mode, stream(cfg.seed, "policy_init"),
                          hidden_dim=cfg.policy_hidden, init_log_std=cfg.init_log_std,
                          init_action_bias=cfg.init_action_bias)
    net = InferenceNetwork(cfg.env, stream(cfg.seed, "inference_init"),
                           hidden_dim=cfg.inference_hidden, encoder_dim=cfg.inference_encoder)
    benv = BatchedEnv(cfg.env, cfg.parallel_envs, rngs["env"])
    off_benv = BatchedEnv(cfg.env, cfg.parallel_envs, off_rngs["env"])
    opt_policy = nn.Adam(bundle.store, cfg.ppo.lr)
    opt_inference = nn.Adam(net.store, cfg.inference_lr)
    models = ModelSet(bundle=bundle, net=net)
    log: list[dict] = []
    last_good = (bundle.store.snapshot(), net.store.snapshot())

    # Warm-up: the inference network trains on rollouts of the untouched
    # initial policy, so once policy optimization starts its belief inputs are
    # already informative.
    for iteration in range(-cfg.inference_warmup, cfg.iterations):
        warmup = iteration < 0
        try:
            on_eps, segments, returns, task_omegas = _collect(
                bundle, net, benv, cfg.hyperprior, rngs, min_steps=cfg.ppo.batch_size,
                episodes_per_task=cfg.train_episodes_per_task)
            all_eps = on_eps
            if cfg.off_prior:
                off_eps, _, _, _ = _collect(
                    bundle, net, off_benv, cfg.hyperprior, off_rngs, min_steps=None,
                    omega_queue=task_omegas, episodes_per_task=cfg.train_episodes_per_task)
                all_eps = on_eps + off_eps
            if warmup:
                ppo_stats = {"policy_loss": 0.0, "value_loss": 0.0, "entropy": 0.0,
                             "clip_fraction": 0.0}
            else:
                buffer = _segments_to_buffer(segments)
                buffer.finalize(cfg.ppo.gamma, cfg.ppo.gae_lambda)
                ppo_stats = ppo_update(bundle, buffer, cfg.ppo, opt_policy, rngs["policy"])
            for _ in range(cfg.inference_epochs):
                inf_stats = train_inference(net, all_eps, opt_inference, cfg.kl_weight,
                                            cfg.ppo.max_grad_norm)
        except nn.NonFiniteLossError as exc:
            raise DivergenceError(str(exc), last_good[0], last_good[1], iteration) from exc
        last_good = (bundle.store.snapshot(), net.store.snapshot())
        log.append({
            "iteration": iteration,
            "mean_return": float(np.mean(returns)),
            "episodes": len(returns),
            "steps": sum(len(s["rewards"]) for s in segments),
            "elbo": inf_stats["loss"],
            "inference_mse": inf_stats["mse"],
            "inference_trace": inf_stats["trace"],
            "inference_kl": inf_stats["kl"],
            "policy_loss": ppo_stats["policy_loss"],
            "value_loss": ppo_stats["value_loss"],
            "entropy": ppo_stats["entropy"],
            "clip_fraction": ppo_stats["clip_fraction"],
        })
    return TrainResult(models=models, log=log)


# --- Meta-testing ------------------------------------------------------------

@dataclass
class TaskRecord:
    task: int
    true_latent: np.ndarray  # normalized units, as actually instantiated
    prior: GaussianBelief  # prior handed to the agent before the task
    posterior: GaussianBelief  # final belief after the task's last episode
    episode_returns: list[float]
    episode_steps: list[int]


@dataclass
class TestRunRecord:
    __test__ = False  # not a pytest class, despite the name

    sequence: str
    policy_mode: str
    prior_source: str
    seed: int
    tasks: list[TaskRecord]

    @property
    def tracked(self) -> bool:
        return self.prior_source == PRIOR_GP

    def task_returns(self, agg: str = "mean") -> np.ndarray:
        if agg == "mean":
            return np.array([float(np.mean(t.episode_returns)) for t in self.tasks])
        if agg == "sum":
            return np.array([float(np.sum(t.episode_returns)) for t in self.tasks])
        raise ValueError(f"unknown aggregation {agg!r}")


def _run_episode(models: ModelSet, env: Env, prior: GaussianBelief,
                 rng_policy: np.random.Generator) -> tuple[float, int, GaussianBelief]:
    """One episode with per-step posterior refinement; returns (raw return,
    steps, final belief).  The caller conditions the prior."""
    bundle, net = models.bundle, models.net
    hidden, belief = net.posterior_init(prior)
    state = env.reset()
    total = 0.0
    steps = 0
    done = False
    while not done:
        if bundle.mode == MODE_BAYES:
            act: ActResult = act_bayes(bundle, state, belief, rng_policy)
        else:
            act = act_thompson(bundle, state, belief, rng_policy)
        next_state, reward, done = env.step(act.action)
        feats = net.features(state, act.action, reward, prior)
        hidden, belief = net.posterior_step_features(hidden, feats, prior)
        total += reward
        steps += 1
        state = next_state
    return total, steps, belief


def meta_test(models: ModelSet, seq: SequenceSpec | str, n_tasks: int, seed: int,
              prior_source: str = PRIOR_GP, gp_cfg: GpSearchConfig = GpSearchConfig(),
              env_spec: EnvSpec | None = None) -> TestRunRecord:
    """Walk `n_tasks` tasks of the sequence with the chosen prior source."""
    if isinstance(seq, str):
        seq = get_sequence(seq)
    if n_tasks < 1:
        raise ValueError("need at least one task")
    if prior_source not in (PRIOR_GP, PRIOR_ORACLE, PRIOR_UNINFORMATIVE):
        raise ValueError(f"unknown prior source {prior_source!r}")
    spec = env_spec or seq.env_spec()
    if spec.family != seq.family:
        raise ValueError(f"sequence {seq.name} needs family {seq.family}, got {spec.family}")
    if models.bundle.env_spec.state_dim != spec.state_dim or models.net.env_spec.state_dim != spec.state_dim:
        raise ValueError("model checkpoints do not match the environment dimensions")
    d = spec.latent_dim

    tracker = LatentTracker(d, stream(seed, "gp"), gp_cfg)
    band = hyperprior_std_band(default_hyperprior(spec.family))

    def source_prior(t: int) -> GaussianBelief:
        if prior_source == PRIOR_ORACLE:
            return GaussianBelief(mean=sequence_mean_normalized(seq, t),
                                  std=np.full(d, np.sqrt(seq.noise_var)))
        return GaussianBelief(mean=np.zeros(d), std=np.ones(d))

    prior = seq.initial_prior if prior_source == PRIOR_GP else source_prior(0)
    records: list[TaskRecord] = []
    for t in range(n_tasks):
        # per-task substreams: runs that differ only in their prior source
        # face identical task draws and environment noise at every index
        rng_task = stream(seed, "task", index=t)
        rng_env = stream(seed, "env", index=t)
        rng_policy = stream(seed, "policy", index=t)
        omega_norm = sample_test_task(seq, t, rng_task)
        task_units, omega_norm = _task_units(omega_norm, spec)
        env = Env(spec, task_units, rng_env)
        # the networks see priors with stds inside their training band;
        # the record keeps the raw prior
        episode_prior = condition_prior(prior, *band)
        ep_returns: list[float] = []
        ep_steps: list[int] = []
        belief = episode_prior
        for _ in range(spec.episodes_per_task):
            ret, steps, belief = _run_episode(models, env, episode_prior, rng_policy)
            ep_returns.append(ret)
            ep_steps.append(steps)
            episode_prior = condition_prior(belief, *band)  # evidence accumulates across episodes
        records.append(TaskRecord(task=t, true_latent=omega_norm, prior=prior,
                                  posterior=belief, episode_returns=ep_returns,
                                  episode_steps=ep_steps))
        if prior_source == PRIOR_GP:
            if t + 1 < n_tasks:
                prior = tracker.step(belief.mean)
        else:
            prior = source_prior(t + 1)
    return TestRunRecord(sequence=seq.name, policy_mode=models.bundle.mode,
                         prior_source=prior_source, seed=seed, tasks=records)


def run_oracle(models: ModelSet, seq, n_tasks: int, seed: int, **kwargs) -> TestRunRecord:
    """Agent given the true task-sampling distribution as prior before every task."""
    return meta_test(models, seq, n_tasks, seed, prior_source=PRIOR_ORACLE, **kwargs)


def run_uninformative(models: ModelSet, seq, n_tasks: int, seed: int, **kwargs) -> TestRunRecord:
    """Ablation: a fixed zero-mean unit-std prior for every task."""
    return meta_test(models, seq, n_tasks, seed, prior_source=PRIOR_UNINFORMATIVE, **kwargs)


@dataclass
class RegretCurve:
    oracle_returns: np.ndarray
    agent_returns: np.ndarray
    per_task: np.ndarray
    cumulative: np.ndarray


def regret(agent: TestRunRecord, oracle: TestRunRecord, task_agg: str = "mean") -> RegretCurve:
    """Cumulative return gap to the oracle, task by task."""
    r_agent = agent.task_returns(task_agg)
    r_oracle = oracle.task_returns(task_agg)
    if len(r_agent) != len(r_oracle):
        raise ValueError(f"task count mismatch: agent {len(r_agent)}, oracle {len(r_oracle)}")
    per_task = r_oracle - r_agent
    return RegretCurve(oracle_returns=r_oracle, agent_returns=r_agent,
                       per_task=per_task, cumulative=np.cumsum(per_task))
