"""Analytic task families: Minigolf, a 1-D velocity tracker and a 2-D goal reacher.

Each family is a hidden-parameter MDP: the latent vector (friction, target
velocity, goal position) shapes rewards and dynamics but is never observed.
The step functions are written over numpy arrays so a batch of parallel
episodes advances in one call; the single-episode `Env` classes wrap the same
functions with batch size one.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .latent import LatentRange

GRAVITY = 9.81
HOLE_DIAMETER = 0.10
BALL_RADIUS = 0.02135
PUTTER_LENGTH = 1.0
PUTTER_NOISE_STD = 0.3
GREEN_LENGTH = 20.0

STANDIN_DT = 0.2
VELOCITY_CONTROL_COST = 0.05
VELOCITY_ERROR_LIMIT = 0.5
VELOCITY_ERROR_PENALTY = 10.0
REACHER_CONTROL_COST = 0.01


@dataclass(frozen=True)
class Transition:
    """One environment step."""

    state: np.ndarray
    action: np.ndarray
    reward: float
    next_state: np.ndarray
    done: bool

    def __post_init__(self):
        for name in ("state", "action", "next_state"):
            v = np.asarray(getattr(self, name), dtype=np.float64)
            object.__setattr__(self, name, v)
            if not np.all(np.isfinite(v)):
                raise ValueError(f"transition {name} must be finite")
        if not np.isfinite(self.reward):
            raise ValueError("transition reward must be finite")


@dataclass
class Trajectory:
    """One episode plus the prior it was collected under.

    `true_latent` (normalized units) is populated at training time only.
    """

    transitions: list[Transition]
    prior_used: object
    true_latent: np.ndarray | None = None

    def __post_init__(self):
        if not self.transitions:
            raise ValueError("trajectory must contain at least one transition")
        for tr in self.transitions[:-1]:
            if tr.done:
                raise ValueError("done may be set only on the last transition")

    @property
    def length(self) -> int:
        return len(self.transitions)

    @property
    def total_reward(self) -> float:
        return float(sum(tr.reward for tr in self.transitions))


@dataclass(frozen=True)
class EnvSpec:
    """Static description of one task family."""

    family: str
    latent_dim: int
    latent_range: LatentRange
    state_dim: int
    action_dim: int
    action_lo: float
    action_hi: float
    max_steps: int
    episodes_per_task: int
    distractors: int = 0
    # Fixed input scaling applied before anything network-facing; raw units
    # everywhere else.
    obs_scale: tuple = ()
    reward_scale: float = 1.0

    def __post_init__(self):
        if self.max_steps < 1:
            raise ValueError("max_steps must be >= 1")
        if self.episodes_per_task < 1:
            raise ValueError("episodes_per_task must be >= 1")
        if self.action_lo >= self.action_hi:
            raise ValueError("action bounds must satisfy lo < hi")

    def scale_obs(self, state: np.ndarray) -> np.ndarray:
        return state / np.asarray(self.obs_scale)

    def scale_action(self, action: np.ndarray) -> np.ndarray:
        half = (self.action_hi - self.action_lo) / 2.0
        mid = (self.action_hi + self.action_lo) / 2.0
        return (action - mid) / half


def minigolf_spec(distractors: int = 0, max_steps: int = 20, episodes_per_task: int = 4) -> EnvSpec:
    return EnvSpec(
        family="minigolf",
        latent_dim=1,
        latent_range=LatentRange(lo=[0.01], hi=[2.0]),
        state_dim=1 + distractors,
        action_dim=1,
        action_lo=1e-5,
        action_hi=10.0,
        max_steps=max_steps,
        episodes_per_task=episodes_per_task,
        distractors=distractors,
        obs_scale=(GREEN_LENGTH,) * (1 + distractors),
        reward_scale=100.0,
    )


def velocity1d_spec(max_steps: int = 100, episodes_per_task: int = 1) -> EnvSpec:
    return EnvSpec(
        family="velocity1d",
        latent_dim=1,
        latent_range=LatentRange(lo=[0.0], hi=[1.5]),
        state_dim=2,
        action_dim=1,
        action_lo=-1.0,
        action_hi=1.0,
        max_steps=max_steps,
        episodes_per_task=episodes_per_task,
        obs_scale=(40.0, 2.0),
        reward_scale=10.0,
    )


def goalreacher2d_spec(max_steps: int = 100, episodes_per_task: int = 1) -> EnvSpec:
    return EnvSpec(
        family="goalreacher2d",
        latent_dim=2,
        latent_range=LatentRange(lo=[-3.0, -3.0], hi=[3.0, 3.0]),
        state_dim=4,
        action_dim=2,
        action_lo=-1.0,
        action_hi=1.0,
        max_steps=max_steps,
        episodes_per_task=episodes_per_task,
        obs_scale=(5.0, 5.0, 2.0, 2.0),
        reward_scale=5.0,
    )


_SPEC_FACTORIES = {
    "minigolf": minigolf_spec,
    "velocity1d": velocity1d_spec,
    "goalreacher2d": goalreacher2d_spec,
}


def spec_for_family(family: str, **kwargs) -> EnvSpec:
    if family not in _SPEC_FACTORIES:
        raise KeyError(f"unknown task family {family!r}")
    return _SPEC_FACTORIES[family](**kwargs)


# --- Minigolf physics -------------------------------------------------------

def deceleration(omega):
    """Constant deceleration of the rolling ball for friction omega."""
    return (5.0 / 7.0) * GRAVITY * omega


def shot_speed(action, eps):
    """Initial ball speed for putter action and multiplicative noise draw."""
    s = action * PUTTER_LENGTH * (1.0 + eps)
    return s * PUTTER_LENGTH


def min_speed(omega, x):
    """Slowest initial speed that still reaches the hole from distance x."""
    return np.sqrt(2.0 * deceleration(omega) * x)


def max_speed(omega, x):
    """Fastest initial speed that does not overshoot the hole."""
    vmin2 = 2.0 * deceleration(omega) * x
    return np.sqrt((2.0 * HOLE_DIAMETER - BALL_RADIUS) ** 2 * GRAVITY / (2.0 * BALL_RADIUS) + vmin2)


def minigolf_move(x, action, omega, eps):
    """One putt for a batch of episodes.

    Returns (next distance, reward, holed).  Rewards: 0 in the hole, -100 past
    it, -1 otherwise.  `holed` is True whenever the episode is over (success or
    overshoot); the step limit is applied by the caller.
    """
    a = np.clip(action, 1e-5, 10.0)
    # A putter-noise draw below -1 would give a negative speed; such a putt
    # leaves the ball where it is.
    v0 = np.maximum(shot_speed(a, eps), 0.0)
    vmin = min_speed(omega, x)
    vmax = max_speed(omega, x)
    over = v0 > vmax
    success = (v0 >= vmin) & ~over
    reward = np.where(success, 0.0, np.where(over, -100.0, -1.0))
    x_next = np.where(success | over, 0.0, x - v0**2 / (2.0 * deceleration(omega)))
    return x_next, reward, success | over


def velocity1d_move(pos, vel, action, target):
    """One step of the velocity tracker; returns (pos', vel', reward)."""
    a = np.clip(action, -1.0, 1.0)
    vel_next = vel + a * STANDIN_DT
    pos_next = pos + vel_next * STANDIN_DT
    err = np.abs(vel_next - target)
    reward = -err - VELOCITY_CONTROL_COST * a**2 - VELOCITY_ERROR_PENALTY * (err > VELOCITY_ERROR_LIMIT)
    return pos_next, vel_next, reward


def goalreacher2d_move(pos, vel, action, goal):
    """One step of the point-mass reacher; returns (pos', vel', reward).

    pos/vel: (..., 2) arrays, goal: (..., 2).
    """
    a = np.clip(action, -1.0, 1.0)
    vel_next = vel + a * STANDIN_DT
    pos_next = pos + vel_next * STANDIN_DT
    dist = np.linalg.norm(pos_next - goal, axis=-1)
    reward = -dist - REACHER_CONTROL_COST * np.sum(a**2, axis=-1)
    return pos_next, vel_next, reward


# --- Batched episode mechanics ----------------------------------------------

class BatchedEnv:
    """A batch of independent episodes of one family, stepped in lockstep.

    Latents are task units, one row per episode slot.  Finished slots must be
    re-seeded through `reset_slots` before being stepped again.
    """

    def __init__(self, spec: EnvSpec, batch: int, rng: np.random.Generator):
        self.spec = spec
        self.batch = batch
        self.rng = rng
        self.latent = np.zeros((batch, spec.latent_dim))
        self.state = np.zeros((batch, spec.state_dim))
        self.steps = np.zeros(batch, dtype=np.int64)
        if spec.family == "minigolf" and spec.distractors > 0:
            self._alphas = np.zeros((batch, spec.distractors))

    def reset_slots(self, idx: np.ndarray, latent: np.ndarray) -> None:
        """Start new episodes with the given task-unit latents in slots `idx`."""
        latent = np.atleast_2d(latent)
        if self.spec.family == "minigolf" and np.any(latent <= 0.0):
            raise ValueError("minigolf friction must be strictly positive")
        self.latent[idx] = latent
        self.steps[idx] = 0
        if self.spec.family == "minigolf":
            x0 = self.rng.uniform(0.0, GREEN_LENGTH, size=len(idx))
            self.state[idx, 0] = x0
            m = self.spec.distractors
            if m > 0:
                self._alphas[idx] = self.rng.uniform(0.0, GREEN_LENGTH, size=(len(idx), m))
                noise = self.rng.standard_normal((len(idx), m))
                self.state[idx, 1:] = np.abs(x0[:, None] - self._alphas[idx]) + noise
        else:
            self.state[idx] = 0.0

    def step(self, action: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Advance every slot one step; returns (next_state, reward, done)."""
        spec = self.spec
        b = self.batch
        self.steps += 1
        at_limit = self.steps >= spec.max_steps
        if spec.family == "minigolf":
            eps = self.rng.standard_normal(b) * PUTTER_NOISE_STD
            x_next, reward, terminal = minigolf_move(self.state[:, 0], action[:, 0], self.latent[:, 0], eps)
            next_state = self.state.copy()
            next_state[:, 0] = x_next
            if spec.distractors > 0:
                noise = self.rng.standard_normal((b, spec.distractors))
                next_state[:, 1:] = np.abs(x_next[:, None] - self._alphas) + noise
            done = terminal | at_limit
        elif spec.family == "velocity1d":
            pos, vel, reward = velocity1d_move(self.state[:, 0], self.state[:, 1], action[:, 0], self.latent[:, 0])
            next_state = np.stack([pos, vel], axis=1)
            done = at_limit
        elif spec.family == "goalreacher2d":
            pos, vel, reward = goalreacher2d_move(self.state[:, :2], self.state[:, 2:], action, self.latent)
            next_state = np.concatenate([pos, vel], axis=1)
            done = at_limit
        else:
            raise KeyError(f"unknown task family {spec.family!r}")
        self.state = next_state
        return next_state.copy(), reward, done


class Env:
    """Single-episode view over one task, for tests and debugging rollouts."""

    def __init__(self, spec: EnvSpec, latent_task_units, rng: np.random.Generator):
        self.spec = spec
        self._batched = BatchedEnv(spec, 1, rng)
        self._latent = np.asarray(latent_task_units, dtype=np.float64).reshape(1, spec.latent_dim)
        self.done = True

    @property
    def latent(self) -> np.ndarray:
        return self._latent[0]

    def reset(self) -> np.ndarray:
        self._batched.reset_slots(np.array([0]), self._latent)
        self.done = False
        return self._batched.state[0].copy()

    def step(self, action) -> tuple[np.ndarray, float, bool]:
        if self.done:
            raise RuntimeError("episode is over; call reset()")
        action = np.asarray(action, dtype=np.float64).reshape(1, self.spec.action_dim)
        state, reward, done = self._batched.step(action)
        self.done = bool(done[0])
        return state[0], float(reward[0]), self.done
