"""Closed-form latent drift sequences used at meta-test time.

Each sequence pins the task family, the closed-form evolution of the latent in
task units, the variance of the per-task sampling noise, and the (deliberately
imperfect) initial prior handed to the agent before the first task.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .envs import EnvSpec, spec_for_family
from .latent import GaussianBelief, normalize_from_task


@dataclass(frozen=True)
class SequenceSpec:
    name: str
    family: str
    fn: Callable[[float], np.ndarray]
    noise_var: float
    initial_prior: GaussianBelief

    def __post_init__(self):
        if self.noise_var <= 0:
            raise ValueError("test noise variance must be > 0")

    def env_spec(self, **kwargs) -> EnvSpec:
        return spec_for_family(self.family, **kwargs)


def _minigolf_a(t):
    return np.array([-0.199 * np.sin(0.1 * t) + 0.30845])


def _minigolf_b(t):
    u = t / 50.0
    return np.array([0.5075 + 0.398 * (u - np.floor(0.5 + u))])


def _minigolf_c(t):
    return np.array([0.995 * np.tanh(t - 5.0) + 1.204])


def _cheetah_a(t):
    u = t + 5.0
    return np.array([3.0 / 16.0 * (-np.tanh(u / 16.0) + np.sin(u / 2.0) * 16.0 / u) + 0.75])


def _cheetah_b(t):
    if t <= 30:
        v = 0.15
    elif t <= 60:
        v = 1.125
    else:
        v = 0.75
    return np.array([v])


def _ant_a(t):
    phase = (2.0 * np.pi / 15.0) * np.sqrt(16.0 * t + 5.0)
    return np.array([3.0 * np.sin(phase), 3.0 * np.cos(phase)])


def _ant_b(t):
    angle = np.pi / 4.0 if t <= 20 else 5.0 * np.pi / 4.0
    return np.array([3.0 * np.sin(angle), 3.0 * np.cos(angle)])


def _normalized_prior(family: str, mean_task, std) -> GaussianBelief:
    r = spec_for_family(family).latent_range
    return GaussianBelief(mean=normalize_from_task(np.asarray(mean_task, dtype=np.float64), r), std=std)


def _build_registry() -> dict[str, SequenceSpec]:
    golf_prior = _normalized_prior("minigolf", [1.0], [0.2])
    seqs = [
        SequenceSpec("minigolf_A", "minigolf", _minigolf_a, 0.001, golf_prior),
        SequenceSpec("minigolf_B", "minigolf", _minigolf_b, 0.001, golf_prior),
        SequenceSpec("minigolf_C", "minigolf", _minigolf_c, 0.001, _normalized_prior("minigolf", _minigolf_c(0), [0.2])),
        SequenceSpec("cheetah_A", "velocity1d", _cheetah_a, 1e-5, _normalized_prior("velocity1d", [1.5], [0.1])),
        SequenceSpec("cheetah_B", "velocity1d", _cheetah_b, 1e-5, _normalized_prior("velocity1d", _cheetah_b(0), [np.sqrt(1e-5)])),
        SequenceSpec("ant_A", "goalreacher2d", _ant_a, 0.01, _normalized_prior("goalreacher2d", _ant_a(0), [0.1, 0.1])),
        SequenceSpec("ant_B", "goalreacher2d", _ant_b, 0.01, _normalized_prior("goalreacher2d", _ant_b(0), [0.1, 0.1])),
    ]
    return {s.name: s for s in seqs}


SEQUENCES = _build_registry()


def get_sequence(name: str) -> SequenceSpec:
    if name not in SEQUENCES:
        raise KeyError(f"unknown sequence {name!r}; known: {sorted(SEQUENCES)}")
    return SEQUENCES[name]


def eval_sequence(seq: SequenceSpec | str, t: int) -> np.ndarray:
    """Latent value of the sequence at task index t, in task units."""
    if isinstance(seq, str):
        seq = get_sequence(seq)
    if t < 0:
        raise ValueError("task index must be >= 0")
    return seq.fn(t)


def sequence_mean_normalized(seq: SequenceSpec | str, t: int) -> np.ndarray:
    if isinstance(seq, str):
        seq = get_sequence(seq)
    r = seq.env_spec().latent_range
    return normalize_from_task(eval_sequence(seq, t), r)


def sample_test_task(seq: SequenceSpec | str, t: int, rng: np.random.Generator) -> np.ndarray:
    """Draw the normalized latent of test task t around the sequence mean."""
    if isinstance(seq, str):
        seq = get_sequence(seq)
    mean = sequence_mean_normalized(seq, t)
    return mean + np.sqrt(seq.noise_var) * rng.standard_normal(mean.shape[0])
