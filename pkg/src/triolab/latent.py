"""Latent task parameters: diagonal-Gaussian beliefs, hyperpriors and unit rescaling.

Beliefs always live in normalized latent units (training priors are centered on
[-1, 1]); environments receive task units through :func:`rescale_to_task`.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


def _as_vector(x) -> np.ndarray:
    v = np.asarray(x, dtype=np.float64)
    if v.ndim == 0:
        v = v.reshape(1)
    if v.ndim != 1:
        raise ValueError(f"expected a 1-D vector, got shape {v.shape}")
    if not np.all(np.isfinite(v)):
        raise ValueError("vector entries must be finite")
    return v


@dataclass(frozen=True)
class GaussianBelief:
    """Diagonal Gaussian over the latent vector, parameterized by mean and std."""

    mean: np.ndarray
    std: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "mean", _as_vector(self.mean))
        object.__setattr__(self, "std", _as_vector(self.std))
        if self.mean.shape != self.std.shape:
            raise ValueError("mean and std must have the same length")
        if np.any(self.std <= 0.0):
            raise ValueError("std entries must be strictly positive")

    @property
    def dim(self) -> int:
        return self.mean.shape[0]

    def as_features(self) -> np.ndarray:
        """Concatenated (mean, std), the network-facing encoding of the belief."""
        return np.concatenate([self.mean, self.std])


@dataclass(frozen=True)
class HyperpriorSpec:
    """Box hyperprior over prior parameters: uniform mean and uniform variance ranges."""

    mean_lo: np.ndarray
    mean_hi: np.ndarray
    var_lo: np.ndarray
    var_hi: np.ndarray

    def __post_init__(self):
        for name in ("mean_lo", "mean_hi", "var_lo", "var_hi"):
            object.__setattr__(self, name, _as_vector(getattr(self, name)))
        shapes = {getattr(self, n).shape for n in ("mean_lo", "mean_hi", "var_lo", "var_hi")}
        if len(shapes) != 1:
            raise ValueError("hyperprior range vectors must share a length")
        if np.any(self.mean_lo > self.mean_hi):
            raise ValueError("mean_lo must be <= mean_hi elementwise")
        if np.any(self.var_lo <= 0.0) or np.any(self.var_lo > self.var_hi):
            raise ValueError("variance ranges must satisfy 0 < var_lo <= var_hi")

    @property
    def dim(self) -> int:
        return self.mean_lo.shape[0]


@dataclass(frozen=True)
class LatentRange:
    """Task-unit box the normalized latent space [-1, 1]^d maps onto."""

    lo: np.ndarray
    hi: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "lo", _as_vector(self.lo))
        object.__setattr__(self, "hi", _as_vector(self.hi))
        if self.lo.shape != self.hi.shape:
            raise ValueError("lo and hi must have the same length")
        if np.any(self.lo >= self.hi):
            raise ValueError("lo must be < hi elementwise")

    @property
    def dim(self) -> int:
        return self.lo.shape[0]


def sample_prior(hp: HyperpriorSpec, rng: np.random.Generator) -> GaussianBelief:
    """Draw prior parameters z = (mean, std): mean uniform, variance uniform."""
    mean = rng.uniform(hp.mean_lo, hp.mean_hi)
    var = rng.uniform(hp.var_lo, hp.var_hi)
    return GaussianBelief(mean=mean, std=np.sqrt(var))


def sample_latent(belief: GaussianBelief, rng: np.random.Generator) -> np.ndarray:
    """Draw a normalized latent vector from the belief."""
    return belief.mean + belief.std * rng.standard_normal(belief.dim)


def rescale_to_task(x_norm, r: LatentRange) -> np.ndarray:
    """Affine map from normalized units ([-1, 1] onto [lo, hi]).  No clipping."""
    x = np.asarray(x_norm, dtype=np.float64)
    return r.lo + (x + 1.0) / 2.0 * (r.hi - r.lo)


def normalize_from_task(x_task, r: LatentRange) -> np.ndarray:
    """Exact inverse of :func:`rescale_to_task`."""
    x = np.asarray(x_task, dtype=np.float64)
    return 2.0 * (x - r.lo) / (r.hi - r.lo) - 1.0


def kl_diag_gaussian(q: GaussianBelief, p: GaussianBelief) -> float:
    """KL(q || p) between diagonal Gaussians, summed over dimensions."""
    if q.dim != p.dim:
        raise ValueError(f"dimension mismatch: q has {q.dim}, p has {p.dim}")
    var_q = q.std**2
    var_p = p.std**2
    per_dim = np.log(p.std / q.std) + (var_q + (q.mean - p.mean) ** 2) / (2.0 * var_p) - 0.5
    return float(np.sum(per_dim))
