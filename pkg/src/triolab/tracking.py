"""Online tracking of the latent task parameters with per-dimension Gaussian processes.

After each test task the inferred posterior mean is appended to the history and
one GP per latent dimension is refit by maximum likelihood, giving a one-step-ahead
prediction that becomes the prior for the next task.  The kernel combines a
squared-exponential, a fixed white-noise level, a bias term and a linear term:

    k(xi, xj) = c * exp(-(xi - xj)^2 / (2 l^2)) + W * 1[xi == xj] + s0 + xi * xj

with W fixed at 0.01 and (c, l, s0) tuned online by multi-start simplex search on
the log marginal likelihood.
"""

from __future__ import annotations

import os
from dataclasses import dataclass

import numpy as np
from scipy.linalg import cho_factor, cho_solve
from scipy.optimize import minimize

from .latent import GaussianBelief


def _worker_count() -> int:
    """Worker threads for independent per-dimension fits (TRIO_THREADS)."""
    try:
        return max(int(os.environ.get("TRIO_THREADS", "1")), 1)
    except ValueError:
        return 1

WHITE_NOISE = 0.01

# Variance of the predicted prior is kept inside this band (normalized units).
VAR_FLOOR = 1e-4
VAR_CAP = 1.0


@dataclass(frozen=True)
class KernelParams:
    """Hyperparameters of the composite kernel; W is fixed, not fitted."""

    c: float
    l: float
    s0: float
    w: float = WHITE_NOISE

    def __post_init__(self):
        if self.c <= 0 or self.l <= 0 or self.s0 < 0:
            raise ValueError("kernel hyperparameters must satisfy c > 0, l > 0, s0 >= 0")


@dataclass(frozen=True)
class GpSearchConfig:
    """Bounds and budget for the hyperparameter search."""

    restarts: int = 8
    max_iters: int = 200
    c_bounds: tuple[float, float] = (1e-3, 1e3)
    l_bounds: tuple[float, float] = (0.1, 100.0)
    s0_bounds: tuple[float, float] = (1e-6, 10.0)
    window: int = 100


def kernel_eval(p: KernelParams, xi: float, xj: float) -> float:
    """Kernel between two scalar inputs, white noise included when xi == xj."""
    se = p.c * np.exp(-((xi - xj) ** 2) / (2.0 * p.l**2))
    white = p.w if xi == xj else 0.0
    return float(se + white + p.s0 + xi * xj)


def _kernel_matrix(p: KernelParams, xa: np.ndarray, xb: np.ndarray) -> np.ndarray:
    diff = xa[:, None] - xb[None, :]
    k = p.c * np.exp(-(diff**2) / (2.0 * p.l**2))
    k += np.where(xa[:, None] == xb[None, :], p.w, 0.0)
    k += p.s0 + xa[:, None] * xb[None, :]
    return k


def _chol_with_jitter(k: np.ndarray):
    jitter = 0.0
    for _ in range(4):
        try:
            return cho_factor(k + jitter * np.eye(k.shape[0]), lower=True)
        except np.linalg.LinAlgError:
            jitter = 1e-8 if jitter == 0.0 else jitter * 10.0
    raise np.linalg.LinAlgError("kernel matrix not positive definite even with jitter")


def log_marginal_likelihood(p: KernelParams, inputs: np.ndarray, targets: np.ndarray) -> float:
    """Zero-mean GP log evidence of `targets` at `inputs` under kernel `p`."""
    x = np.asarray(inputs, dtype=np.float64)
    y = np.asarray(targets, dtype=np.float64)
    if x.size == 0:
        raise ValueError("need at least one data point")
    k = _kernel_matrix(p, x, x)
    cf = _chol_with_jitter(k)
    alpha = cho_solve(cf, y)
    logdet = 2.0 * np.sum(np.log(np.diag(cf[0])))
    return float(-0.5 * y @ alpha - 0.5 * logdet - 0.5 * x.size * np.log(2.0 * np.pi))


@dataclass
class GPModel:
    """One fitted per-dimension GP over episode indices, on standardized targets."""

    inputs: np.ndarray
    targets: np.ndarray
    params: KernelParams
    y_mean: float
    y_std: float
    _cf: tuple = None
    _alpha: np.ndarray = None

    def __post_init__(self):
        k = _kernel_matrix(self.params, self.inputs, self.inputs)
        self._cf = _chol_with_jitter(k)
        self._alpha = cho_solve(self._cf, self._standardized())

    def _standardized(self) -> np.ndarray:
        return (self.targets - self.y_mean) / self.y_std


def _log_bounds(cfg: GpSearchConfig) -> np.ndarray:
    return np.log(np.array([cfg.c_bounds, cfg.l_bounds, cfg.s0_bounds]))


def _params_from_log(theta: np.ndarray, cfg: GpSearchConfig) -> KernelParams:
    lb = _log_bounds(cfg)
    t = np.clip(theta, lb[:, 0], lb[:, 1])
    c, l, s0 = np.exp(t)
    return KernelParams(c=float(c), l=float(l), s0=float(s0))

_FALLBACK = KernelParams(c=1.0, l=5.0, s0=1e-6)


def gp_fit(inputs, targets, rng: np.random.Generator, cfg: GpSearchConfig = GpSearchConfig()) -> GPModel:
    """Fit one GP by multi-start Nelder-Mead on the log marginal likelihood.

    Targets are standardized per fit; only the most recent `cfg.window` points
    are used.  Deterministic given the generator state.
    """
    x = np.asarray(inputs, dtype=np.float64)
    y = np.asarray(targets, dtype=np.float64)
    if x.size == 0:
        raise ValueError("need at least one data point")
    if x.size > cfg.window:
        x = x[-cfg.window :]
        y = y[-cfg.window :]

    y_mean = float(np.mean(y))
    y_std = float(np.std(y))
    if y_std < 1e-8:
        y_std = 1.0
    ty = (y - y_mean) / y_std

    def neg_lml(theta):
        p = _params_from_log(theta, cfg)
        try:
            return -log_marginal_likelihood(p, x, ty)
        except np.linalg.LinAlgError:
            return np.inf

    lb = _log_bounds(cfg)
    starts = [np.log(np.array([1.0, 5.0, 1e-3]))]
    for _ in range(max(cfg.restarts - 1, 0)):
        starts.append(rng.uniform(lb[:, 0], lb[:, 1]))

    best_theta, best_val = None, np.inf
    for theta0 in starts:
        res = minimize(neg_lml, theta0, method="Nelder-Mead", options={"maxiter": cfg.max_iters, "xatol": 1e-4, "fatol": 1e-7})
        if np.isfinite(res.fun) and res.fun < best_val:
            best_theta, best_val = res.x, res.fun

    params = _FALLBACK if best_theta is None else _params_from_log(best_theta, cfg)
    return GPModel(inputs=x, targets=y, params=params, y_mean=y_mean, y_std=y_std)


def gp_predict(model: GPModel, x_star: float) -> tuple[float, float]:
    """Posterior mean and variance at `x_star`, un-standardized and variance-clamped."""
    xs = np.array([float(x_star)])
    k_star = _kernel_matrix(model.params, xs, model.inputs)[0]
    k_ss = _kernel_matrix(model.params, xs, xs)[0, 0]
    mean = float(k_star @ model._alpha) * model.y_std + model.y_mean
    v = cho_solve(model._cf, k_star)
    var = float(k_ss - k_star @ v) * model.y_std**2
    var = float(np.clip(var, VAR_FLOOR, VAR_CAP))
    return mean, var


class LatentTracker:
    """Accumulates per-task latent estimates and predicts the next task's prior.

    One independent GP per latent dimension; refit from scratch on every step.
    """

    def __init__(self, dim: int, rng: np.random.Generator, cfg: GpSearchConfig = GpSearchConfig()):
        self.dim = dim
        self.cfg = cfg
        self._rng = rng
        self._history: list[np.ndarray] = []
        self.models: list[GPModel] | None = None

    @property
    def count(self) -> int:
        return len(self._history)

    def step(self, omega_hat: np.ndarray) -> GaussianBelief:
        """Append the estimate for task t = count and predict the prior for t + 1."""
        omega_hat = np.asarray(omega_hat, dtype=np.float64)
        if omega_hat.shape != (self.dim,):
            raise ValueError(f"expected estimate of shape ({self.dim},), got {omega_hat.shape}")
        self._history.append(omega_hat)
        t_next = float(len(self._history))
        inputs = np.arange(len(self._history), dtype=np.float64)
        data = np.stack(self._history)
        # One child seed per step, shared by every dimension: fits depend on the
        # data alone, so permuting dimensions permutes predictions exactly, and
        # the independent fits may run on worker threads in any order.
        child_seed = int(self._rng.integers(0, 2**63 - 1))

        def fit_dim(k: int) -> GPModel:
            rng = np.random.Generator(np.random.PCG64(child_seed))
            return gp_fit(inputs, data[:, k], rng, self.cfg)

        workers = _worker_count()
        if workers > 1 and self.dim > 1:
            from concurrent.futures import ThreadPoolExecutor

            with ThreadPoolExecutor(max_workers=min(workers, self.dim)) as pool:
                self.models = list(pool.map(fit_dim, range(self.dim)))
        else:
            self.models = [fit_dim(k) for k in range(self.dim)]
        means = np.empty(self.dim)
        stds = np.empty(self.dim)
        for k, model in enumerate(self.models):
            mean, var = gp_predict(model, t_next)
            means[k] = mean
            stds[k] = np.sqrt(var)
        return GaussianBelief(mean=means, std=stds)
