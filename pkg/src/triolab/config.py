"""Experiment configuration: bracketed-section key = value files over per-family defaults.

Every tunable constant of the artifact is surfaced here so a run manifest
(config snapshot + master seed) pins the experiment completely.  Unknown
sections or keys are rejected; missing keys fall back to the family defaults
with a logged notice.
"""

from __future__ import annotations

import configparser
import copy
import logging

import numpy as np

from .envs import EnvSpec, spec_for_family
from .latent import HyperpriorSpec
from .meta import TrainConfig, default_hyperprior
from .policy import PpoConfig
from .tracking import GpSearchConfig

log = logging.getLogger("triolab.config")


class ConfigError(ValueError):
    """Unparseable or unknown configuration content."""


_COMMON = {
    "env": {
        "family": "minigolf",
        "distractors": 0,
        "max_steps": 20,
        "episodes_per_task": 4,
    },
    "hyperprior": {
        "mean_lo": [-1.0],
        "mean_hi": [1.0],
        "var_lo": [0.01],
        "var_hi": [0.2],
    },
    "train": {
        "mode": "bayes",
        "iterations": 500,
        "inference_warmup": 0,
        "episodes_per_task": 1,
        "parallel_envs": 64,
        "off_prior": True,
        "policy_hidden": 16,
        "init_log_std": -1.2,
        "init_action_bias": -0.6,
        "inference_hidden": 64,
        "inference_encoder": 64,
    },
    "ppo": {
        "lr": 5e-5,
        "clip": 0.1,
        "epochs": 4,
        "minibatches": 8,
        "entropy_coef": 0.0,
        "value_coef": 0.5,
        "gamma": 0.99,
        "gae_lambda": 0.95,
        "max_grad_norm": 0.5,
        "batch_size": 1280,
    },
    "inference": {
        "lr": 1e-3,
        "epochs": 4,
        "kl_weight": 1.0,
    },
    "gp": {
        "restarts": 8,
        "max_iters": 200,
        "window": 100,
        "c_lo": 1e-3,
        "c_hi": 1e3,
        "l_lo": 0.1,
        "l_hi": 100.0,
        "s0_lo": 1e-6,
        "s0_hi": 10.0,
    },
    "test": {
        "tasks": 80,
        "task_agg": "mean",
    },
}

_FAMILY_OVERRIDES = {
    "minigolf": {},
    "velocity1d": {
        "env": {"max_steps": 100, "episodes_per_task": 1},
        "hyperprior": {"var_lo": [0.01], "var_hi": [0.3]},
        "train": {"policy_hidden": 128, "init_log_std": -0.7, "init_action_bias": 0.0},
        "ppo": {"lr": 7e-4, "epochs": 2, "minibatches": 4, "entropy_coef": 0.01, "batch_size": 6400},
        "inference": {"kl_weight": 0.1},
    },
    "goalreacher2d": {
        "env": {"max_steps": 100, "episodes_per_task": 1},
        "hyperprior": {"mean_lo": [-1.0, -1.0], "mean_hi": [1.0, 1.0],
                       "var_lo": [0.1, 0.1], "var_hi": [0.4, 0.4]},
        "train": {"policy_hidden": 128, "init_log_std": -0.7, "init_action_bias": 0.0},
        "ppo": {"lr": 5e-4, "epochs": 2, "minibatches": 2, "entropy_coef": 0.01, "batch_size": 3200},
        "inference": {"kl_weight": 0.1},
    },
}


def _parse_value(raw: str, reference):
    raw = raw.strip()
    try:
        if isinstance(reference, bool):
            low = raw.lower()
            if low in ("true", "yes", "1", "on"):
                return True
            if low in ("false", "no", "0", "off"):
                return False
            raise ValueError(f"not a boolean: {raw!r}")
        if isinstance(reference, int):
            return int(raw)
        if isinstance(reference, float):
            return float(raw)
        if isinstance(reference, list):
            return [float(part) for part in raw.split(",") if part.strip()]
        return raw
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc


def _format_value(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, list):
        return ", ".join(repr(float(v)) for v in value)
    return repr(float(value)) if isinstance(value, float) else str(value)


class ExperimentConfig:
    """Resolved configuration for one family, with typed section accessors."""

    def __init__(self, values: dict):
        self.values = values

    @classmethod
    def default(cls, family: str) -> "ExperimentConfig":
        if family not in _FAMILY_OVERRIDES:
            raise ConfigError(f"unknown task family {family!r}")
        values = copy.deepcopy(_COMMON)
        values["env"]["family"] = family
        hp = default_hyperprior(family)
        values["hyperprior"] = {
            "mean_lo": [float(v) for v in hp.mean_lo], "mean_hi": [float(v) for v in hp.mean_hi],
            "var_lo": [float(v) for v in hp.var_lo], "var_hi": [float(v) for v in hp.var_hi],
        }
        spec = spec_for_family(family)
        values["env"]["max_steps"] = spec.max_steps
        values["env"]["episodes_per_task"] = spec.episodes_per_task
        for section, overrides in _FAMILY_OVERRIDES[family].items():
            values[section].update(copy.deepcopy(overrides))
        return cls(values)

    @classmethod
    def from_file(cls, path: str) -> "ExperimentConfig":
        parser = configparser.ConfigParser(interpolation=None)
        try:
            with open(path) as fh:
                parser.read_file(fh, source=path)
        except OSError as exc:
            raise ConfigError(f"cannot read config file: {exc}") from exc
        except configparser.Error as exc:
            raise ConfigError(str(exc)) from exc
        family = parser.get("env", "family", fallback=_COMMON["env"]["family"])
        cfg = cls.default(family)
        for section in parser.sections():
            if section not in cfg.values:
                raise ConfigError(f"unknown config section [{section}]")
            for key, raw in parser.items(section):
                if key not in cfg.values[section]:
                    raise ConfigError(f"unknown config key {key!r} in section [{section}]")
                cfg.values[section][key] = _parse_value(raw, cfg.values[section][key])
        for section, keys in cfg.values.items():
            for key in keys:
                if not parser.has_option(section, key):
                    log.info("config: using default %s.%s = %s", section, key,
                             _format_value(cfg.values[section][key]))
        return cfg

    def to_ini_text(self) -> str:
        lines = []
        for section, keys in self.values.items():
            lines.append(f"[{section}]")
            for key, value in keys.items():
                lines.append(f"{key} = {_format_value(value)}")
            lines.append("")
        return "\n".join(lines)

    # --- typed accessors -------------------------------------------------

    def env_spec(self) -> EnvSpec:
        env = self.values["env"]
        kwargs = {"max_steps": env["max_steps"], "episodes_per_task": env["episodes_per_task"]}
        if env["family"] == "minigolf":
            kwargs["distractors"] = env["distractors"]
        elif env["distractors"]:
            raise ConfigError("distractors are a minigolf-only setting")
        return spec_for_family(env["family"], **kwargs)

    def hyperprior(self) -> HyperpriorSpec:
        hp = self.values["hyperprior"]
        return HyperpriorSpec(mean_lo=np.array(hp["mean_lo"]), mean_hi=np.array(hp["mean_hi"]),
                              var_lo=np.array(hp["var_lo"]), var_hi=np.array(hp["var_hi"]))

    def ppo_config(self) -> PpoConfig:
        return PpoConfig(**self.values["ppo"])

    def gp_config(self) -> GpSearchConfig:
        gp = self.values["gp"]
        return GpSearchConfig(restarts=gp["restarts"], max_iters=gp["max_iters"],
                              window=gp["window"], c_bounds=(gp["c_lo"], gp["c_hi"]),
                              l_bounds=(gp["l_lo"], gp["l_hi"]), s0_bounds=(gp["s0_lo"], gp["s0_hi"]))

    def train_config(self, seed: int) -> TrainConfig:
        train = self.values["train"]
        inf = self.values["inference"]
        return TrainConfig(
            env=self.env_spec(), hyperprior=self.hyperprior(), mode=train["mode"],
            iterations=train["iterations"], inference_warmup=train["inference_warmup"],
            train_episodes_per_task=train["episodes_per_task"],
            ppo=self.ppo_config(), inference_lr=inf["lr"],
            inference_epochs=inf["epochs"],
            kl_weight=inf["kl_weight"], off_prior=train["off_prior"],
            parallel_envs=train["parallel_envs"], policy_hidden=train["policy_hidden"],
            init_log_std=train["init_log_std"], init_action_bias=train["init_action_bias"],
            inference_hidden=train["inference_hidden"],
            inference_encoder=train["inference_encoder"], seed=seed,
        )
