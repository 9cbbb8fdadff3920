"""Command-line entry points.

Exit codes: 0 success, 2 usage or configuration error, 3 numerical divergence,
4 artifact mismatch (checkpoints that do not fit the requested environment).
"""

from __future__ import annotations

import argparse
import csv
import logging
import os
import sys
import time

import numpy as np

from . import neural as nn
from .config import ConfigError, ExperimentConfig
from .envs import Env, spec_for_family
from .latent import GaussianBelief
from .manifest import build_manifest, write_manifest
from .meta import (
    PRIOR_GP,
    PRIOR_ORACLE,
    PRIOR_UNINFORMATIVE,
    DivergenceError,
    ModelSet,
    meta_test,
    meta_train,
)
from .policy import MODE_BAYES, MODE_THOMPSON
from .seeding import stream
from .sequences import get_sequence, sample_test_task, sequence_mean_normalized
from .tracking import LatentTracker

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_DIVERGED = 3
EXIT_MISMATCH = 4

log = logging.getLogger("triolab")


def _fmt(value: float) -> str:
    """CSV number format: '.' decimal separator, 9 significant digits."""
    return format(float(value), ".9g")


def _write_csv(path_or_handle, header: list[str], rows: list[list]) -> None:
    def emit(fh):
        writer = csv.writer(fh)
        writer.writerow(header)
        for row in rows:
            writer.writerow([_fmt(v) if isinstance(v, (float, np.floating)) else v for v in row])

    if isinstance(path_or_handle, (str, os.PathLike)):
        with open(path_or_handle, "w", newline="") as fh:
            emit(fh)
    else:
        emit(path_or_handle)


def _train_log_rows(train_log: list[dict]) -> tuple[list[str], list[list]]:
    header = ["iteration", "mean_return", "episodes", "steps", "elbo", "inference_mse",
              "inference_trace", "inference_kl", "policy_loss", "value_loss", "entropy",
              "clip_fraction"]
    rows = [[row[k] for k in header] for row in train_log]
    return header, rows


def _test_record_rows(record) -> tuple[list[str], list[list]]:
    d = record.tasks[0].true_latent.shape[0] if record.tasks else 0
    header = ["seed", "task", "episode", "return"]
    for k in range(d):
        header += [f"true_{k}", f"post_mean_{k}", f"post_std_{k}", f"prior_mean_{k}", f"prior_std_{k}"]
    rows = []
    for task in record.tasks:
        for episode, ret in enumerate(task.episode_returns):
            row = [record.seed, task.task, episode, float(ret)]
            for k in range(d):
                row += [float(task.true_latent[k]), float(task.posterior.mean[k]),
                        float(task.posterior.std[k]), float(task.prior.mean[k]),
                        float(task.prior.std[k])]
            rows.append(row)
    return header, rows


def cmd_meta_train(args) -> int:
    started = time.time()
    try:
        cfg = ExperimentConfig.from_file(args.config)
        train_cfg = cfg.train_config(args.seed)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    os.makedirs(args.out, exist_ok=True)
    try:
        result = meta_train(train_cfg)
    except DivergenceError as exc:
        log.error("training diverged at iteration %d; writing last finite checkpoints", exc.iteration)
        nn.save_checkpoint(os.path.join(args.out, "policy.trio"), exc.policy_arrays)
        nn.save_checkpoint(os.path.join(args.out, "inference.trio"), exc.inference_arrays)
        return EXIT_DIVERGED
    policy_path, inference_path = result.models.save(args.out)
    log_path = os.path.join(args.out, "train_log.csv")
    header, rows = _train_log_rows(result.log)
    _write_csv(log_path, header, rows)
    manifest = build_manifest(
        command="meta-train", seed=args.seed, config_text=cfg.to_ini_text(),
        outputs={"policy": policy_path, "inference": inference_path, "train_log": log_path},
        wall_clock_s=time.time() - started)
    write_manifest(os.path.join(args.out, "manifest.json"), manifest)
    log.info("meta-train finished: %d iterations, outputs in %s", train_cfg.iterations, args.out)
    return EXIT_OK


_MODE_TO_SOURCE = {
    "bayes": PRIOR_GP,
    "thompson": PRIOR_GP,
    "oracle": PRIOR_ORACLE,
    "uninformative": PRIOR_UNINFORMATIVE,
}


def cmd_meta_test(args) -> int:
    started = time.time()
    try:
        seq = get_sequence(args.sequence)
    except KeyError as exc:
        print(f"unknown sequence: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    try:
        cfg = ExperimentConfig.from_file(args.config) if args.config else ExperimentConfig.default(seq.family)
        if cfg.values["env"]["family"] != seq.family:
            raise ConfigError(
                f"config family {cfg.values['env']['family']!r} does not match sequence family {seq.family!r}")
        env_spec = cfg.env_spec()
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    try:
        models = ModelSet.load(args.models, env_spec)
    except (nn.CheckpointError, ValueError, OSError) as exc:
        print(f"cannot load models: {exc}", file=sys.stderr)
        return EXIT_MISMATCH
    if args.mode in (MODE_BAYES, MODE_THOMPSON) and models.bundle.mode != args.mode:
        print(f"checkpoint was trained in {models.bundle.mode!r} mode, not {args.mode!r}",
              file=sys.stderr)
        return EXIT_MISMATCH
    try:
        record = meta_test(models, seq, args.tasks, seed=args.seed,
                           prior_source=_MODE_TO_SOURCE[args.mode],
                           gp_cfg=cfg.gp_config(), env_spec=env_spec)
    except ValueError as exc:
        print(f"artifact mismatch: {exc}", file=sys.stderr)
        return EXIT_MISMATCH
    header, rows = _test_record_rows(record)
    _write_csv(args.out, header, rows)
    manifest = build_manifest(
        command="meta-test", seed=args.seed, config_text=cfg.to_ini_text(),
        outputs={"csv": args.out},
        wall_clock_s=time.time() - started,
        extra={"sequence": args.sequence, "mode": args.mode, "tasks": args.tasks,
               "models": args.models})
    write_manifest(args.out + ".manifest.json", manifest)
    return EXIT_OK


def cmd_track_eval(args) -> int:
    started = time.time()
    try:
        seq = get_sequence(args.sequence)
    except KeyError as exc:
        print(f"unknown sequence: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    try:
        cfg = ExperimentConfig.from_file(args.config) if args.config else ExperimentConfig.default(seq.family)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    d = seq.initial_prior.dim
    rng_obs = stream(args.seed, "task")
    tracker = LatentTracker(d, stream(args.seed, "gp"), cfg.gp_config())
    prior = seq.initial_prior
    header = ["seed", "task"]
    for k in range(d):
        header += [f"true_{k}", f"obs_{k}", f"prior_mean_{k}", f"prior_std_{k}"]
    rows = []
    for t in range(args.tasks):
        true = sequence_mean_normalized(seq, t)
        obs = true + args.noise * rng_obs.standard_normal(d)
        row = [args.seed, t]
        for k in range(d):
            row += [float(true[k]), float(obs[k]), float(prior.mean[k]), float(prior.std[k])]
        rows.append(row)
        if t + 1 < args.tasks:
            prior = tracker.step(obs)
    _write_csv(args.out, header, rows)
    manifest = build_manifest(
        command="track-eval", seed=args.seed, config_text=cfg.to_ini_text(),
        outputs={"csv": args.out}, wall_clock_s=time.time() - started,
        extra={"sequence": args.sequence, "noise": args.noise, "tasks": args.tasks})
    write_manifest(args.out + ".manifest.json", manifest)
    return EXIT_OK


def cmd_env_rollout(args) -> int:
    try:
        spec = spec_for_family(args.env)
    except KeyError as exc:
        print(f"unknown environment: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    try:
        latent = np.array([float(v) for v in args.latent.split(",") if v.strip()])
    except ValueError:
        print(f"cannot parse latent values {args.latent!r}", file=sys.stderr)
        return EXIT_CONFIG
    if latent.shape[0] != spec.latent_dim:
        print(f"latent needs {spec.latent_dim} values, got {latent.shape[0]}", file=sys.stderr)
        return EXIT_CONFIG

    models = None
    if args.policy != "random":
        try:
            models = ModelSet.load(args.policy, spec)
        except (nn.CheckpointError, ValueError, OSError) as exc:
            print(f"cannot load models: {exc}", file=sys.stderr)
            return EXIT_MISMATCH

    rng_env = stream(args.seed, "env")
    rng_policy = stream(args.seed, "policy")
    env = Env(spec, latent, rng_env)
    header = (["episode", "step"] + [f"state_{i}" for i in range(spec.state_dim)]
              + [f"action_{i}" for i in range(spec.action_dim)] + ["reward", "done"])
    rows = []
    episode = 0
    remaining = args.steps
    uninformative = GaussianBelief(mean=np.zeros(spec.latent_dim), std=np.ones(spec.latent_dim))
    while remaining > 0:
        state = env.reset()
        step = 0
        done = False
        if models is not None:
            hidden, belief = models.net.posterior_init(uninformative)
        while not done and remaining > 0:
            if models is None:
                action = rng_policy.uniform(spec.action_lo, spec.action_hi, size=spec.action_dim)
            else:
                from .policy import act_bayes, act_thompson

                if models.bundle.mode == MODE_BAYES:
                    action = act_bayes(models.bundle, state, belief, rng_policy).action
                else:
                    action = act_thompson(models.bundle, state, belief, rng_policy).action
            next_state, reward, done = env.step(action)
            if models is not None:
                feats = models.net.features(state, np.atleast_1d(action), reward, uninformative)
                hidden, belief = models.net.posterior_step_features(hidden, feats, uninformative)
            rows.append([episode, step] + [float(s) for s in state]
                        + [float(a) for a in np.atleast_1d(action)] + [float(reward), int(done)])
            state = next_state
            step += 1
            remaining -= 1
        episode += 1
    _write_csv(sys.stdout, header, rows)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="triolab",
                                     description="Tracking, inference and policy optimization "
                                                 "for non-stationary meta-RL.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("meta-train", help="train policy and inference networks")
    p.add_argument("--config", required=True, help="experiment config file")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(func=cmd_meta_train)

    p = sub.add_parser("meta-test", help="run a latent drift sequence")
    p.add_argument("--models", required=True, help="directory with policy.trio / inference.trio")
    p.add_argument("--sequence", required=True)
    p.add_argument("--tasks", type=int, default=80)
    p.add_argument("--mode", choices=sorted(_MODE_TO_SOURCE), required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True, help="output CSV path")
    p.add_argument("--config", default=None, help="optional config overriding env/gp settings")
    p.set_defaults(func=cmd_meta_test)

    p = sub.add_parser("track-eval", help="GP tracking on noisy sequence values, no policy")
    p.add_argument("--sequence", required=True)
    p.add_argument("--noise", type=float, default=0.0, help="observation noise std, normalized units")
    p.add_argument("--tasks", type=int, default=80)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.add_argument("--config", default=None)
    p.set_defaults(func=cmd_track_eval)

    p = sub.add_parser("env-rollout", help="print environment transitions as CSV")
    p.add_argument("--env", required=True)
    p.add_argument("--latent", required=True, help="comma-separated task-unit latent values")
    p.add_argument("--policy", default="random", help="'random' or a models directory")
    p.add_argument("--steps", type=int, default=20)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_env_rollout)
    return parser


def main(argv=None) -> int:
    logging.basicConfig(level=logging.INFO, format="%(levelname)s %(name)s: %(message)s")
    parser = build_parser()
    args = parser.parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
