import numpy as np
import pytest

from triolab.envs import minigolf_spec
from triolab.latent import GaussianBelief
from triolab.meta import (
    ModelSet,
    TaskRecord,
    TestRunRecord,
    TrainConfig,
    default_hyperprior,
    meta_test,
    meta_train,
    regret,
    run_oracle,
    run_uninformative,
)
from triolab.policy import PpoConfig
from triolab.sequences import get_sequence, sequence_mean_normalized
from triolab.tracking import GpSearchConfig

SPEC = minigolf_spec()


def tiny_cfg(seed=0, **kwargs):
    defaults = dict(
        env=SPEC, hyperprior=default_hyperprior("minigolf"), mode="bayes",
        iterations=2, ppo=PpoConfig(lr=1e-4, batch_size=128), parallel_envs=8,
        inference_epochs=1, seed=seed,
    )
    defaults.update(kwargs)
    return TrainConfig(**defaults)


FAST_GP = GpSearchConfig(restarts=2, max_iters=60)


@pytest.fixture(scope="module")
def tiny_models():
    return meta_train(tiny_cfg()).models


class TestMetaTrain:
    def test_zero_iterations_returns_initial_models_and_empty_log(self):
        result = meta_train(tiny_cfg(iterations=0))
        assert result.log == []
        fresh = meta_train(tiny_cfg(iterations=0))
        for name, arr in result.models.bundle.store.arrays().items():
            np.testing.assert_array_equal(arr, fresh.models.bundle.store.arrays()[name])

    def test_log_schema_and_determinism(self):
        a = meta_train(tiny_cfg(seed=5))
        b = meta_train(tiny_cfg(seed=5))
        assert len(a.log) == 2
        for row_a, row_b in zip(a.log, b.log):
            assert row_a == row_b
        for key in ("iteration", "mean_return", "elbo", "policy_loss", "value_loss"):
            assert key in a.log[0]

    def test_off_prior_doubles_inference_episodes_only(self):
        # run one iteration each way; the off-prior pass must double the
        # trajectories seen by inference but leave the policy update alone
        on = meta_train(tiny_cfg(seed=3, iterations=1, off_prior=False))
        both = meta_train(tiny_cfg(seed=3, iterations=1, off_prior=True))
        assert on.log[0]["episodes"] == both.log[0]["episodes"]
        for name, arr in on.models.bundle.store.arrays().items():
            np.testing.assert_array_equal(arr, both.models.bundle.store.arrays()[name])

    def test_warmup_iterations_leave_policy_untouched(self):
        warm = meta_train(tiny_cfg(seed=4, iterations=0, inference_warmup=2))
        fresh = meta_train(tiny_cfg(seed=4, iterations=0))
        assert len(warm.log) == 2
        assert all(row["iteration"] < 0 for row in warm.log)
        for name, arr in warm.models.bundle.store.arrays().items():
            np.testing.assert_array_equal(arr, fresh.models.bundle.store.arrays()[name])
        # ...but the inference network did move
        moved = any(
            not np.array_equal(warm.models.net.store.arrays()[n],
                               fresh.models.net.store.arrays()[n])
            for n in warm.models.net.store.names())
        assert moved

    def test_thompson_mode_trains(self):
        result = meta_train(tiny_cfg(seed=6, mode="thompson"))
        assert result.models.bundle.mode == "thompson"
        assert len(result.log) == 2


class TestModelSet:
    def test_save_load_round_trip(self, tiny_models, tmp_path):
        tiny_models.save(str(tmp_path))
        loaded = ModelSet.load(str(tmp_path), SPEC)
        for name, arr in tiny_models.bundle.store.arrays().items():
            np.testing.assert_array_equal(arr, loaded.bundle.store.arrays()[name])
        for name, arr in tiny_models.net.store.arrays().items():
            np.testing.assert_array_equal(arr, loaded.net.store.arrays()[name])


class TestMetaTest:
    def test_single_task_uses_initial_prior_and_no_gp(self, tiny_models):
        seq = get_sequence("minigolf_A")
        record = meta_test(tiny_models, seq, 1, seed=0, gp_cfg=FAST_GP)
        assert len(record.tasks) == 1
        np.testing.assert_array_equal(record.tasks[0].prior.mean, seq.initial_prior.mean)
        np.testing.assert_array_equal(record.tasks[0].prior.std, seq.initial_prior.std)

    def test_initial_prior_matches_sequence_configuration(self, tiny_models):
        record = meta_test(tiny_models, "minigolf_A", 2, seed=0, gp_cfg=FAST_GP)
        seq = get_sequence("minigolf_A")
        np.testing.assert_allclose(record.tasks[0].prior.mean, seq.initial_prior.mean)
        np.testing.assert_allclose(record.tasks[0].prior.std, [0.2])

    def test_episodes_per_task_and_schema(self, tiny_models):
        record = meta_test(tiny_models, "minigolf_A", 3, seed=0, gp_cfg=FAST_GP)
        for task in record.tasks:
            assert len(task.episode_returns) == SPEC.episodes_per_task
            assert len(task.episode_steps) == SPEC.episodes_per_task
            assert task.posterior.std.shape == (1,)

    def test_identical_seeds_identical_records(self, tiny_models):
        a = meta_test(tiny_models, "minigolf_A", 3, seed=9, gp_cfg=FAST_GP)
        b = meta_test(tiny_models, "minigolf_A", 3, seed=9, gp_cfg=FAST_GP)
        for ta, tb in zip(a.tasks, b.tasks):
            assert ta.episode_returns == tb.episode_returns
            np.testing.assert_array_equal(ta.prior.mean, tb.prior.mean)
            np.testing.assert_array_equal(ta.true_latent, tb.true_latent)

    def test_no_lookahead_prefix_property(self, tiny_models):
        short = meta_test(tiny_models, "minigolf_A", 3, seed=2, gp_cfg=FAST_GP)
        long = meta_test(tiny_models, "minigolf_A", 6, seed=2, gp_cfg=FAST_GP)
        for ts, tl in zip(short.tasks, long.tasks):
            np.testing.assert_array_equal(ts.prior.mean, tl.prior.mean)
            np.testing.assert_array_equal(ts.prior.std, tl.prior.std)
            assert ts.episode_returns == tl.episode_returns

    def test_oracle_priors_are_true_sampling_distribution(self, tiny_models):
        record = run_oracle(tiny_models, "minigolf_A", 3, seed=1)
        seq = get_sequence("minigolf_A")
        for t, task in enumerate(record.tasks):
            np.testing.assert_allclose(task.prior.mean, sequence_mean_normalized(seq, t), atol=1e-12)
            np.testing.assert_allclose(task.prior.std, [np.sqrt(seq.noise_var)], atol=1e-12)
        assert not record.tracked

    def test_uninformative_prior_constant(self, tiny_models):
        record = run_uninformative(tiny_models, "minigolf_A", 3, seed=1)
        for task in record.tasks:
            np.testing.assert_array_equal(task.prior.mean, [0.0])
            np.testing.assert_array_equal(task.prior.std, [1.0])

    def test_mode_mismatch_between_sequence_and_models(self, tiny_models):
        with pytest.raises(ValueError):
            meta_test(tiny_models, "cheetah_A", 2, seed=0, gp_cfg=FAST_GP)

    def test_gp_prior_flows_from_posterior_history(self, tiny_models):
        record = meta_test(tiny_models, "minigolf_A", 4, seed=3, gp_cfg=FAST_GP)
        # from task 1 on, priors are GP predictions: std must respect the clamp
        for task in record.tasks[1:]:
            assert 0.01 <= task.prior.std[0] <= 1.0


def _record(returns, prior_source="gp"):
    tasks = [
        TaskRecord(task=t, true_latent=np.array([0.0]),
                   prior=GaussianBelief(mean=[0.0], std=[1.0]),
                   posterior=GaussianBelief(mean=[0.0], std=[1.0]),
                   episode_returns=list(r), episode_steps=[1] * len(r))
        for t, r in enumerate(returns)
    ]
    return TestRunRecord(sequence="minigolf_A", policy_mode="bayes",
                         prior_source=prior_source, seed=0, tasks=tasks)


class TestRegret:
    def test_identical_records_zero_regret(self):
        rec = _record([[-1.0], [-2.0]])
        curve = regret(rec, rec)
        np.testing.assert_array_equal(curve.cumulative, [0.0, 0.0])

    def test_arithmetic_example(self):
        oracle = _record([[-1.0], [-1.0]], prior_source="oracle")
        agent = _record([[-3.0], [-2.0]])
        curve = regret(agent, oracle)
        np.testing.assert_allclose(curve.per_task, [2.0, 1.0])
        np.testing.assert_allclose(curve.cumulative, [2.0, 3.0])

    def test_cumulative_matches_independent_recomputation(self):
        rng = np.random.default_rng(0)
        oracle = _record([list(rng.uniform(-5, 0, 4)) for _ in range(6)], prior_source="oracle")
        agent = _record([list(rng.uniform(-5, 0, 4)) for _ in range(6)])
        curve = regret(agent, oracle)
        manual = []
        acc = 0.0
        for t in range(6):
            acc += np.mean(oracle.tasks[t].episode_returns) - np.mean(agent.tasks[t].episode_returns)
            manual.append(acc)
        np.testing.assert_allclose(curve.cumulative, manual, atol=1e-12)

    def test_task_count_mismatch_rejected(self):
        with pytest.raises(ValueError):
            regret(_record([[-1.0]]), _record([[-1.0], [-1.0]], prior_source="oracle"))

    def test_sum_aggregation_flag(self):
        oracle = _record([[-1.0, -3.0]], prior_source="oracle")
        agent = _record([[-2.0, -4.0]])
        assert regret(agent, oracle, task_agg="sum").per_task[0] == pytest.approx(2.0)
        assert regret(agent, oracle, task_agg="mean").per_task[0] == pytest.approx(1.0)
