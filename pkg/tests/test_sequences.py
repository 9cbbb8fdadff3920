import numpy as np
import pytest

from triolab.latent import LatentRange, normalize_from_task
from triolab.sequences import (
    SEQUENCES,
    eval_sequence,
    get_sequence,
    sample_test_task,
    sequence_mean_normalized,
)

# Frozen from direct evaluation of the closed forms (cross-checked against a
# 30-digit mpmath evaluation).
FROZEN = {
    ("minigolf_A", 0): [0.30845],
    ("minigolf_A", 10): [-0.199 * np.sin(1.0) + 0.30845],
    ("minigolf_B", 24): [0.69854],
    ("minigolf_B", 25): [0.30850],
    ("minigolf_C", 0): [0.20909034],
    ("minigolf_C", 30): [2.19899999],
    ("cheetah_A", 0): [1.05232521],
    ("cheetah_A", 20): [0.57032427],
    ("cheetah_B", 0): [0.15],
    ("cheetah_B", 31): [1.125],
    ("cheetah_B", 61): [0.75],
    ("ant_A", 0): [2.41671906, 1.77748951],
    ("ant_B", 20): [2.12132034, 2.12132034],
    ("ant_B", 21): [-2.12132034, -2.12132034],
}


class TestEvalSequence:
    @pytest.mark.parametrize("key", sorted(FROZEN))
    def test_frozen_values(self, key):
        name, t = key
        np.testing.assert_allclose(eval_sequence(name, t), FROZEN[key], atol=5e-8)

    def test_sawtooth_discontinuity_at_25(self):
        before = eval_sequence("minigolf_B", 24)[0]
        after = eval_sequence("minigolf_B", 25)[0]
        assert before - after == pytest.approx(0.39004, abs=1e-5)

    def test_sawtooth_period_50(self):
        for t in range(0, 201):
            a = eval_sequence("minigolf_B", t)[0]
            b = eval_sequence("minigolf_B", t + 50)[0]
            assert abs(a - b) < 1e-9

    def test_purity_bit_identical(self):
        for name in SEQUENCES:
            for t in (0, 7, 33):
                a = eval_sequence(name, t)
                b = eval_sequence(name, t)
                np.testing.assert_array_equal(a, b)

    def test_unknown_sequence_raises(self):
        with pytest.raises(KeyError):
            get_sequence("minigolf_Z")

    def test_negative_index_rejected(self):
        with pytest.raises(ValueError):
            eval_sequence("minigolf_A", -1)


class TestInitialPriors:
    def test_minigolf_initial_prior_is_friction_one_normalized(self):
        seq = get_sequence("minigolf_A")
        r = LatentRange(lo=[0.01], hi=[2.0])
        expected = normalize_from_task(np.array([1.0]), r)
        np.testing.assert_allclose(seq.initial_prior.mean, expected, atol=1e-12)
        np.testing.assert_allclose(seq.initial_prior.std, [0.2])

    def test_cheetah_initial_prior(self):
        seq = get_sequence("cheetah_A")
        np.testing.assert_allclose(seq.initial_prior.mean, [1.0], atol=1e-12)
        np.testing.assert_allclose(seq.initial_prior.std, [0.1])

    def test_noise_variances(self):
        assert get_sequence("minigolf_A").noise_var == 0.001
        assert get_sequence("cheetah_A").noise_var == 1e-5
        assert get_sequence("ant_A").noise_var == 0.01


class TestSampleTestTask:
    def test_mean_matches_normalized_sequence(self):
        # with the generator pinned to zero noise the sample is the mean
        seq = get_sequence("minigolf_A")
        mean = sequence_mean_normalized(seq, 12)
        draws = [sample_test_task(seq, 12, np.random.default_rng(s)) for s in range(4000)]
        np.testing.assert_allclose(np.mean(draws, axis=0), mean, atol=0.01)

    def test_sample_std_matches_noise_variance(self):
        seq = get_sequence("minigolf_A")
        rng = np.random.default_rng(0)
        draws = np.array([sample_test_task(seq, 0, rng)[0] for _ in range(10_000)])
        assert draws.std() == pytest.approx(np.sqrt(0.001), abs=0.003)

    def test_seed_reproducibility(self):
        seq = get_sequence("ant_A")
        a = sample_test_task(seq, 3, np.random.default_rng(9))
        b = sample_test_task(seq, 3, np.random.default_rng(9))
        np.testing.assert_array_equal(a, b)
