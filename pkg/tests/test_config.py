import logging

import pytest

from triolab.config import ConfigError, ExperimentConfig


class TestDefaults:
    @pytest.mark.parametrize("family", ["minigolf", "velocity1d", "goalreacher2d"])
    def test_default_config_builds_typed_objects(self, family):
        cfg = ExperimentConfig.default(family)
        spec = cfg.env_spec()
        assert spec.family == family
        hp = cfg.hyperprior()
        assert hp.dim == spec.latent_dim
        tc = cfg.train_config(seed=3)
        assert tc.seed == 3
        gp = cfg.gp_config()
        assert gp.restarts == 8
        assert gp.max_iters == 200

    def test_family_specific_table_defaults(self):
        golf = ExperimentConfig.default("minigolf")
        assert golf.ppo_config().lr == 5e-5
        assert golf.ppo_config().batch_size == 1280
        assert golf.ppo_config().entropy_coef == 0.0
        assert golf.values["inference"]["kl_weight"] == 1.0
        cheetah = ExperimentConfig.default("velocity1d")
        assert cheetah.ppo_config().lr == 7e-4
        assert cheetah.ppo_config().batch_size == 6400
        assert cheetah.ppo_config().epochs == 2
        assert cheetah.values["train"]["policy_hidden"] == 128
        assert cheetah.values["inference"]["kl_weight"] == 0.1

    def test_unknown_family_rejected(self):
        with pytest.raises(ConfigError):
            ExperimentConfig.default("chess")


class TestFromFile:
    def test_overrides_applied(self, tmp_path):
        path = tmp_path / "exp.ini"
        path.write_text("[env]\nfamily = minigolf\n\n[train]\niterations = 7\n\n[ppo]\nlr = 0.001\n")
        cfg = ExperimentConfig.from_file(str(path))
        assert cfg.values["train"]["iterations"] == 7
        assert cfg.ppo_config().lr == 0.001
        # untouched keys fall back to family defaults
        assert cfg.ppo_config().batch_size == 1280

    def test_unknown_key_rejected(self, tmp_path):
        path = tmp_path / "exp.ini"
        path.write_text("[ppo]\nlearning_rate = 0.01\n")
        with pytest.raises(ConfigError):
            ExperimentConfig.from_file(str(path))

    def test_unknown_section_rejected(self, tmp_path):
        path = tmp_path / "exp.ini"
        path.write_text("[optimizer]\nlr = 0.01\n")
        with pytest.raises(ConfigError):
            ExperimentConfig.from_file(str(path))

    def test_syntax_error_reported(self, tmp_path):
        path = tmp_path / "exp.ini"
        path.write_text("[env\nfamily = minigolf\n")
        with pytest.raises(ConfigError):
            ExperimentConfig.from_file(str(path))

    def test_missing_file_rejected(self, tmp_path):
        with pytest.raises(ConfigError):
            ExperimentConfig.from_file(str(tmp_path / "absent.ini"))

    def test_bad_value_type_rejected(self, tmp_path):
        path = tmp_path / "exp.ini"
        path.write_text("[train]\niterations = soon\n")
        with pytest.raises(ConfigError):
            ExperimentConfig.from_file(str(path))

    def test_vector_values_parsed(self, tmp_path):
        path = tmp_path / "exp.ini"
        path.write_text("[env]\nfamily = goalreacher2d\n\n[hyperprior]\nvar_lo = 0.2, 0.3\n")
        cfg = ExperimentConfig.from_file(str(path))
        assert cfg.values["hyperprior"]["var_lo"] == [0.2, 0.3]

    def test_missing_keys_noticed_in_log(self, tmp_path, caplog):
        path = tmp_path / "exp.ini"
        path.write_text("[train]\niterations = 3\n")
        with caplog.at_level(logging.INFO, logger="triolab.config"):
            ExperimentConfig.from_file(str(path))
        assert any("using default" in rec.message for rec in caplog.records)

    def test_bool_parsing(self, tmp_path):
        path = tmp_path / "exp.ini"
        path.write_text("[train]\noff_prior = false\n")
        cfg = ExperimentConfig.from_file(str(path))
        assert cfg.values["train"]["off_prior"] is False

    def test_distractors_minigolf_only(self, tmp_path):
        path = tmp_path / "exp.ini"
        path.write_text("[env]\nfamily = velocity1d\ndistractors = 2\n")
        cfg = ExperimentConfig.from_file(str(path))
        with pytest.raises(ConfigError):
            cfg.env_spec()


class TestRoundTrip:
    def test_ini_text_reparses_identically(self, tmp_path):
        cfg = ExperimentConfig.default("minigolf")
        cfg.values["train"]["iterations"] = 42
        text = cfg.to_ini_text()
        path = tmp_path / "snap.ini"
        path.write_text(text)
        again = ExperimentConfig.from_file(str(path))
        assert again.values == cfg.values
