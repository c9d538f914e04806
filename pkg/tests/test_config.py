"""Config defaults, file parsing, overrides, and validation."""

import pytest

from segtag.config import ConfigError, RunConfig, load_config, load_resolved, parse_config_file, save_resolved


class TestRunConfig:
    def test_defaults_validate(self):
        cfg = RunConfig()
        cfg.validate()
        assert cfg["train.lr_max"] == 1e-4
        assert cfg["train.warmup_ratio"] == 32.0
        assert cfg["train.warmup_proportion"] == 0.04
        assert cfg["train.dropout"] == 0.1
        assert (cfg["train.clip_min"], cfg["train.clip_max"]) == (-1.0, 1.0)

    def test_unknown_key_rejected_by_name(self):
        with pytest.raises(ConfigError, match="ssm.mood"):
            RunConfig({"ssm.mood": "soft"})

    def test_type_coercion_from_strings(self):
        cfg = RunConfig({"ssm.k": "7", "train.lr_max": "3e-4", "ssm.invert": "true"})
        assert cfg["ssm.k"] == 7
        assert cfg["train.lr_max"] == 3e-4
        assert cfg["ssm.invert"] is True

    def test_bad_value_type_rejected(self):
        with pytest.raises(ConfigError, match="ssm.k"):
            RunConfig({"ssm.k": "many"})

    def test_choice_validation(self):
        cfg = RunConfig({"ssm.metric": "cosineish"})
        with pytest.raises(ConfigError, match="ssm.metric"):
            cfg.validate()

    def test_heads_must_divide_hidden(self):
        cfg = RunConfig({"enc.hidden": 10, "enc.heads": 3})
        with pytest.raises(ConfigError, match="hidden"):
            cfg.validate()

    def test_topk_bounded_by_beam(self):
        cfg = RunConfig({"infer.top_k": 30, "infer.beam_size": 20})
        with pytest.raises(ConfigError, match="top_k"):
            cfg.validate()


class TestConfigFile:
    def test_parse_and_override(self, tmp_path):
        path = tmp_path / "run.cfg"
        path.write_text(
            "# comment line\n"
            "ssm.mode = hard\n"
            "ssm.k = 4  # inline comment\n"
            "\n"
            "train.total_steps = 50\n"
        )
        cfg = load_config(path, overrides={"ssm.k": "9"})  # flag wins
        assert cfg["ssm.mode"] == "hard"
        assert cfg["ssm.k"] == 9
        assert cfg["train.total_steps"] == 50

    def test_malformed_line_reports_location(self, tmp_path):
        path = tmp_path / "run.cfg"
        path.write_text("just words\n")
        with pytest.raises(ConfigError, match="run.cfg:1"):
            parse_config_file(path)

    def test_resolved_round_trip(self, tmp_path):
        cfg = load_config(None, {"ssm.k": "3"})
        save_resolved(cfg, tmp_path / "r.json", extra={"vocab_size": 42})
        back, extra = load_resolved(tmp_path / "r.json")
        assert back.as_dict() == cfg.as_dict()
        assert extra["vocab_size"] == 42
