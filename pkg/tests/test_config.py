"""Flat key=value config parsing, validation and builders."""

import pytest

from fedsampler.config import ConfigError, ExperimentConfig, parse_kv


GOOD = """
# regression comparison
strategy = delta
m = 12
cohort_size = 4
noise_std = 25
rounds = 50
seeds = 0, 1, 2
local_lr = 0.002
"""


class TestParseKv:
    def test_basic_pairs_and_comments(self):
        pairs = parse_kv("a = 1  # trailing\n# whole line\n\nb=two\n")
        assert pairs == {"a": "1", "b": "two"}

    def test_missing_equals_names_the_line(self):
        with pytest.raises(ConfigError, match="line 2"):
            parse_kv("a = 1\nnonsense\n")


class TestFromText:
    def test_good_config(self):
        cfg = ExperimentConfig.from_text(GOOD)
        assert cfg.strategy == "delta"
        assert cfg.m == 12
        assert cfg.seeds == (0, 1, 2)
        assert cfg.local_lr == 0.002

    def test_defaults_fill_in(self):
        cfg = ExperimentConfig.from_text("strategy = uniform\n")
        assert cfg.rounds == 2000
        assert cfg.replacement == "without"

    def test_unknown_key_named(self):
        with pytest.raises(ConfigError, match="'warp_speed'"):
            ExperimentConfig.from_text("warp_speed = 9\n")

    def test_unparseable_value_named(self):
        with pytest.raises(ConfigError, match="'rounds'"):
            ExperimentConfig.from_text("rounds = soon\n")

    @pytest.mark.parametrize("line,field", [
        ("strategy = best", "strategy"),
        ("model = tree", "model"),
        ("replacement = maybe", "replacement"),
        ("noise_profile = wavy", "noise_profile"),
        ("rounds = 0", "rounds"),
        ("cohort_size = 99", "cohort_size"),
        ("local_lr = -1", "local_lr"),
        ("momentum_gamma = 1.0", "momentum_gamma"),
        ("min_prob_mix = 1.5", "min_prob_mix"),
        ("seeds =", "seeds"),
    ])
    def test_validation_names_exactly_one_field(self, line, field):
        with pytest.raises(ConfigError, match=f"'{field}'"):
            ExperimentConfig.from_text(line + "\n")


class TestBuilders:
    def test_regression_builders(self):
        cfg = ExperimentConfig.from_text("strategy = fedis\nm = 5\ncohort_size = 2\n")
        clients = cfg.build_clients(0)
        assert len(clients) == 5
        assert cfg.model_spec().kind == "regression"
        assert cfg.round_config().cohort_size == 2
        assert cfg.strategy_config().name == "fedis"

    def test_classification_builders(self):
        cfg = ExperimentConfig.from_text(
            "model = logistic\ndata = dirichlet\nclasses = 3\n"
            "m = 4\ncohort_size = 2\ntotal_samples = 100\n")
        clients = cfg.build_clients(0)
        assert sum(c.n_examples for c in clients) == 100
        assert cfg.model_spec().n_classes == 3

    def test_strategy_knobs_plumbed(self):
        cfg = ExperimentConfig.from_text(
            "strategy = delta\nreplacement = with\nalpha1 = 0.7\nalpha2 = 0.3\n"
            "reuse_probe = true\nmin_prob_mix = 0.2\n")
        sc = cfg.strategy_config()
        assert sc.replacement == "with"
        assert sc.delta.alpha1 == 0.7
        assert sc.reuse_probe is True
        assert sc.min_prob_mix == 0.2

    def test_from_file(self, tmp_path):
        path = tmp_path / "exp.cfg"
        path.write_text(GOOD)
        assert ExperimentConfig.from_file(path).m == 12
