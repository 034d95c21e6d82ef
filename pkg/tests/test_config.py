"""Tests for the run configuration and environment settings."""

from pathlib import Path

import pytest
import yaml

from mssd.config import RunConfig, get_settings, resolve_run_config
from mssd.core.errors import ConfigurationError

pytestmark = pytest.mark.unit

PROJECT_ROOT = Path(__file__).resolve().parents[1]


class TestRunConfig:
    def test_defaults(self):
        config = RunConfig()
        assert (config.input_len, config.horizon) == (96, 24)
        assert config.fill_policy == "forward-fill"
        assert config.split_fractions == (0.7, 0.1, 0.2)
        assert config.causal_conv and config.global_block

    def test_shipped_default_file_matches_defaults(self):
        assert RunConfig.load(PROJECT_ROOT / "config" / "mssd_default.yml") == RunConfig()

    def test_unknown_key(self):
        with pytest.raises(ConfigurationError) as excinfo:
            RunConfig.from_mapping({"epochs": 3, "learning_rate": 0.1})
        assert "learning_rate" in excinfo.value.message

    @pytest.mark.parametrize(
        "values",
        [
            {"epochs": 0},
            {"dropout": 1.0},
            {"fill_policy": "interpolate"},
            {"split_fractions": [0.5, 0.1, 0.1]},
            {"linear_init": "random"},
            {"noise_ratios": [0.0, 1.0]},
            {"noise_ratios": [-0.1]},
            {"horizons": [24, 0]},
        ],
    )
    def test_invalid_values(self, values):
        with pytest.raises(ConfigurationError):
            RunConfig.from_mapping(values)

    def test_data_must_exist(self, tmp_path, write_csv):
        with pytest.raises(ConfigurationError):
            RunConfig.from_mapping({"data": str(tmp_path / "missing.csv")})
        path = write_csv("a\n1\n")
        assert RunConfig.from_mapping({"data": str(path)}).data == str(path)

    def test_dump_then_load(self, tmp_path, write_csv):
        config = RunConfig.from_mapping(
            {"data": str(write_csv("a\n1\n")), "kernel_scales": [3, 4, 6], "num_heads": 3, "lr": 0.0005, "seed": 9}
        )
        path = config.dump(tmp_path / "nested" / "run.yml")
        assert RunConfig.load(path) == config

    def test_yaml_carries_comments(self):
        text = RunConfig().to_yaml()
        lines = text.splitlines()
        index = lines.index("input_len: 96")
        assert lines[index - 1] == "# Input length I"
        assert isinstance(yaml.safe_load(text), dict)

    def test_load_rejects_non_mapping(self, tmp_path):
        path = tmp_path / "list.yml"
        path.write_text("- 1\n- 2\n")
        with pytest.raises(ConfigurationError):
            RunConfig.load(path)
        with pytest.raises(ConfigurationError):
            RunConfig.load(tmp_path / "absent.yml")

    def test_empty_file_gives_defaults(self, tmp_path):
        path = tmp_path / "empty.yml"
        path.write_text("")
        assert RunConfig.load(path) == RunConfig()

    def test_overrides_skip_none(self):
        config = RunConfig().with_overrides({"epochs": 5, "horizon": None})
        assert config.epochs == 5
        assert config.horizon == 24

    def test_overrides_are_validated(self):
        with pytest.raises(ConfigurationError):
            RunConfig().with_overrides({"batch_size": 0})

    def test_model_config_mismatch(self):
        config = RunConfig(num_heads=3, kernel_scales=[2, 3])
        with pytest.raises(ConfigurationError):
            config.mssd_config(1)

    def test_input_not_whole_days(self):
        with pytest.raises(ConfigurationError):
            RunConfig(input_len=30).mssd_config(1)

    def test_derived_configs(self):
        config = RunConfig(input_len=48, horizon=12, epochs=7, tcn_channels=8)
        model = config.mssd_config(2)
        assert model.samples_per_hour == 2
        assert model.sdnet.tcn_channels == 8
        assert config.train_config().epochs == 7
        spec = config.window_spec()
        assert (spec.input_len, spec.horizon) == (48, 12)
        assert config.window_spec(36).horizon == 36


class TestResolve:
    def test_precedence(self, tmp_path):
        path = tmp_path / "run.yml"
        path.write_text("seed: 1\nepochs: 4\nhorizon: 48\n")
        assert resolve_run_config(path, {}).seed == 1
        assert resolve_run_config(path, {}, env_seed=2).seed == 2
        config = resolve_run_config(path, {"seed": 3, "horizon": None}, env_seed=2)
        assert (config.seed, config.epochs, config.horizon) == (3, 4, 48)

    def test_without_file(self):
        assert resolve_run_config(None, {"epochs": 2}).epochs == 2


class TestSettings:
    def test_defaults(self, tmp_path, monkeypatch):
        monkeypatch.chdir(tmp_path)
        settings = get_settings()
        assert settings.SEED is None
        assert settings.LOG_LEVEL == "INFO"
        assert settings.JOBS == 1

    def test_environment(self, tmp_path, monkeypatch):
        monkeypatch.chdir(tmp_path)
        monkeypatch.setenv("MSSD_SEED", "17")
        monkeypatch.setenv("MSSD_JOBS", "4")
        monkeypatch.setenv("MSSD_OUTPUT_DIR", "elsewhere")
        settings = get_settings()
        assert (settings.SEED, settings.JOBS, settings.OUTPUT_DIR) == (17, 4, "elsewhere")

    def test_dotenv_file(self, tmp_path, monkeypatch):
        monkeypatch.chdir(tmp_path)
        (tmp_path / ".env").write_text("MSSD_LOG_LEVEL=DEBUG\n")
        assert get_settings().LOG_LEVEL == "DEBUG"
