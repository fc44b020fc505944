import pytest

from cellflow.config import ConfigError, load_config


def test_defaults_without_file():
    config = load_config(env={})
    assert config.flow.brightness_weight == 1.0
    assert config.flow.iterations == 10
    assert config.patches.patch_size == 128
    assert config.patches.overlap_fraction == 0.25
    assert config.patches.frame_count == 10
    assert config.schedule_kind == "cosine"
    assert config.schedule_steps == 1000
    assert config.px_per_micron == 1.1939
    assert config.contrast_cutoff == 0.04
    assert config.port == 8571


def test_file_settings(tmp_path):
    path = tmp_path / "cfg.toml"
    path.write_text(
        "[flow]\niterations = 25\n"
        "[patches]\npatch_size = 64\noverlap_fraction = 0.5\n"
        "[diffusion]\nsteps = 100\nkind = \"linear-log-snr\"\n"
        "[stats]\npx_per_micron = 2.0\n"
        "[serve]\nport = 9000\n"
    )
    config = load_config(str(path), env={})
    assert config.flow.iterations == 25
    assert config.patches.patch_size == 64
    assert config.schedule_steps == 100
    assert config.schedule_kind == "linear-log-snr"
    assert config.px_per_micron == 2.0
    assert config.port == 9000


def test_unknown_key_rejected(tmp_path):
    path = tmp_path / "cfg.toml"
    path.write_text("[flow]\nitertions = 25\n")  # typo must fail fast
    with pytest.raises(ConfigError, match="itertions"):
        load_config(str(path), env={})


def test_unknown_section_rejected(tmp_path):
    path = tmp_path / "cfg.toml"
    path.write_text("[flows]\niterations = 25\n")
    with pytest.raises(ConfigError, match="flows"):
        load_config(str(path), env={})


def test_wrong_type_rejected(tmp_path):
    path = tmp_path / "cfg.toml"
    path.write_text("[flow]\niterations = \"ten\"\n")
    with pytest.raises(ConfigError):
        load_config(str(path), env={})


def test_env_config_path_and_port(tmp_path):
    path = tmp_path / "cfg.toml"
    path.write_text("[serve]\nport = 9000\n")
    config = load_config(env={"CELLFLOW_CONFIG": str(path), "CELLFLOW_PORT": "9500"})
    assert config.port == 9500  # env beats file


def test_flag_overrides_beat_env(tmp_path):
    config = load_config(
        env={"CELLFLOW_PORT": "9500"}, overrides={("serve", "port"): 9999}
    )
    assert config.port == 9999


def test_missing_config_file():
    with pytest.raises(ConfigError, match="not found"):
        load_config("/nonexistent/cfg.toml", env={})


def test_invalid_values_rejected(tmp_path):
    path = tmp_path / "cfg.toml"
    path.write_text("[flow]\niterations = 0\n")
    with pytest.raises(ConfigError):
        load_config(str(path), env={})
    path.write_text("[stats]\npx_per_micron = -1.0\n")
    with pytest.raises(ConfigError):
        load_config(str(path), env={})
    path.write_text("[diffusion]\nkind = \"exotic\"\n")
    with pytest.raises(ConfigError):
        load_config(str(path), env={})


def test_bad_env_port():
    with pytest.raises(ConfigError):
        load_config(env={"CELLFLOW_PORT": "not-a-port"})
