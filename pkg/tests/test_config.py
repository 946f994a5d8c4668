"""Tests for configuration loading."""

import os

import pytest
from pydantic import ValidationError

from radio_labeling.config import PolicyMode, SimulationSettings, load_config


def test_load_config_defaults():
    """Test configuration defaults with a clean environment."""
    config = load_config(env_file=False)
    assert config.horizon == 1_000_000
    assert config.policy is PolicyMode.REGISTRY
    assert config.prime_bound == 10_000_000
    assert config.brute_force_limit == 10
    assert config.fast_forward is True
    assert config.log_level == "INFO"
    assert config.max_concurrency == 4


def test_load_config_from_environment(monkeypatch):
    """Test configuration loading from environment variables."""
    monkeypatch.setenv("RADIO_LABELING_HORIZON", "5000")
    monkeypatch.setenv("RADIO_LABELING_POLICY", "faithful")
    monkeypatch.setenv("RADIO_LABELING_FAST_FORWARD", "false")
    monkeypatch.setenv("RADIO_LABELING_LOG_LEVEL", "debug")
    monkeypatch.setenv("RADIO_LABELING_MAX_CONCURRENCY", "8")

    config = load_config(env_file=False)
    assert config.horizon == 5000
    assert config.policy is PolicyMode.FAITHFUL
    assert config.fast_forward is False
    assert config.log_level == "DEBUG"
    assert config.max_concurrency == 8


@pytest.mark.parametrize(
    "key,value",
    [
        ("HORIZON", "0"),
        ("HORIZON", "soon"),
        ("POLICY", "random"),
        ("LOG_LEVEL", "LOUD"),
        ("MAX_CONCURRENCY", "0"),
    ],
)
def test_load_config_invalid_values(monkeypatch, key, value):
    """Test configuration loading with invalid values."""
    monkeypatch.setenv(f"RADIO_LABELING_{key}", value)
    with pytest.raises(SystemExit):
        load_config(env_file=False)


def test_load_config_reads_env_file(monkeypatch, tmp_path):
    """Test that a .env file in the working directory is honoured."""
    (tmp_path / ".env").write_text("RADIO_LABELING_PRIME_BOUND=1234\n")
    monkeypatch.chdir(tmp_path)
    try:
        assert load_config().prime_bound == 1234
    finally:
        os.environ.pop("RADIO_LABELING_PRIME_BOUND", None)


def test_settings_validation():
    """Test direct construction of settings."""
    with pytest.raises(ValidationError):
        SimulationSettings(prime_bound=0)
    assert SimulationSettings(log_level="warning").log_level == "WARNING"
