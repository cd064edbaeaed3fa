import pytest

from src.config import Config
from src.errors import ConfigError


def test_smoke_config_defaults(monkeypatch):
    """
    Smoke test = tiny test that proves the project runs.
    """
    for name in ("REGION_BUDGET", "SOLVER_BUDGET", "MERGE_MODE", "JOBS"):
        monkeypatch.delenv(name, raising=False)
    cfg = Config()

    # Check basic defaults (these should match .env.example defaults)
    assert cfg.region_budget == 2**22
    assert cfg.solver_budget == 10**6
    assert cfg.merge_mode == "sat"
    assert cfg.jobs == 1


def test_env_override(monkeypatch):
    monkeypatch.setenv("REGION_BUDGET", "1000")
    monkeypatch.setenv("MERGE_MODE", "none")
    cfg = Config()
    assert cfg.region_budget == 1000
    assert cfg.merge_mode == "none"


def test_bad_values_rejected(monkeypatch):
    monkeypatch.setenv("SOLVER_BUDGET", "0")
    with pytest.raises(ConfigError):
        Config()
    monkeypatch.delenv("SOLVER_BUDGET")
    with pytest.raises(ConfigError):
        Config(merge_mode="greedy")
