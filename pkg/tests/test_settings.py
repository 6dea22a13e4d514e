import pytest

import settings
from errors import ConfigError
from settings import SolverLimits, load_limits


def test_defaults():
    limits = SolverLimits()
    assert limits.dw_max_terminals == 14
    assert limits.witness_max_terminals == 7
    assert limits.time_budget is None


def test_component_size_cap():
    limits = SolverLimits()
    assert limits.component_size_cap(10, 3) == 6
    assert limits.component_size_cap(4, 3) == 4
    assert SolverLimits(max_component_size=2).component_size_cap(10, 3) == 2


def test_environment_and_overrides(monkeypatch):
    monkeypatch.setenv("LS_NODE_BUDGET", "77")
    monkeypatch.setenv("LS_TIME_BUDGET", "none")
    limits = load_limits()
    assert limits.node_budget == 77
    assert limits.time_budget is None
    assert load_limits(node_budget=5, time_budget=None).node_budget == 5


def test_invalid_limits(monkeypatch):
    with pytest.raises(ConfigError):
        load_limits(node_budget=0)
    monkeypatch.setenv("LS_WITNESS_MAX_TERMINALS", "lots")
    with pytest.raises(ConfigError):
        load_limits()


def test_get_limits_is_cached(monkeypatch):
    monkeypatch.setattr(settings, "_limits_instance", None)
    assert settings.get_limits() is settings.get_limits()
