"""
Limits and configuration for the local search solvers
Defaults live on the SolverLimits model; every field can be overridden with an
LS_<FIELD> environment variable (a .env file in the working directory is honoured).
Explicit overrides passed by the CLI take precedence over the environment.
"""

import os
import logging
from typing import Optional

from dotenv import load_dotenv
from pydantic import BaseModel, Field, ValidationError, field_validator

from errors import ConfigError

# Load environment variables from .env file
load_dotenv()

logger = logging.getLogger(__name__)

ENV_PREFIX = "LS_"


class SolverLimits(BaseModel):
    """
    Size caps and budgets for the exact routines
    Exceeding a cap is always an explicit error, never a silent degradation
    """

    max_shadow_links: int = Field(default=1_000_000, ge=1)
    node_budget: int = Field(default=2_000_000, ge=1)
    # None means min(|L|, 2k)
    max_component_size: Optional[int] = Field(default=None, ge=1)
    dw_max_terminals: int = Field(default=14, ge=1)
    witness_max_terminals: int = Field(default=7, ge=2)
    oracle_max_links: int = Field(default=22, ge=0)
    oracle_component_max_links: int = Field(default=12, ge=0)
    oracle_drop_max_pairs: int = Field(default=8, ge=0)
    krestricted_max_terminals: int = Field(default=6, ge=1)
    time_budget: Optional[float] = Field(default=None, gt=0)

    @field_validator('time_budget', mode='before')
    @classmethod
    def empty_budget_is_unlimited(cls, v):
        if isinstance(v, str) and v.strip().lower() in ('', 'none', 'off'):
            return None
        return v

    def component_size_cap(self, link_count: int, k: int) -> int:
        """Size cap for the branch-and-bound (default min(|L|, 2k))"""
        if self.max_component_size is not None:
            return self.max_component_size
        return max(1, min(link_count, 2 * k))


def _env_values() -> dict:
    """Collect LS_* variables that name a SolverLimits field"""
    values = {}
    for name in SolverLimits.model_fields:
        raw = os.getenv(ENV_PREFIX + name.upper())
        if raw is not None:
            values[name] = raw
    return values


def load_limits(**overrides) -> SolverLimits:
    """
    Build limits from defaults, environment and explicit overrides

    Args:
        overrides: field values; None entries are ignored so that unset CLI
            flags fall through to the environment

    Returns:
        Validated SolverLimits
    """
    values = _env_values()
    values.update({key: value for key, value in overrides.items() if value is not None})
    try:
        limits = SolverLimits(**values)
    except ValidationError as e:
        raise ConfigError(f"invalid limits: {e}") from e
    if values:
        logger.debug(f"Limits loaded with overrides: {sorted(values)}")
    return limits


_limits_instance = None


def get_limits() -> SolverLimits:
    """
    Get the process-wide default limits (singleton)

    Returns:
        SolverLimits read once from the environment
    """
    global _limits_instance
    if _limits_instance is None:
        _limits_instance = load_limits()
    return _limits_instance
