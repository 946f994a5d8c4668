"""Configuration loading for the radio labeling toolkit."""

import logging
import os
from enum import Enum
from typing import Dict

from dotenv import find_dotenv, load_dotenv
from pydantic import BaseModel, Field, ValidationError, field_validator

logger = logging.getLogger(__name__)

ENV_PREFIX = "RADIO_LABELING_"
LOG_LEVELS = ("DEBUG", "INFO", "WARNING", "ERROR", "CRITICAL")


class PolicyMode(str, Enum):
    """Delay policies for the gossip aggregation stage."""
    REGISTRY = "registry"
    FAITHFUL = "faithful"


class SimulationSettings(BaseModel):
    """Settings shared by every command and batch run."""

    horizon: int = Field(default=1_000_000, ge=1)
    policy: PolicyMode = PolicyMode.REGISTRY
    prime_bound: int = Field(default=10_000_000, ge=1)
    brute_force_limit: int = Field(default=10, ge=1)
    fast_forward: bool = True
    log_level: str = "INFO"
    max_concurrency: int = Field(default=4, ge=1)

    @field_validator("log_level")
    @classmethod
    def _known_level(cls, value: str) -> str:
        level = value.upper()
        if level not in LOG_LEVELS:
            raise ValueError(f"unknown log level: {value}")
        return level


_KEYS = {
    "horizon": "HORIZON",
    "policy": "POLICY",
    "prime_bound": "PRIME_BOUND",
    "brute_force_limit": "BRUTE_FORCE_LIMIT",
    "fast_forward": "FAST_FORWARD",
    "log_level": "LOG_LEVEL",
    "max_concurrency": "MAX_CONCURRENCY",
}


def load_config(env_file: bool = True) -> SimulationSettings:
    """
    Load configuration from the environment.

    Args:
        env_file: Whether to read a ``.env`` file first

    Returns:
        Validated settings

    Raises:
        SystemExit: If an environment variable holds an invalid value
    """
    if env_file:
        load_dotenv(find_dotenv(usecwd=True))

    raw: Dict[str, str] = {}
    for field_name, suffix in _KEYS.items():
        value = os.getenv(ENV_PREFIX + suffix)
        if value:
            raw[field_name] = value

    try:
        return SimulationSettings(**raw)
    except ValidationError as e:
        logger.error("Invalid configuration: %s", str(e))
        raise SystemExit(f"Invalid configuration: {e}")
