"""
gsn-shaper Configuration

Process settings come from the environment (prefix GSN_SHAPER_, or a
.env file). Experiment settings come from a TOML file plus
`--set key=value` overrides and are validated into a TrainConfig.
"""
from __future__ import annotations
from functools import lru_cache
from pathlib import Path
from typing import Any, Dict, Optional, Sequence
import os
import tomllib

from pydantic import ValidationError
from pydantic_settings import BaseSettings, SettingsConfigDict

from gsn_shaper.exceptions import ConfigError
from gsn_shaper.models.config import TrainConfig

ENV_PREFIX = "GSN_SHAPER_"


class Settings(BaseSettings):
    """Process-level settings loaded from environment variables."""

    model_config = SettingsConfigDict(env_prefix=ENV_PREFIX, env_file=".env", env_file_encoding="utf-8",
                                      extra="ignore")

    # Default output root; every command writes a run directory below it
    out: Path = Path("runs")

    # Logging
    log_level: str = "INFO"

    # Edge length of rendered PPM images
    image_size: int = 512

    # Multiplies every numeric tolerance of the verify suites
    verify_tolerance_scale: float = 1.0


@lru_cache
def get_settings() -> Settings:
    """Get cached settings instance."""
    return Settings()


def update_settings(**kwargs) -> Settings:
    """Update settings via environment variables and reload config."""
    valid_keys = set(Settings.model_fields.keys())
    for key, value in kwargs.items():
        if key not in valid_keys:
            continue
        os.environ[ENV_PREFIX + key.upper()] = str(value)

    get_settings.cache_clear()
    return get_settings()


# =============================================================================
# Experiment config
# =============================================================================

def parse_override(text: str) -> Dict[str, Any]:
    """`key=value` with the value read as a TOML scalar or array; bare words become strings."""
    key, sep, raw = text.partition("=")
    key = key.strip()
    if not sep or not key:
        raise ConfigError(f"override '{text}' is not of the form key=value", key=key or None)
    try:
        return {key: tomllib.loads(f"v = {raw.strip()}")["v"]}
    except tomllib.TOMLDecodeError:
        return {key: raw.strip()}


def _validate(values: Dict[str, Any]) -> TrainConfig:
    try:
        return TrainConfig(**values)
    except ValidationError as exc:
        error = exc.errors()[0]
        key = ".".join(str(p) for p in error["loc"]) or None
        if error["type"] == "extra_forbidden":
            raise ConfigError(f"unknown config key '{key}'", key=key) from exc
        raise ConfigError(f"invalid value for '{key}': {error['msg']}", key=key) from exc


def load_train_config(path: Optional[Path] = None, overrides: Sequence[str] = (),
                      text: Optional[str] = None) -> TrainConfig:
    """File (or literal TOML text) first, then overrides in order; overrides win."""
    values: Dict[str, Any] = {}
    if path is not None:
        path = Path(path)
        if not path.exists():
            raise FileNotFoundError(path)
        text = path.read_text(encoding="utf-8")
    if text is not None:
        try:
            values.update(tomllib.loads(text))
        except tomllib.TOMLDecodeError as exc:
            raise ConfigError(f"{path or 'config'}: {exc}") from exc
    for item in overrides:
        values.update(parse_override(item))
    return _validate(values)
