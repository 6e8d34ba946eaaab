"""Configuration, orchestration, caching and output for runs: ``vkfsi {basis,simulate,stationary,verify}``."""

from .config import ConfigError, RunConfig, parse_config, parse_config_text
from .main import main

__all__ = ["ConfigError", "RunConfig", "parse_config", "parse_config_text", "main"]
