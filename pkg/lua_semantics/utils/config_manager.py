"""
Configuration management for the Lua reduction-semantics engine.

This module provides functionality to load, validate, and manage the
settings that control running, tracing and conformance testing.
"""

import json
from pathlib import Path
from typing import Any, Dict, Optional

import yaml

from lua_semantics.core.terms import LuaSemanticsError
from lua_semantics.utils.logging_utils import get_logger


class ConfigurationError(LuaSemanticsError):
    """Exception raised for unreadable or invalid configuration files."""
    pass


class ConfigManager:
    """Manager for engine configuration."""

    DEFAULT_CONFIG = {
        # Machine settings
        'fuel': 10_000_000,
        'corpus_fuel': 2_000_000,

        # Trace settings
        'max_print_depth': 6,
        'trace_store_summary': True,

        # Conformance settings
        'parallel': True,
        'max_worker_threads': 4,
        'chunk_name_mode': 'path',

        # Logging settings
        'log_level': 'WARNING',
        'log_file': None,
    }

    CHUNK_NAME_MODES = ('path', 'name')

    def __init__(self, config_path: Optional[str] = None):
        """
        Initialize configuration manager.

        Args:
            config_path: Optional YAML or JSON file layered over the defaults
        """
        self.config: Dict[str, Any] = self.DEFAULT_CONFIG.copy()
        self.logger = get_logger("utils.config_manager")
        if config_path:
            self.load_config(config_path)

    def load_config(self, config_path: str) -> Dict[str, Any]:
        """
        Load configuration from file.

        Args:
            config_path: Path to a ``.yaml``/``.yml`` or ``.json`` file

        Returns:
            The effective configuration

        Raises:
            ConfigurationError: If the file is missing, unsupported or malformed
        """
        path = Path(config_path)

        if not path.exists():
            raise ConfigurationError(f"Config file not found: {config_path}")

        suffix = path.suffix.lower()
        try:
            with open(path, 'r') as f:
                if suffix in ('.yaml', '.yml'):
                    loaded_config = yaml.safe_load(f)
                elif suffix == '.json':
                    loaded_config = json.load(f)
                else:
                    raise ConfigurationError(f"Unsupported config format {path.suffix}")
        except (yaml.YAMLError, json.JSONDecodeError) as e:
            raise ConfigurationError(f"Error loading config {config_path}: {e}") from e

        if loaded_config is None:
            loaded_config = {}
        if not isinstance(loaded_config, dict):
            raise ConfigurationError(f"Config file {config_path} must contain a mapping")

        self.config = self.merge_configs(self.config, loaded_config)
        self.logger.info(f"Loaded configuration from {config_path}")
        return self.config

    def save_config(self, config_path: str) -> bool:
        """Save current configuration to file."""
        path = Path(config_path)
        path.parent.mkdir(parents=True, exist_ok=True)

        if path.suffix.lower() in ('.yaml', '.yml'):
            with open(path, 'w') as f:
                yaml.safe_dump(self.config, f, default_flow_style=False, sort_keys=False)
        elif path.suffix.lower() == '.json':
            with open(path, 'w') as f:
                json.dump(self.config, f, indent=2)
        else:
            self.logger.warning(f"Unsupported config format {path.suffix}")
            return False

        return True

    def get(self, key: str, default: Any = None) -> Any:
        """Get configuration value."""
        return self.config.get(key, default)

    def set(self, key: str, value: Any) -> None:
        """Set configuration value."""
        self.config[key] = value

    def update(self, config_dict: Dict[str, Any]) -> None:
        """Update configuration with the non-None entries of a dictionary.

        Command-line flags that were not given arrive as None and must not
        mask values from the configuration file.
        """
        self.config.update({k: v for k, v in config_dict.items() if v is not None})

    def merge_configs(self, base_config: Dict[str, Any], override_config: Dict[str, Any]) -> Dict[str, Any]:
        """Merge two configurations, with override_config taking precedence."""
        result = base_config.copy()

        for key, value in override_config.items():
            if isinstance(value, dict) and key in result and isinstance(result[key], dict):
                result[key] = self.merge_configs(result[key], value)
            else:
                result[key] = value

        return result

    def validate(self) -> Dict[str, str]:
        """Validate configuration and return any issues keyed by setting."""
        issues = {}

        for key in ('fuel', 'corpus_fuel', 'max_worker_threads', 'max_print_depth'):
            value = self.config.get(key)
            if not isinstance(value, int) or isinstance(value, bool) or value <= 0:
                issues[key] = f"{key} must be a positive integer"

        for key in ('parallel', 'trace_store_summary'):
            if not isinstance(self.config.get(key), bool):
                issues[key] = f"{key} must be true or false"

        if self.config.get('chunk_name_mode') not in self.CHUNK_NAME_MODES:
            issues['chunk_name_mode'] = "chunk_name_mode must be 'path' or 'name'"

        level = self.config.get('log_level')
        if not isinstance(level, str) or level.upper() not in ('DEBUG', 'INFO', 'WARNING', 'ERROR', 'CRITICAL'):
            issues['log_level'] = "log_level must be one of DEBUG, INFO, WARNING, ERROR, CRITICAL"

        return issues

    def generate_default_config(self, config_path: str) -> bool:
        """Generate default configuration file."""
        self.config = self.DEFAULT_CONFIG.copy()
        return self.save_config(config_path)
