"""Configuration management for biotprecond runs."""

import json
import logging
import os
from enum import Enum
from pathlib import Path
from typing import Any, Dict, List, Optional, Union

import yaml
from pydantic import Field, ValidationError, field_validator
from pydantic_settings import BaseSettings, SettingsConfigDict

from .exceptions import ConfigurationError
from .models import ResidualMeasure

ENV_PREFIX = "BIOTPRECOND_"


class ConfigSource(str, Enum):
    """Configuration source enumeration."""

    ENVIRONMENT = "environment"
    FILE = "file"
    CLI = "cli"
    DEFAULT = "default"


class SolverConfig(BaseSettings):
    """Krylov solver settings shared by every experiment."""

    model_config = SettingsConfigDict(env_prefix="BIOTPRECOND_SOLVER_")
    tol: float = Field(1e-9, gt=0.0)
    maxiter: int = Field(500, ge=1)
    seed: int = 0
    residual_check_interval: int = Field(25, ge=1)
    drift_factor: float = Field(10.0, ge=1.0)
    residual_measure: ResidualMeasure = ResidualMeasure.SQUARED


class SweepConfig(BaseSettings):
    """Parameter sweep of the iteration-count experiments."""

    model_config = SettingsConfigDict(env_prefix="BIOTPRECOND_SWEEP_")
    n_list: List[int] = Field(default_factory=lambda: [4, 8, 16])
    lambda_list: List[float] = Field(default_factory=lambda: [1.0, 1e2, 1e4, 1e6, 1e8, 1e10])
    alpha_list: List[float] = Field(default_factory=lambda: [1.0, 1e-2, 1e-4])
    kappa_list: List[float] = Field(default_factory=lambda: [1.0, 1e-4, 1e-8])
    mu: float = Field(0.5, gt=0.0)
    dt: float = Field(1.0, gt=0.0)
    s0: Optional[float] = Field(None, gt=0.0)
    jobs: int = Field(1, ge=1)

    @field_validator("n_list")
    @classmethod
    def validate_n_list(cls, v):
        """Mesh sizes must be positive."""
        if any(n < 1 for n in v):
            raise ValueError(f"Mesh sizes must be positive, got {v}")
        return v


class VerifyConfig(BaseSettings):
    """Settings of the verification suite."""

    model_config = SettingsConfigDict(env_prefix="BIOTPRECOND_VERIFY_")
    n: int = Field(4, ge=1, le=8)
    lambda_list: List[float] = Field(
        default_factory=lambda: [1e-4, 1e-2, 1.0, 1e2, 1e4, 1e8, 1e12]
    )
    mu: float = Field(0.5, gt=0.0)
    plateau_tol: float = Field(1e-3, gt=0.0)
    negative_control_lambda: float = Field(1e12, gt=0.0)
    negative_control_threshold: float = Field(1e-8, gt=0.0)
    infsup_n_list: List[int] = Field(default_factory=lambda: [2, 4])
    infsup_lambda_list: List[float] = Field(default_factory=lambda: [1.0, 1e4, 1e8])
    infsup_alpha_list: List[float] = Field(default_factory=lambda: [1.0, 1e-4])
    infsup_kappa_list: List[float] = Field(default_factory=lambda: [1.0, 1e-4])
    infsup_spread_limit: float = Field(2.0, ge=1.0)
    stability_n_list: List[int] = Field(default_factory=lambda: [1, 2])
    stability_samples: int = Field(20, ge=1)
    condition_n: int = Field(8, ge=1, le=16)
    condition_limit: float = Field(10.0, ge=1.0)
    lanczos_iters: int = Field(80, ge=2)


class LoggingConfig(BaseSettings):
    """Logging configuration."""

    model_config = SettingsConfigDict(env_prefix="BIOTPRECOND_LOGGING_")
    level: str = "WARNING"
    format: str = "%(asctime)s - %(name)s - %(levelname)s - %(message)s"
    file_path: Optional[str] = None
    enable_console: bool = True

    @field_validator("level")
    @classmethod
    def validate_level(cls, v):
        """Normalize and check the level name."""
        level = str(v).upper()
        if level not in ("DEBUG", "INFO", "WARNING", "ERROR", "CRITICAL"):
            raise ValueError(f"Unknown log level: {v}")
        return level


class RunConfig(BaseSettings):
    """Top-level configuration of a run."""

    solver: SolverConfig = Field(default_factory=SolverConfig)
    sweep: SweepConfig = Field(default_factory=SweepConfig)
    verify: VerifyConfig = Field(default_factory=VerifyConfig)
    logging: LoggingConfig = Field(default_factory=LoggingConfig)

    model_config = SettingsConfigDict(
        env_file=".env",
        env_file_encoding="utf-8",
        case_sensitive=False,
        env_prefix=ENV_PREFIX,
        extra="ignore",
    )


class ConfigManager:
    """Load, track and persist a :class:`RunConfig`."""

    def __init__(self, config_path: Optional[Union[str, Path]] = None):
        self._config: Optional[RunConfig] = None
        self._config_path = Path(config_path) if config_path else None
        self._sources: Dict[str, ConfigSource] = {}

    def load(
        self, config_path: Optional[Union[str, Path]] = None, force_reload: bool = False
    ) -> RunConfig:
        """Load configuration from a file with environment overrides on top.

        Args:
            config_path: Optional path to a YAML or JSON file.
            force_reload: Force reload even if already loaded.

        Returns:
            RunConfig: Loaded configuration.

        Raises:
            FileNotFoundError: If an explicitly given file does not exist.
            ConfigurationError: If the file cannot be parsed or validated.
        """
        if self._config and not force_reload:
            return self._config

        config_file_path = config_path or self._config_path
        config_dict: Dict[str, Any] = {}
        self._sources = {}

        if config_file_path:
            config_file_path = Path(config_file_path)
            if config_file_path.exists():
                config_dict.update(self._load_from_file(config_file_path))
                for section, values in config_dict.items():
                    for key in values if isinstance(values, dict) else ():
                        self._sources[f"{section}.{key}"] = ConfigSource.FILE
            elif config_path:
                raise FileNotFoundError(f"Configuration file not found: {config_file_path}")

        sections = {
            "solver": SolverConfig,
            "sweep": SweepConfig,
            "verify": VerifyConfig,
            "logging": LoggingConfig,
        }
        try:
            # environment variables win over file values
            built = {
                name: cls(**{**(config_dict.get(name) or {}), **self._env_values(name, cls)})
                for name, cls in sections.items()
            }
            self._config = RunConfig(**built)
        except ValidationError as e:
            raise ConfigurationError(f"Invalid configuration: {e}") from e

        for name, cls in sections.items():
            for field_name in cls.model_fields:
                key = f"{name}.{field_name}"
                if f"{ENV_PREFIX}{name}_{field_name}".upper() in os.environ:
                    self._sources[key] = ConfigSource.ENVIRONMENT
                elif key not in self._sources:
                    self._sources[key] = ConfigSource.DEFAULT
        return self._config

    @staticmethod
    def _env_values(section: str, cls) -> Dict[str, Any]:
        # only the fields actually set in the environment
        return {
            name: value
            for name, value in cls().model_dump().items()
            if f"{ENV_PREFIX}{section}_{name}".upper() in os.environ
        }

    def _load_from_file(self, file_path: Path) -> Dict[str, Any]:
        """Read a YAML or JSON file.

        Raises:
            ConfigurationError: If the format is unsupported or invalid.
        """
        try:
            with open(file_path, encoding="utf-8") as f:
                if file_path.suffix.lower() in [".yml", ".yaml"]:
                    data = yaml.safe_load(f) or {}
                elif file_path.suffix.lower() == ".json":
                    data = json.load(f) or {}
                else:
                    raise ConfigurationError(
                        f"Unsupported config file format: {file_path.suffix}",
                        config_key=str(file_path),
                    )
        except yaml.YAMLError as e:
            raise ConfigurationError(f"Invalid YAML in config file: {e}") from e
        except json.JSONDecodeError as e:
            raise ConfigurationError(f"Invalid JSON in config file: {e}") from e
        if not isinstance(data, dict):
            raise ConfigurationError("Config file must contain a mapping", config_key=str(file_path))
        return data

    def get_config(self) -> RunConfig:
        """Get the current configuration.

        Raises:
            RuntimeError: If configuration not loaded.
        """
        if not self._config:
            raise RuntimeError("Configuration not loaded. Call load() first.")
        return self._config

    def reload(self) -> RunConfig:
        return self.load(force_reload=True)

    def get_source(self, field_name: str) -> ConfigSource:
        """Source of a dotted field such as ``solver.tol``."""
        return self._sources.get(field_name, ConfigSource.DEFAULT)

    def apply_overrides(self, section: str, **values: Any) -> RunConfig:
        """Replace fields of one section, skipping ``None`` values.

        Raises:
            ConfigurationError: If a value fails validation.
        """
        config = self.get_config()
        values = {k: v for k, v in values.items() if v is not None}
        if not values:
            return config
        current = getattr(config, section)
        try:
            updated = type(current)(**{**current.model_dump(), **values})
        except ValidationError as e:
            raise ConfigurationError(f"Invalid {section} override: {e}", config_key=section) from e
        self._config = config.model_copy(update={section: updated})
        for key in values:
            self._sources[f"{section}.{key}"] = ConfigSource.CLI
        return self._config

    def validate_required_settings(self) -> Dict[str, str]:
        """Report settings that are valid one by one but inconsistent together.

        Returns:
            Dict mapping dotted field names to error messages.
        """
        errors = {}
        config = self.get_config()
        if config.solver.residual_check_interval > config.solver.maxiter:
            errors["solver.residual_check_interval"] = (
                "Residual check interval exceeds maxiter; only the exit check will run"
            )
        if any(lam == 0.0 for lam in config.sweep.lambda_list) and config.sweep.s0 is None:
            errors["sweep.s0"] = "lambda = 0 in the sweep requires an explicit s0"
        if len(config.verify.lambda_list) < 2:
            errors["verify.lambda_list"] = "The plateau check needs at least two lambda values"
        return errors

    def to_dict(self) -> Dict[str, Any]:
        return self.get_config().model_dump()

    def save_to_file(self, file_path: Union[str, Path], format: str = "yaml") -> None:
        """Save the current configuration to a YAML or JSON file.

        Raises:
            ConfigurationError: On an unsupported format.
        """
        config_dict = self.get_config().model_dump(mode="json")
        file_path = Path(file_path)
        with open(file_path, "w", encoding="utf-8") as f:
            if format.lower() == "yaml":
                yaml.safe_dump(config_dict, f, default_flow_style=False, indent=2)
            elif format.lower() == "json":
                json.dump(config_dict, f, indent=2, default=str)
            else:
                raise ConfigurationError(f"Unsupported format: {format}", config_key="format")


def configure_logging(config: LoggingConfig) -> logging.Logger:
    """Attach handlers to the package logger according to ``config``."""
    logger = logging.getLogger("biotprecond")
    logger.setLevel(config.level)
    for handler in list(logger.handlers):
        logger.removeHandler(handler)
        handler.close()
    formatter = logging.Formatter(config.format)
    if config.enable_console:
        console = logging.StreamHandler()
        console.setFormatter(formatter)
        logger.addHandler(console)
    if config.file_path:
        file_handler = logging.FileHandler(config.file_path, encoding="utf-8")
        file_handler.setFormatter(formatter)
        logger.addHandler(file_handler)
    if not logger.handlers:
        logger.addHandler(logging.NullHandler())
    logger.propagate = False
    return logger


# Global configuration manager instance
_config_manager: Optional[ConfigManager] = None


def get_config_manager() -> ConfigManager:
    """Get the global configuration manager instance."""
    global _config_manager
    if _config_manager is None:
        _config_manager = ConfigManager()
    return _config_manager


def get_config() -> RunConfig:
    return get_config_manager().get_config()


def load_config(config_path: Optional[Union[str, Path]] = None) -> RunConfig:
    """Load configuration from file and environment."""
    return get_config_manager().load(config_path, force_reload=True)
