#!/usr/bin/env python3
"""
Configuration management for WMLG Lab.
Handles YAML and key=value run configuration files and the typed settings
sections used by the quadrature engine, the Monte Carlo lab and the
variation reports.
"""

import hashlib
import json
import logging
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import Any, Dict, Optional, Tuple

import yaml

from ..errors import ConfigError


@dataclass
class QuadratureSettings:
    """Grid sizes and tolerances for analytic integration."""
    prob_nodes: int = 4097
    joint_nodes: int = 513
    rtol: float = 1e-8
    joint_rtol: float = 1e-6
    max_refinements: int = 3
    normal_score_bound: float = 8.0
    centered_kappa: bool = True

    def __post_init__(self):
        if self.prob_nodes < 5 or self.prob_nodes % 2 == 0:
            raise ConfigError(f"prob_nodes must be odd and >= 5, got {self.prob_nodes}")
        if self.joint_nodes < 5 or self.joint_nodes % 2 == 0:
            raise ConfigError(f"joint_nodes must be odd and >= 5, got {self.joint_nodes}")
        if self.rtol <= 0 or self.joint_rtol <= 0:
            raise ConfigError("quadrature tolerances must be positive")
        if self.max_refinements < 0:
            raise ConfigError("max_refinements must be >= 0")


@dataclass
class ExperimentSettings:
    """Monte Carlo experiment sizes and pass/fail tolerances."""
    replications: int = 2000
    sample_size: int = 2000
    seed: Optional[int] = None
    variance_tolerance: float = 0.10
    ks_pvalue_floor: float = 0.01
    coverage_band: Tuple[float, float] = (0.925, 0.975)
    residual_ratio: float = 0.15
    consistency_factor: float = 3.0
    plugin_relative_error: float = 0.10
    workers: int = 1

    def __post_init__(self):
        self.coverage_band = tuple(float(x) for x in self.coverage_band)
        if len(self.coverage_band) != 2 or not 0 <= self.coverage_band[0] <= self.coverage_band[1] <= 1:
            raise ConfigError(f"coverage_band must be (low, high) in [0, 1], got {self.coverage_band}")
        if self.replications < 1 or self.sample_size < 1:
            raise ConfigError("replications and sample_size must be >= 1")
        if self.workers < 1:
            raise ConfigError("workers must be >= 1")


@dataclass
class VariationSettings:
    """Defaults for confidence intervals and the target check."""
    level: float = 0.05
    target: float = -0.5

    def __post_init__(self):
        if not 0 < self.level < 1:
            raise ConfigError(f"level must lie in (0, 1), got {self.level}")


@dataclass
class RunSettings:
    """All typed sections of a run configuration."""
    quadrature: QuadratureSettings = field(default_factory=QuadratureSettings)
    experiment: ExperimentSettings = field(default_factory=ExperimentSettings)
    variation: VariationSettings = field(default_factory=VariationSettings)
    options: Dict[str, Any] = field(default_factory=dict)

    def to_dict(self) -> Dict[str, Any]:
        data = asdict(self)
        data["experiment"]["coverage_band"] = list(self.experiment.coverage_band)
        return data

    def config_hash(self) -> str:
        return config_hash(self.to_dict())


class ConfigManager:
    """Manages run configuration files with dot-notation access."""

    def __init__(self, config_path: Optional[Path] = None):
        self.config_path = Path(config_path) if config_path else None
        self.config: Dict[str, Any] = {}
        self.logger = logging.getLogger("config_manager")

        if self.config_path and self.config_path.exists():
            self.load_config()

    def load_config(self, config_path: Optional[Path] = None) -> Dict[str, Any]:
        """Load configuration from a YAML or key=value file."""
        if config_path:
            self.config_path = Path(config_path)

        if not self.config_path or not self.config_path.exists():
            self.logger.warning(f"Config file not found: {self.config_path}")
            self.config = self._get_default_config()
            return self.config

        try:
            text = self.config_path.read_text(encoding="utf-8")
            if self.config_path.suffix.lower() in (".yaml", ".yml"):
                data = yaml.safe_load(text) or {}
                if not isinstance(data, dict):
                    raise ConfigError(f"{self.config_path}: top level must be a mapping")
                self.config = data
            else:
                self.config = {}
                self._load_key_value(text)
        except yaml.YAMLError as e:
            self.logger.error(f"Failed to load config: {e}")
            raise ConfigError(f"{self.config_path}: {e}") from e

        self.logger.info(f"Loaded configuration from {self.config_path}")
        return self.config

    def _load_key_value(self, text: str) -> None:
        for lineno, raw in enumerate(text.splitlines(), start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ConfigError(f"{self.config_path}:{lineno}: expected key=value, got '{raw.strip()}'")
            key, value = (part.strip() for part in line.split("=", 1))
            if not key:
                raise ConfigError(f"{self.config_path}:{lineno}: empty key")
            self.set(key, yaml.safe_load(value) if value else None)

    def save_config(self, config_path: Optional[Path] = None) -> bool:
        """Save current configuration to a YAML file."""
        if config_path:
            self.config_path = Path(config_path)

        if not self.config_path:
            self.logger.error("No config path specified")
            return False

        try:
            self.config_path.parent.mkdir(parents=True, exist_ok=True)
            with open(self.config_path, "w", encoding="utf-8") as f:
                yaml.safe_dump(self.config, f, default_flow_style=False, indent=2, sort_keys=False)
            self.logger.info(f"Saved configuration to {self.config_path}")
            return True
        except OSError as e:
            self.logger.error(f"Failed to save config: {e}")
            return False

    def get(self, key: str, default: Any = None) -> Any:
        """Get configuration value with dot notation support."""
        value: Any = self.config
        try:
            for k in key.split("."):
                value = value[k]
            return value
        except (KeyError, TypeError):
            return default

    def set(self, key: str, value: Any) -> None:
        """Set configuration value with dot notation support."""
        keys = key.split(".")
        target = self.config
        for k in keys[:-1]:
            if not isinstance(target.get(k), dict):
                target[k] = {}
            target = target[k]
        target[keys[-1]] = value

    def settings(self) -> RunSettings:
        """Typed view of the loaded configuration (defaults fill gaps)."""
        merged = self._get_default_config()
        _deep_update(merged, self.config)
        return RunSettings(
            quadrature=_parse_section(QuadratureSettings, merged.get("quadrature", {}), "quadrature"),
            experiment=_parse_section(ExperimentSettings, merged.get("experiment", {}), "experiment"),
            variation=_parse_section(VariationSettings, merged.get("variation", {}), "variation"),
            options={k: v for k, v in merged.items() if k not in ("quadrature", "experiment", "variation")},
        )

    def _get_default_config(self) -> Dict[str, Any]:
        """Get default configuration values."""
        return {
            "index": {
                "kind": "kakwani",
                "k": 1,
                "alpha": 1.0,
                "cost": "identity",
            },
            "panel": {
                "id_column": "id",
                "time_column": "time",
                "value_column": "value",
            },
            "quadrature": asdict(QuadratureSettings()),
            "experiment": {**asdict(ExperimentSettings()), "coverage_band": [0.925, 0.975]},
            "variation": asdict(VariationSettings()),
            "output": {
                "format": "text",
                "directory": "output",
            },
        }


def _deep_update(base: Dict[str, Any], override: Dict[str, Any]) -> None:
    for key, value in override.items():
        if isinstance(value, dict) and isinstance(base.get(key), dict):
            _deep_update(base[key], value)
        else:
            base[key] = value


def _parse_section(cls, data: Any, name: str):
    if not isinstance(data, dict):
        raise ConfigError(f"section '{name}' must be a mapping")
    known = {f.name: f for f in fields(cls)}
    unknown = set(data) - set(known)
    if unknown:
        raise ConfigError(f"unknown keys in '{name}': {sorted(unknown)}")
    kwargs = {}
    for key, value in data.items():
        default = known[key].default
        try:
            if value is None or default is None or isinstance(default, tuple):
                kwargs[key] = value
            elif isinstance(default, bool):
                if not isinstance(value, bool):
                    raise TypeError(f"expected true/false, got {value!r}")
                kwargs[key] = value
            else:
                kwargs[key] = type(default)(value)
        except (TypeError, ValueError) as e:
            raise ConfigError(f"{name}.{key}: {e}") from e
    return cls(**kwargs)


def config_hash(data: Dict[str, Any]) -> str:
    """Git-style blob hash of the canonical JSON form of a configuration."""
    payload = json.dumps(data, sort_keys=True, default=str).encode("utf-8")
    header = f"blob {len(payload)}\0".encode("utf-8")
    return hashlib.sha1(header + payload).hexdigest()


def load_run_config(config_path: Optional[Path]) -> RunSettings:
    """Parse a configuration file into typed settings."""
    if config_path is not None and not Path(config_path).exists():
        raise ConfigError(f"Config file not found: {config_path}")
    return ConfigManager(config_path).settings()


def create_default_config_file(config_path: Path) -> bool:
    """Create a default configuration file."""
    config_manager = ConfigManager()
    config_manager.config = config_manager._get_default_config()
    return config_manager.save_config(Path(config_path))
