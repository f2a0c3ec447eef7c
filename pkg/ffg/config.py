"""
Configuration management for ffg.
Handles loading configuration from defaults, JSON files, .env files and
environment variables, and resolves the numerical settings used by the solvers.
"""

import copy
import json
import os
from dataclasses import asdict, dataclass, fields, replace
from pathlib import Path
from typing import Any, Dict, Optional

from .errors import ConfigError

try:
    from dotenv import load_dotenv

    DOTENV_AVAILABLE = True
except ImportError:
    DOTENV_AVAILABLE = False

ENV_PREFIX = "FFG_"
ENV_CONFIG_FILE = "FFG_CONFIG_FILE"


@dataclass(frozen=True)
class NumericsSettings:
    """
    Discretization and tolerance knobs shared by every solver.

    Attributes:
        k_nodes: Gauss-Legendre nodes for the wavenumber integral (split at k=0)
        tau_points: Uniform tau grid used for discrete Fourier sums
        l_max: Highest harmonic kept in the Floquet-Magnus sums
        m_max: Temporal truncation of the composite Floquet space
        n_fock: Fock-space truncation dimension
        trust_margin: Rows/columns excluded from oracle comparisons at the top
        tail_threshold: Allowed weight in the top Fock level of a state
        k_max: Wavenumber cutoff; None picks it from the coefficient envelope
        propagator_steps: Initial number of time slices
        propagator_tol: Richardson error tolerance of step doubling (max entry, trusted block)
        max_propagator_steps: Step count at which step doubling gives up
        propagator_method: "cf4" (fourth order) or "midpoint" (second order)
        kummer_max_terms: Series cap for the regularized Kummer function
        max_floquet_dim: Largest composite Floquet matrix accepted
    """

    k_nodes: int = 400
    tau_points: int = 256
    l_max: int = 10
    m_max: int = 10
    n_fock: int = 60
    trust_margin: int = 10
    tail_threshold: float = 1e-8
    k_max: Optional[float] = None
    propagator_steps: int = 64
    propagator_tol: float = 1e-9
    max_propagator_steps: int = 2**14
    propagator_method: str = "cf4"
    kummer_max_terms: int = 10000
    max_floquet_dim: int = 20000

    def __post_init__(self) -> None:
        positive_ints = (
            "k_nodes",
            "tau_points",
            "l_max",
            "m_max",
            "propagator_steps",
            "max_propagator_steps",
            "kummer_max_terms",
            "max_floquet_dim",
        )
        for name in positive_ints:
            value = getattr(self, name)
            if isinstance(value, bool) or not isinstance(value, int) or value < 1:
                raise ConfigError("must be a positive integer", f"numerics.{name}")
        if self.n_fock < 2:
            raise ConfigError("must be at least 2", "numerics.n_fock")
        if self.trust_margin < 0 or self.trust_margin >= self.n_fock:
            raise ConfigError("must lie in [0, n_fock)", "numerics.trust_margin")
        if self.tail_threshold <= 0 or self.propagator_tol <= 0:
            raise ConfigError("tolerances must be positive", "numerics")
        if self.k_max is not None and self.k_max <= 0:
            raise ConfigError("must be positive or null", "numerics.k_max")
        if self.propagator_method not in ("cf4", "midpoint"):
            raise ConfigError(
                "must be 'cf4' or 'midpoint'", "numerics.propagator_method"
            )

    @property
    def n_trust(self) -> int:
        """Size of the trusted block at the configured truncation."""
        return self.n_fock - self.trust_margin

    def trusted(self, n: int) -> int:
        """Trusted block size at truncation n."""
        return max(1, n - self.trust_margin)

    def with_overrides(self, **overrides: Any) -> "NumericsSettings":
        """Return a copy with the non-None overrides applied."""
        values = {k: v for k, v in overrides.items() if v is not None}
        return replace(self, **values)

    @classmethod
    def from_mapping(cls, data: Optional[Dict[str, Any]]) -> "NumericsSettings":
        """
        Build settings from a plain mapping, rejecting unknown keys.

        Args:
            data: Mapping such as config["numerics"]

        Returns:
            Validated settings
        """
        data = dict(data or {})
        known = {f.name for f in fields(cls)}
        unknown = sorted(set(data) - known)
        if unknown:
            raise ConfigError(f"unknown keys {unknown}", "numerics")
        return cls(**data)

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)


DEFAULT_CONFIG: Dict[str, Any] = {
    "server": {"name": "ffg-mcp", "version": "0.1.0", "log_level": "WARNING"},
    "numerics": NumericsSettings().to_dict(),
    "harness": {"threads": 1, "out": "results"},
}


def load_config(config_path: Optional[str] = None) -> Dict[str, Any]:
    """
    Load configuration from defaults, config files and environment variables.

    Environment variables with the prefix FFG_ are automatically included
    in the configuration (with the prefix removed and name lowercased, double
    underscores separating nested keys).

    Also loads from .env files if python-dotenv is available.

    Args:
        config_path: Optional path to a JSON config file

    Returns:
        A dictionary containing configuration values
    """
    if DOTENV_AVAILABLE:
        env_file = Path.cwd() / ".env"
        if env_file.exists():
            load_dotenv(env_file)
        else:
            current_dir = Path(__file__).parent
            while current_dir != current_dir.parent:
                env_file = current_dir / ".env"
                if env_file.exists():
                    load_dotenv(env_file)
                    break
                current_dir = current_dir.parent

    config = copy.deepcopy(DEFAULT_CONFIG)

    if config_path:
        _deep_merge(config, _read_json(config_path))

    env_config_path = os.environ.get(ENV_CONFIG_FILE)
    if env_config_path and env_config_path != config_path:
        _deep_merge(config, _read_json(env_config_path))

    # FFG_NUMERICS__K_NODES=600 -> config["numerics"]["k_nodes"] = 600
    env_config: Dict[str, Any] = {}
    for key, value in os.environ.items():
        if key.startswith(ENV_PREFIX) and key != ENV_CONFIG_FILE:
            config_key_parts = key[len(ENV_PREFIX) :].lower().split("__")
            current = env_config
            for part in config_key_parts[:-1]:
                current = current.setdefault(part, {})
            current[config_key_parts[-1]] = _convert_value(value)

    _deep_merge(config, env_config)

    return config


def numerics_from_config(config: Dict[str, Any]) -> NumericsSettings:
    """Resolve the validated numerics section of a loaded configuration."""
    return NumericsSettings.from_mapping(config.get("numerics"))


def _read_json(path: str) -> Dict[str, Any]:
    config_file = Path(path)
    if not config_file.exists():
        raise ConfigError(f"config file not found: {path}")
    try:
        with open(config_file, "r") as f:
            data = json.load(f)
    except (OSError, json.JSONDecodeError) as e:
        raise ConfigError(f"failed to load config file {path}: {e}") from e
    if not isinstance(data, dict):
        raise ConfigError(f"config file {path} must hold a JSON object")
    return data


def _convert_value(value: str) -> Any:
    """
    Try to convert a string value to an appropriate type.

    Args:
        value: The string value to convert

    Returns:
        The converted value
    """
    lowered = value.lower()
    if lowered in ("true", "yes"):
        return True
    if lowered in ("false", "no"):
        return False
    if lowered in ("null", "none"):
        return None

    try:
        return int(value)
    except ValueError:
        try:
            return float(value)
        except ValueError:
            return value


def _deep_merge(target: Dict[str, Any], source: Dict[str, Any]) -> None:
    """
    Deep merge two dictionaries.

    Args:
        target: The target dictionary to merge into
        source: The source dictionary to merge from
    """
    for key, value in source.items():
        if key in target and isinstance(target[key], dict) and isinstance(value, dict):
            _deep_merge(target[key], value)
        else:
            target[key] = value
