"""Scenario configuration files.

Configs are TOML. Angles are in degrees and powers in dB relative to unit
noise power; conversion happens when scenarios are built. Unknown keys are
rejected so that a typo cannot silently fall back to a default.
"""

import dataclasses
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, Mapping, Optional, Tuple

import numpy as np

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

from .em import DoaPoa
from .errors import ConfigError

NETWORKS = ("simo", "relay")
MODES = {"simo": ("power_min", "rate_max"), "relay": ("rate_max", "robust")}
ARRAYS = ("psa", "csa", "both")
SWEEP_AXES = ("r_sec_0", "p_max_db", "p_s_db", "p_r_max_db", "p_j_max_db",
              "theta_j", "phi_j", "alpha_j", "beta_j", "error_scale", "corr_p")


@dataclass(frozen=True)
class Angles:
    """DOA (theta, phi) and POA (alpha, beta), in degrees."""

    theta: float
    phi: float = 90.0
    alpha: float = 0.0
    beta: float = 0.0

    def to_doa(self) -> DoaPoa:
        try:
            return DoaPoa.from_degrees(self.theta, self.phi, self.alpha, self.beta)
        except ValueError as exc:
            raise ConfigError(str(exc)) from None


@dataclass(frozen=True)
class ScenarioConfig:
    network: str = "simo"
    mode: str = "power_min"
    trials: int = 50
    seed: int = 20170611
    array: str = "both"
    n_antennas: int = 8
    n_eve: int = 6
    spacing: float = 0.5
    csa_pointing: Tuple[float, float] = (0.0, 0.0)
    desired: Angles = Angles(40.0, 90.0, -30.0, 0.0)
    jammer: Angles = Angles(35.0, 90.0, -30.0, 0.0)
    channel_var: float = 1.0
    sigma2: float = 1.0
    sigma_e2: float = 1.0
    sigma_r2: float = 1.0
    sigma_d2: float = 1.0
    r_sec_0: float = 2.0
    power_rule: str = "cases"
    p_max_db: float = 12.0
    p_s_db: float = 14.0
    p_r_max_db: float = 25.0
    p_j_max_db: float = 10.0
    corr_p: float = 0.5
    ke_noise_variant: str = "printed"
    max_outer: int = 10
    outer_tol: float = 1e-3
    error_scale: float = 100.0
    robust_samples: int = 100
    sweep_axis: Optional[str] = None
    sweep_values: Tuple[float, ...] = field(default_factory=tuple)

    def __post_init__(self):
        if self.network not in NETWORKS:
            raise ConfigError(f"network must be one of {NETWORKS}, got {self.network!r}")
        if self.mode not in MODES[self.network]:
            raise ConfigError(f"mode {self.mode!r} not available for {self.network}; "
                              f"choose from {MODES[self.network]}")
        if self.array not in ARRAYS:
            raise ConfigError(f"array must be one of {ARRAYS}")
        if not isinstance(self.trials, int) or self.trials < 1:
            raise ConfigError("trials must be a positive integer")
        if not isinstance(self.seed, int) or not 0 <= self.seed < 2 ** 64:
            raise ConfigError("seed must be an integer in [0, 2^64)")
        if self.n_antennas < 1 or self.n_eve < 1:
            raise ConfigError("antenna counts must be positive")
        if self.network == "simo" and self.n_antennas < 2:
            raise ConfigError("the SIMO destination needs at least two antennas")
        for name in ("spacing", "channel_var", "sigma2", "sigma_e2", "sigma_r2", "sigma_d2", "error_scale"):
            value = getattr(self, name)
            if not np.isfinite(value) or value <= 0:
                raise ConfigError(f"{name} must be positive")
        if not 0.0 <= self.corr_p < 1.0:
            raise ConfigError("corr_p must lie in [0, 1)")
        if self.mode == "power_min" and not self.r_sec_0 > 0:
            raise ConfigError("r_sec_0 must be positive for power minimization")
        if self.power_rule not in ("cases", "exact"):
            raise ConfigError("power_rule must be 'cases' or 'exact'")
        if self.ke_noise_variant not in ("printed", "eve_noise"):
            raise ConfigError("ke_noise_variant must be 'printed' or 'eve_noise'")
        if self.robust_samples < 1 or self.max_outer < 1:
            raise ConfigError("robust_samples and max_outer must be positive")
        if self.sweep_axis is not None:
            if self.sweep_axis not in SWEEP_AXES:
                raise ConfigError(f"unknown sweep axis {self.sweep_axis!r}; choose from {SWEEP_AXES}")
            if len(self.sweep_values) == 0:
                raise ConfigError("sweep needs at least one value")
            if not all(np.isfinite(v) for v in self.sweep_values):
                raise ConfigError("sweep values must be finite")
        for angles in (self.desired, self.jammer):
            angles.to_doa()

    def points(self):
        """(sweep value, config at that value) pairs; a single point when no sweep is set."""
        if self.sweep_axis is None:
            return [(float("nan"), self)]
        return [(float(v), self.at(self.sweep_axis, float(v))) for v in self.sweep_values]

    def at(self, axis: str, value: float) -> "ScenarioConfig":
        if axis not in SWEEP_AXES:
            raise ConfigError(f"unknown sweep axis {axis!r}")
        if axis.endswith("_j") and axis != "r_sec_0":
            key = axis[:-2]
            return dataclasses.replace(self, jammer=dataclasses.replace(self.jammer, **{key: value}))
        return dataclasses.replace(self, **{axis: value})


# table name -> {toml key: config field}
_LAYOUT: Dict[str, Dict[str, str]] = {
    "": {"network": "network", "mode": "mode", "trials": "trials", "seed": "seed", "array": "array"},
    "antennas": {"n": "n_antennas", "n_eve": "n_eve", "spacing": "spacing", "csa_pointing": "csa_pointing"},
    "noise": {"channel_var": "channel_var", "sigma2": "sigma2", "sigma_e2": "sigma_e2",
              "sigma_r2": "sigma_r2", "sigma_d2": "sigma_d2"},
    "power": {"r_sec_0": "r_sec_0", "rule": "power_rule", "p_max_db": "p_max_db", "p_s_db": "p_s_db",
              "p_r_max_db": "p_r_max_db", "p_j_max_db": "p_j_max_db"},
    "relay": {"corr_p": "corr_p", "ke_noise_variant": "ke_noise_variant", "max_outer": "max_outer",
              "outer_tol": "outer_tol"},
    "robust": {"error_scale": "error_scale", "samples": "robust_samples"},
    "sweep": {"axis": "sweep_axis", "values": "sweep_values"},
}
_ANGLE_TABLES = ("desired", "jammer")
_INT_FIELDS = {"trials", "seed", "n_antennas", "n_eve", "max_outer", "robust_samples"}
_STR_FIELDS = {"network", "mode", "array", "power_rule", "ke_noise_variant", "sweep_axis"}


def _convert(name: str, value: Any) -> Any:
    if name in _INT_FIELDS:
        if isinstance(value, bool) or not isinstance(value, int):
            raise ConfigError(f"{name} must be an integer")
        return value
    if name in _STR_FIELDS:
        if not isinstance(value, str):
            raise ConfigError(f"{name} must be a string")
        return value
    if name in ("sweep_values", "csa_pointing"):
        if not isinstance(value, list) or not all(isinstance(v, (int, float)) and not isinstance(v, bool)
                                                  for v in value):
            raise ConfigError(f"{name} must be a list of numbers")
        if name == "csa_pointing" and len(value) != 2:
            raise ConfigError("csa_pointing is [theta_e, phi_e] in degrees")
        return tuple(float(v) for v in value)
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(f"{name} must be a number")
    return float(value)


def config_from_dict(data: Mapping[str, Any]) -> ScenarioConfig:
    """Build a config from the nested TOML mapping."""
    kwargs: Dict[str, Any] = {}
    for key, value in data.items():
        if isinstance(value, dict):
            if key in _ANGLE_TABLES:
                unknown = set(value) - {"theta", "phi", "alpha", "beta"}
                if unknown:
                    raise ConfigError(f"unknown keys in [{key}]: {sorted(unknown)}")
                kwargs[key] = Angles(**{k: _convert(k, v) for k, v in value.items()})
                continue
            if key not in _LAYOUT or key == "":
                raise ConfigError(f"unknown table [{key}]")
            for sub, sub_value in value.items():
                if sub not in _LAYOUT[key]:
                    raise ConfigError(f"unknown key {sub!r} in [{key}]")
                name = _LAYOUT[key][sub]
                kwargs[name] = _convert(name, sub_value)
        elif key in _LAYOUT[""]:
            kwargs[key] = _convert(key, value)
        else:
            raise ConfigError(f"unknown top-level key {key!r}")
    try:
        return ScenarioConfig(**kwargs)
    except TypeError as exc:
        raise ConfigError(str(exc)) from None


def load_config(path) -> ScenarioConfig:
    """Read and validate a TOML config file; every problem surfaces as ConfigError."""
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc.strerror}") from None
    try:
        data = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"invalid TOML in {path}: {exc}") from None
    return config_from_dict(data)
