"""Experiment configuration: YAML round-trip, dotted overrides, content hash.

One ``ExperimentConfig`` bundles every knob of a run into named sections
(``run``, ``constellation``, ``link_budget``, ``hardware``, ``workload``,
``tasks``, ``env``, ``reward``, ``training``, ``optimizer``, ``bench``).
Sections map one-to-one onto the frozen dataclasses of the core modules, so
loading a file re-runs their validation. Overrides use ``section.key=value``
strings with YAML-typed values, and the content hash identifies a fully
resolved configuration independent of file formatting.
"""

from __future__ import annotations

import dataclasses
import hashlib
import json
from dataclasses import dataclass, fields, is_dataclass
from pathlib import Path

import numpy as np
import yaml

from .bench import ALL_SCHEMES, ALL_SWEEPS, ExperimentGrid
from .constellation import HardwareProfile, LinkBudget, ShellConfig
from .errors import ConfigError
from .optimizer import ROUTERS
from .qmix.training import TrainingConfig
from .routing_env import Instance, RewardConfig, RoutingEnv, make_instance
from .workload import WorkloadConfig


@dataclass(frozen=True)
class RunSection:
    """Bookkeeping that is not a model parameter."""

    seed: int = 0
    output_dir: str = "runs"


@dataclass(frozen=True)
class TasksSection:
    """Role placement and the per-task offloaded shares."""

    n_remote_sensing: int = 6
    n_computing: int = 3
    alpha: float | tuple[float, ...] = 0.5
    slot: int = 0
    placement_seed: int | None = None

    def __post_init__(self):
        if self.n_remote_sensing < 1 or self.n_computing < 1:
            raise ConfigError("need at least one sensing and one computing satellite")
        values = self.alpha if isinstance(self.alpha, tuple) else (self.alpha,)
        for a in values:
            if not 0.0 <= float(a) <= 1.0:
                raise ConfigError(f"alpha {a} outside [0, 1]")
        if self.slot < 0:
            raise ConfigError("slot must be non-negative")


@dataclass(frozen=True)
class EnvSection:
    """Episode mechanics that sit outside the physical model."""

    step_limit_factor: int = 4

    def __post_init__(self):
        if self.step_limit_factor < 1:
            raise ConfigError("step_limit_factor must be positive")


@dataclass(frozen=True)
class OptimizerSection:
    """Offloading-share search settings."""

    iterations: int = 10
    early_stop: bool = True
    router: str = "policy"

    def __post_init__(self):
        if self.iterations < 1:
            raise ConfigError("iterations must be positive")
        if self.router not in ROUTERS:
            raise ConfigError(f"unknown router {self.router!r}; pick one of {ROUTERS}")


@dataclass(frozen=True)
class BenchSection:
    """Scheme-comparison sweep layout."""

    sweep: str = "computing_capacity"
    values: tuple = (1.0e12, 5.0e12, 1.0e13, 2.0e13)
    seeds: tuple[int, ...] = (0, 1, 2)
    schemes: tuple[str, ...] = ALL_SCHEMES

    def __post_init__(self):
        if self.sweep not in ALL_SWEEPS:
            raise ConfigError(f"unknown sweep {self.sweep!r}; pick one of {ALL_SWEEPS}")
        if not self.values:
            raise ConfigError("bench values must be non-empty")
        if not self.seeds:
            raise ConfigError("bench seeds must be non-empty")
        for s in self.schemes:
            if s not in ALL_SCHEMES:
                raise ConfigError(f"unknown scheme {s!r}; pick one of {ALL_SCHEMES}")

    def grid(self) -> ExperimentGrid:
        return ExperimentGrid(
            sweep=self.sweep, values=tuple(self.values), seeds=tuple(self.seeds)
        )


_SECTIONS = {
    "run": RunSection,
    "constellation": ShellConfig,
    "link_budget": LinkBudget,
    "hardware": HardwareProfile,
    "workload": WorkloadConfig,
    "tasks": TasksSection,
    "env": EnvSection,
    "reward": RewardConfig,
    "training": TrainingConfig,
    "optimizer": OptimizerSection,
    "bench": BenchSection,
}


@dataclass(frozen=True)
class ExperimentConfig:
    run: RunSection = RunSection()
    constellation: ShellConfig = ShellConfig(num_planes=8, sats_per_plane=8)
    link_budget: LinkBudget = LinkBudget()
    hardware: HardwareProfile = HardwareProfile()
    workload: WorkloadConfig = WorkloadConfig()
    tasks: TasksSection = TasksSection()
    env: EnvSection = EnvSection()
    reward: RewardConfig = RewardConfig()
    training: TrainingConfig = TrainingConfig()
    optimizer: OptimizerSection = OptimizerSection()
    bench: BenchSection = BenchSection()


def default_config() -> ExperimentConfig:
    return ExperimentConfig()


def _to_plain(value):
    if is_dataclass(value) and not isinstance(value, type):
        return {f.name: _to_plain(getattr(value, f.name)) for f in fields(value)}
    if isinstance(value, (tuple, list)):
        return [_to_plain(v) for v in value]
    if isinstance(value, (np.integer,)):
        return int(value)
    if isinstance(value, (np.floating,)):
        return float(value)
    return value


def to_dict(config: ExperimentConfig) -> dict:
    """Nested plain-Python dict (tuples become lists) suitable for YAML/JSON."""
    return _to_plain(config)


# fields whose scalar default also accepts a per-task list
_LIST_FIELDS = {("tasks", "alpha")}


def _coerce(section: str, name: str, value, default):
    allows_list = isinstance(default, tuple) or (section, name) in _LIST_FIELDS
    if isinstance(value, (list, tuple)):
        if not allows_list:
            raise ConfigError(f"{section}.{name} does not take a list: {value!r}")
        return tuple(value)
    if isinstance(default, tuple):
        raise ConfigError(f"{section}.{name} expects a list, got {value!r}")
    if isinstance(default, bool):
        if not isinstance(value, bool):
            raise ConfigError(f"{section}.{name} expects a boolean, got {value!r}")
        return value
    if isinstance(default, int) and not isinstance(default, bool):
        value = _as_number(section, name, value)
        if float(value) != int(value):
            raise ConfigError(f"{section}.{name} expects an integer, got {value!r}")
        return int(value)
    if isinstance(default, float):
        return float(_as_number(section, name, value))
    return value


def _as_number(section: str, name: str, value):
    # yaml 1.1 reads bare "2e-3" as a string, so accept numeric strings too
    if isinstance(value, str):
        try:
            value = float(value)
        except ValueError:
            pass
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(f"{section}.{name} expects a number, got {value!r}")
    return value


def _build_section(section: str, cls, data: dict, defaults):
    if not isinstance(data, dict):
        raise ConfigError(f"section {section!r} must be a mapping")
    known = {f.name for f in fields(cls)}
    unknown = set(data) - known
    if unknown:
        raise ConfigError(
            f"unknown key(s) in section {section!r}: {sorted(unknown)}"
        )
    kwargs = {}
    for name, value in data.items():
        if value is None:
            kwargs[name] = None
        else:
            kwargs[name] = _coerce(section, name, value, getattr(defaults, name))
    return dataclasses.replace(defaults, **kwargs)


def from_dict(data: dict) -> ExperimentConfig:
    """Build and validate a configuration from a nested mapping."""
    if not isinstance(data, dict):
        raise ConfigError("configuration root must be a mapping")
    unknown = set(data) - set(_SECTIONS)
    if unknown:
        raise ConfigError(f"unknown section(s): {sorted(unknown)}")
    base = ExperimentConfig()
    sections = {
        name: _build_section(name, cls, data.get(name, {}), getattr(base, name))
        for name, cls in _SECTIONS.items()
    }
    return ExperimentConfig(**sections)


def load_config(path: str | Path) -> ExperimentConfig:
    text = Path(path).read_text()
    data = yaml.safe_load(text)
    if data is None:
        data = {}
    return from_dict(data)


def save_config(config: ExperimentConfig, path: str | Path) -> None:
    Path(path).write_text(
        yaml.safe_dump(to_dict(config), sort_keys=False, default_flow_style=None)
    )


def apply_overrides(config: ExperimentConfig, overrides) -> ExperimentConfig:
    """Apply ``section.key=value`` strings; values are parsed as YAML."""
    data = to_dict(config)
    for item in overrides:
        if "=" not in item:
            raise ConfigError(f"override {item!r} is not of the form section.key=value")
        dotted, raw = item.split("=", 1)
        parts = dotted.strip().split(".")
        if len(parts) != 2:
            raise ConfigError(f"override key {dotted!r} must be section.key")
        section, key = parts
        if section not in _SECTIONS:
            raise ConfigError(f"unknown section {section!r} in override {item!r}")
        try:
            value = yaml.safe_load(raw)
        except yaml.YAMLError as err:
            raise ConfigError(f"cannot parse override value {raw!r}: {err}") from err
        data.setdefault(section, {})[key] = value
    return from_dict(data)


def config_hash(config: ExperimentConfig) -> str:
    """Stable 16-hex-digit digest of the fully resolved configuration."""
    canonical = json.dumps(to_dict(config), sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canonical.encode()).hexdigest()[:16]


def instance_from_config(
    config: ExperimentConfig,
    alphas=None,
    cpt_assignment=None,
) -> Instance:
    """Materialize the configured scenario (optionally with other shares)."""
    if alphas is None:
        alphas = (
            list(config.tasks.alpha)
            if isinstance(config.tasks.alpha, tuple)
            else config.tasks.alpha
        )
    placement_rng = (
        np.random.default_rng(config.tasks.placement_seed)
        if config.tasks.placement_seed is not None
        else None
    )
    return make_instance(
        config.constellation,
        config.workload,
        alphas=alphas,
        slot=config.tasks.slot,
        n_remote_sensing=config.tasks.n_remote_sensing,
        n_computing=config.tasks.n_computing,
        hardware=config.hardware,
        budget=config.link_budget,
        placement_rng=placement_rng,
        cpt_assignment=cpt_assignment,
    )


def env_from_config(
    config: ExperimentConfig, instance: Instance | None = None
) -> RoutingEnv:
    if instance is None:
        instance = instance_from_config(config)
    return RoutingEnv(
        instance,
        reward=config.reward,
        step_limit_factor=config.env.step_limit_factor,
    )
