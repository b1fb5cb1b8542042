"""Run configuration: YAML loading, validation, echo and hashing.

A config file is a nested mapping whose sections mirror the component
config types.  Unknown keys are rejected and every validation failure is
reported as a :class:`ConfigError` carrying the dotted field path.
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import asdict, dataclass, fields, replace
from pathlib import Path
from typing import Any, Optional

import yaml

from .adapt import DEFAULT_E, DEFAULT_R
from .classifier import TrainConfig
from .errors import ConfigError
from .guidance import GuidanceConfig
from .synthdata import BenchmarkSpec


@dataclass(frozen=True)
class ScheduleParams:
    T_train: int = 1000
    beta_start: float = 1e-4
    beta_end: float = 0.02

    def __post_init__(self):
        if int(self.T_train) != self.T_train or self.T_train < 1:
            raise ConfigError("must be a positive integer", "T_train")
        if not 0 < self.beta_start <= self.beta_end < 1:
            raise ConfigError("need 0 < beta_start <= beta_end < 1", "beta_end")


@dataclass(frozen=True)
class RunConfig:
    benchmark: BenchmarkSpec = BenchmarkSpec()
    schedule: ScheduleParams = ScheduleParams()
    guidance: GuidanceConfig = GuidanceConfig()
    rho_init: Optional[float] = None  # None -> benchmark default n / 8
    rho_mix: Optional[float] = None
    redenoise_gamma: Optional[float] = None  # None -> gamma1
    E: float = DEFAULT_E
    R: int = DEFAULT_R
    source_train: TrainConfig = TrainConfig()
    adapt_train: TrainConfig = TrainConfig()
    seed: int = 0
    output_dir: str = "runs/default"
    dump_traces: bool = False
    trace_samples: int = 16

    def __post_init__(self):
        if int(self.seed) != self.seed or self.seed < 0:
            raise ConfigError("must be a nonnegative integer", "seed")
        if int(self.R) != self.R or self.R < 0:
            raise ConfigError("must be a nonnegative integer", "R")
        if not self.E >= 0:
            raise ConfigError("must be >= 0", "E")
        if int(self.trace_samples) != self.trace_samples or self.trace_samples < 0:
            raise ConfigError("must be a nonnegative integer", "trace_samples")
        if self.guidance.S > self.schedule.T_train:
            raise ConfigError("more inference steps than schedule steps", "guidance.S")
        for name in ("rho_init", "rho_mix"):
            rho = getattr(self, name)
            if rho is not None and math.isnan(rho):
                raise ConfigError("cutoff must be a number", name)
        # the single run seed drives every stream
        if self.benchmark.seed != self.seed:
            object.__setattr__(self, "benchmark", replace(self.benchmark, seed=self.seed))

    @property
    def rho_init_value(self) -> float:
        return self.benchmark.rho_default if self.rho_init is None else float(self.rho_init)

    @property
    def rho_mix_value(self) -> float:
        return self.benchmark.rho_default if self.rho_mix is None else float(self.rho_mix)

    def to_dict(self) -> dict:
        bench = self.benchmark.to_dict()
        del bench["seed"]
        src = asdict(self.source_train)
        ada = asdict(self.adapt_train)
        del src["seed"], ada["seed"]
        return {
            "seed": int(self.seed),
            "output_dir": str(self.output_dir),
            "dump_traces": bool(self.dump_traces),
            "trace_samples": int(self.trace_samples),
            "benchmark": bench,
            "schedule": asdict(self.schedule),
            "guidance": asdict(self.guidance),
            "rho_init": self.rho_init,
            "rho_mix": self.rho_mix,
            "redenoise_gamma": self.redenoise_gamma,
            "E": self.E,
            "R": int(self.R),
            "source_train": src,
            "adapt_train": ada,
        }

    def hash_dict(self) -> dict:
        """The part of the config that determines results; output location and trace dumps are excluded."""
        d = self.to_dict()
        for key in ("output_dir", "dump_traces", "trace_samples"):
            del d[key]
        d["rho_init"] = self.rho_init_value
        d["rho_mix"] = self.rho_mix_value
        return d


def config_hash(cfg: RunConfig) -> str:
    text = json.dumps(cfg.hash_dict(), sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(text.encode("utf-8")).hexdigest()


_SECTIONS = {
    "benchmark": BenchmarkSpec,
    "schedule": ScheduleParams,
    "guidance": GuidanceConfig,
    "source_train": TrainConfig,
    "adapt_train": TrainConfig,
}
_FORBIDDEN = {"benchmark": {"seed"}, "source_train": {"seed"}, "adapt_train": {"seed"}}

_INT_FIELDS = {"n", "C", "samples_per_class_per_domain", "T_train", "S", "epochs", "batch_size", "seed", "R", "trace_samples"}


def _coerce(path: str, name: str, value: Any, default: Any):
    """Light type checking so that a string in a numeric slot names its field."""
    if value is None:
        return None
    if isinstance(default, bool) or name == "dump_traces":
        if not isinstance(value, bool):
            raise ConfigError(f"expected true/false, got {value!r}", path)
        return value
    if name in _INT_FIELDS:
        if isinstance(value, bool) or not isinstance(value, int):
            raise ConfigError(f"expected an integer, got {value!r}", path)
        return value
    if isinstance(default, str):
        if not isinstance(value, str):
            raise ConfigError(f"expected a string, got {value!r}", path)
        return value
    if isinstance(default, tuple) or name in ("class_amplitudes", "domain_signs"):
        if not isinstance(value, (list, tuple)):
            raise ConfigError(f"expected a list of numbers, got {value!r}", path)
        return tuple(_coerce(f"{path}[{i}]", "", v, 0.0) for i, v in enumerate(value))
    if isinstance(value, str):
        # YAML 1.1 reads "1e-4" as a string
        try:
            return float(value)
        except ValueError:
            pass
    if not _is_number(value):
        raise ConfigError(f"expected a number, got {value!r}", path)
    return float(value)


def _is_number(v) -> bool:
    return isinstance(v, (int, float)) and not isinstance(v, bool)


def _build_section(name: str, cls, raw) -> Any:
    if raw is None:
        raw = {}
    if not isinstance(raw, dict):
        raise ConfigError("expected a mapping", name)
    known = {f.name: f for f in fields(cls)}
    kwargs = {}
    for key, value in raw.items():
        path = f"{name}.{key}"
        if key not in known or key in _FORBIDDEN.get(name, ()):
            hint = " (set the top-level seed instead)" if key == "seed" else ""
            raise ConfigError(f"unknown key{hint}", path)
        if value is None and known[key].default is not None:
            raise ConfigError("may not be null", path)
        kwargs[key] = _coerce(path, key, value, known[key].default)
    try:
        return cls(**kwargs)
    except ConfigError as e:
        raise ConfigError(str(e).split(": ", 1)[-1], f"{name}.{e.field}" if e.field else name) from None
    except (TypeError, ValueError) as e:
        raise ConfigError(str(e), name) from None


def config_from_dict(raw: Optional[dict]) -> RunConfig:
    raw = {} if raw is None else raw
    if not isinstance(raw, dict):
        raise ConfigError("config must be a mapping at top level")
    top = {f.name: f for f in fields(RunConfig)}
    kwargs = {}
    for key, value in raw.items():
        if key not in top:
            raise ConfigError("unknown key", key)
        if key in _SECTIONS:
            kwargs[key] = _build_section(key, _SECTIONS[key], value)
        else:
            kwargs[key] = _coerce(key, key, value, top[key].default)
    for key in ("seed", "E", "R", "output_dir", "dump_traces", "trace_samples"):
        if key in kwargs and kwargs[key] is None:
            raise ConfigError("may not be null", key)
    return RunConfig(**kwargs)


def load_config(path) -> RunConfig:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as e:
        raise ConfigError(f"cannot read config: {e.strerror}", str(path)) from None
    try:
        raw = yaml.safe_load(text)
    except yaml.YAMLError as e:
        raise ConfigError(f"not valid YAML: {e}", str(path)) from None
    return config_from_dict(raw)


def dump_config(cfg: RunConfig) -> str:
    """YAML echo that loads back to an equal config."""
    return yaml.safe_dump(cfg.to_dict(), sort_keys=False, default_flow_style=False)


def default_config_text() -> str:
    return dump_config(RunConfig())
